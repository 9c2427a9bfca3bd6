#pragma once
// Single-trajectory evolution: draw an outcome from the exact conditional
// distribution, apply its Kraus operator, renormalize, record.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "qtraj/errors.hpp"
#include "qtraj/kraus.hpp"
#include "qtraj/qstate.hpp"
#include "qtraj/rng.hpp"
#include "qtraj/sampler.hpp"

namespace qtraj {

inline constexpr double kMinOutcomeWeight = 1e-300;

struct KrausUpdate {
  PureTwoQubitState state;
  double weight = 0.0;  // ||K s||^2: probability, or density at the readout
};

inline KrausUpdate apply_kraus(const PureTwoQubitState& s, const KrausOperator& k) {
  if (!s.is_normalized()) throw PreconditionError("apply_kraus requires a normalized state");
  const Vector4c v = k.matrix * s.amplitudes();
  const double w = v.squaredNorm();
  if (!(w >= kMinOutcomeWeight)) {
    throw ImpossibleOutcomeError("Kraus operator annihilates the state (weight " +
                                 std::to_string(w) + ")");
  }
  return {PureTwoQubitState(Vector4c(v / std::sqrt(w))), w};
}

/// Number of timesteps covering [0, t_max].
inline std::size_t step_count(double t_max, double dt) {
  if (!(t_max > 0.0)) throw PreconditionError("t_max must be positive");
  return static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
}

struct Snapshot {
  std::size_t step = 0;
  PureTwoQubitState state;
};

struct TrajectoryOptions {
  std::size_t snapshot_stride = 10;  // 0 disables snapshots
  SamplerMode sampler = SamplerMode::exact;
  // Stop after the first step whose concurrence exceeds this value.
  std::optional<double> stop_above;
  bool keep_readouts = true;
};

/// Everything needed to reproduce and audit one trajectory. Entry k of
/// `times` and `concurrence` belongs to the state after k steps; readout
/// k-1 is the outcome drawn in step k.
struct TrajectoryRecord {
  MeasurementConfig cfg;
  PureTwoQubitState initial;
  double t_max = 0.0;
  std::uint64_t seed = 0;
  SamplerMode sampler = SamplerMode::exact;
  std::vector<double> times;
  std::vector<double> concurrence;
  std::vector<Outcome> readouts;
  std::vector<Snapshot> snapshots;
  std::size_t norm_warnings = 0;  // steps entered with |norm^2 - 1| > 1e-8
  PureTwoQubitState final_state;

  std::size_t steps() const { return concurrence.empty() ? 0 : concurrence.size() - 1; }

  const Snapshot* snapshot_at(std::size_t step) const {
    for (const auto& s : snapshots) {
      if (s.step == step) return &s;
    }
    return nullptr;
  }
};

inline TrajectoryRecord run_trajectory(const PureTwoQubitState& initial,
                                       const MeasurementConfig& cfg, double t_max,
                                       std::uint64_t seed, const TrajectoryOptions& opt = {}) {
  const auto prop = joint_propagator(cfg);
  const std::size_t n = step_count(t_max, cfg.dt);
  const PureTwoQubitState start = initial.normalized();

  TrajectoryRecord rec;
  rec.cfg = cfg;
  rec.initial = start;
  rec.t_max = t_max;
  rec.seed = seed;
  rec.sampler = opt.sampler;
  rec.times.reserve(n + 1);
  rec.concurrence.reserve(n + 1);
  if (opt.keep_readouts) rec.readouts.reserve(n);

  RngStream rng(seed);
  Vector4c s = start.amplitudes();
  auto record = [&](std::size_t step, double c) {
    rec.times.push_back(static_cast<double>(step) * cfg.dt);
    rec.concurrence.push_back(c);
    if (opt.snapshot_stride > 0 && step % opt.snapshot_stride == 0) {
      rec.snapshots.push_back({step, PureTwoQubitState(s)});
    }
  };
  record(0, concurrence_pure(start));

  for (std::size_t step = 1; step <= n; ++step) {
    const double drift = std::abs(s.squaredNorm() - 1.0);
    if (drift > kNormTolerance) ++rec.norm_warnings;

    const FieldMatrix f = field_state(prop, s);
    SampledStep draw = sample_step(cfg.scheme, opt.sampler, f, rng);
    const double n2 = draw.post.squaredNorm();
    if (!(n2 > 0.0) || !(draw.weight >= kMinOutcomeWeight)) {
      throw ImpossibleOutcomeError("sampler drew a zero-weight outcome at step " +
                                   std::to_string(step));
    }
    s = draw.post / std::sqrt(n2);
    if (opt.keep_readouts) rec.readouts.push_back(draw.outcome);

    const double c = std::min(1.0, 2.0 * std::abs(s(kEE) * s(kGG) - s(kEG) * s(kGE)));
    record(step, c);
    if (opt.stop_above && c > *opt.stop_above) {
      if (opt.snapshot_stride == 0 || step % opt.snapshot_stride != 0) {
        rec.snapshots.push_back({step, PureTwoQubitState(s)});
      }
      break;
    }
  }
  rec.final_state = PureTwoQubitState(s);
  return rec;
}

/// Kraus operator for a recorded outcome, built through the public
/// *_kraus constructors (independent of the sampler's fast path).
inline KrausOperator kraus_for_outcome(const JointPropagator& p, const Outcome& o) {
  return std::visit(
      [&p](const auto& v) -> KrausOperator {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PhotoCounts>) {
          return {p.fock[fock_index(v)], v};
        } else if constexpr (std::is_same_v<T, QuadraturePair>) {
          return homodyne_kraus(p, v.x3, v.x4);
        } else {
          return heterodyne_kraus(p, v.alpha3, v.alpha4);
        }
      },
      o);
}

/// State after `steps` steps, recomputed from the readout stream.
inline PureTwoQubitState replay_state(const TrajectoryRecord& rec, std::size_t steps) {
  if (steps > rec.readouts.size()) {
    throw PreconditionError("replay past the end of the recorded readouts");
  }
  const auto p = joint_propagator(rec.cfg);
  PureTwoQubitState s = rec.initial.normalized();
  for (std::size_t k = 0; k < steps; ++k) s = apply_kraus(s, kraus_for_outcome(p, rec.readouts[k])).state;
  return s;
}

/// Concurrence series recomputed from the readout stream.
inline std::vector<double> replay_concurrence(const TrajectoryRecord& rec) {
  const auto p = joint_propagator(rec.cfg);
  PureTwoQubitState s = rec.initial.normalized();
  std::vector<double> out;
  out.reserve(rec.readouts.size() + 1);
  out.push_back(concurrence_pure(s));
  for (const auto& o : rec.readouts) {
    s = apply_kraus(s, kraus_for_outcome(p, o)).state;
    out.push_back(concurrence_pure(s));
  }
  return out;
}

/// Largest |replayed - recorded| concurrence; the record certifies itself
/// when this is below 1e-9.
inline double replay_deviation(const TrajectoryRecord& rec) {
  if (rec.readouts.size() + 1 != rec.concurrence.size()) {
    throw PreconditionError("record has no readout stream to replay");
  }
  const auto replayed = replay_concurrence(rec);
  double worst = 0.0;
  for (std::size_t k = 0; k < replayed.size(); ++k) {
    worst = std::max(worst, std::abs(replayed[k] - rec.concurrence[k]));
  }
  return worst;
}

}  // namespace qtraj
