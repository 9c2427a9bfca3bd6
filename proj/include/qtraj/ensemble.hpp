#pragma once
// Seeded trajectory ensembles, deterministic reduction, heralding, and the
// closed-form mean-concurrence references.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qtraj/engine.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/kraus.hpp"
#include "qtraj/qstate.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

// ---------------------------------------------------------------------------
// Closed-form references for initial |ee>.

/// 2 exp(-gamma t) (1 - exp(-gamma t)).
inline double analytic_mean_concurrence(double t, double gamma) {
  if (!(t >= 0.0)) throw PreconditionError("analytic_mean_concurrence: t must be >= 0");
  const double x = std::exp(-gamma * t);
  return 2.0 * x * (1.0 - x);
}

/// RK4 integration of dC/dt = -gamma C + 2 gamma exp(-2 gamma t), C(0) = 0.
/// Element k is the value at t = k * dt_ode.
inline std::vector<double> mean_concurrence_ode(double gamma, double t_max, double dt_ode) {
  if (!(dt_ode > 0.0)) throw PreconditionError("mean_concurrence_ode: dt_ode must be positive");
  if (!(t_max >= 0.0)) throw PreconditionError("mean_concurrence_ode: t_max must be >= 0");
  const auto rhs = [gamma](double t, double c) {
    return -gamma * c + 2.0 * gamma * std::exp(-2.0 * gamma * t);
  };
  const auto n = static_cast<std::size_t>(std::llround(t_max / dt_ode));
  std::vector<double> out(n + 1);
  double c = 0.0;
  out[0] = c;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt_ode;
    const double k1 = rhs(t, c);
    const double k2 = rhs(t + 0.5 * dt_ode, c + 0.5 * dt_ode * k1);
    const double k3 = rhs(t + 0.5 * dt_ode, c + 0.5 * dt_ode * k2);
    const double k4 = rhs(t + dt_ode, c + dt_ode * k3);
    c += dt_ode / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out[k + 1] = c;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parallel execution over fixed chunks of trajectory indices.

struct EnsembleOptions {
  unsigned workers = 0;  // 0: hardware concurrency
  SamplerMode sampler = SamplerMode::exact;
  std::size_t chunk_size = 64;
};

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Calls fn(chunk) for chunk in [0, n_chunks) on a pool of workers. The
/// work done per chunk must not depend on which worker runs it. The
/// exception of the lowest failing chunk is rethrown.
inline void for_each_chunk(std::size_t n_chunks, unsigned workers,
                           const std::function<void(std::size_t)>& fn) {
  const unsigned w = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(n_chunks, 1));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n_chunks);
  auto work = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      try {
        fn(c);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  if (w <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(w);
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Per-time-bin moments, combined pairwise (Chan et al.) in a fixed tree.

struct SeriesMoments {
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;

  explicit SeriesMoments(std::size_t bins = 0) : mean(bins, 0.0), m2(bins, 0.0) {}

  void add(const std::vector<double>& x) {
    ++count;
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double d = x[i] - mean[i];
      mean[i] += d * inv;
      m2[i] += d * (x[i] - mean[i]);
    }
  }

  static SeriesMoments combine(const SeriesMoments& a, const SeriesMoments& b) {
    if (a.count == 0) return b;
    if (b.count == 0) return a;
    SeriesMoments out(a.mean.size());
    out.count = a.count + b.count;
    const double na = static_cast<double>(a.count);
    const double nb = static_cast<double>(b.count);
    const double n = static_cast<double>(out.count);
    for (std::size_t i = 0; i < a.mean.size(); ++i) {
      const double d = b.mean[i] - a.mean[i];
      out.mean[i] = a.mean[i] + d * (nb / n);
      out.m2[i] = a.m2[i] + b.m2[i] + d * d * (na * nb / n);
    }
    return out;
  }
};

inline SeriesMoments tree_reduce(const std::vector<SeriesMoments>& parts, std::size_t lo,
                                 std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return SeriesMoments::combine(tree_reduce(parts, lo, mid), tree_reduce(parts, mid, hi));
}

// ---------------------------------------------------------------------------

struct EnsembleStats {
  std::vector<double> t;
  std::vector<double> mean_concurrence;
  std::vector<double> std_concurrence;  // population standard deviation
  std::size_t n_trajectories = 0;
  std::string fingerprint;

  MeasurementConfig cfg;
  PureTwoQubitState initial;
  double t_max = 0.0;
  std::uint64_t master_seed = 0;
  SamplerMode sampler = SamplerMode::exact;

  double standard_error(std::size_t i) const {
    return std_concurrence[i] / std::sqrt(static_cast<double>(n_trajectories));
  }
};

/// FNV-1a 64 of a canonical text rendering, as 16 hex digits.
inline std::string fingerprint_of(const MeasurementConfig& cfg, const PureTwoQubitState& initial,
                                  double t_max, std::size_t n, std::uint64_t master_seed,
                                  SamplerMode sampler) {
  std::ostringstream os;
  os.precision(17);
  os << to_string(cfg.scheme) << '|' << cfg.theta << '|' << cfg.vartheta << '|' << cfg.gamma
     << '|' << cfg.dt << '|' << t_max << '|' << n << '|' << master_seed << '|'
     << to_string(sampler);
  for (int i = 0; i < 4; ++i) os << '|' << initial[i].real() << ',' << initial[i].imag();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline bool is_excited_pair(const PureTwoQubitState& s) {
  return std::abs(std::abs(s[kEE]) - 1.0) < 1e-12;
}

inline EnsembleStats run_ensemble(const PureTwoQubitState& initial, const MeasurementConfig& cfg,
                                  double t_max, std::size_t n, std::uint64_t master_seed,
                                  const EnsembleOptions& opt = {}) {
  if (n < 1) throw PreconditionError("run_ensemble needs at least one trajectory");
  cfg.validate();
  const std::size_t bins = step_count(t_max, cfg.dt) + 1;
  const std::size_t chunk = std::max<std::size_t>(opt.chunk_size, 1);
  const std::size_t n_chunks = (n + chunk - 1) / chunk;

  TrajectoryOptions topt;
  topt.snapshot_stride = 0;
  topt.sampler = opt.sampler;
  topt.keep_readouts = false;

  std::vector<SeriesMoments> parts(n_chunks);
  for_each_chunk(n_chunks, opt.workers, [&](std::size_t c) {
    SeriesMoments m(bins);
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const auto rec = run_trajectory(initial, cfg, t_max, derive_seed(master_seed, i), topt);
      m.add(rec.concurrence);
    }
    parts[c] = std::move(m);
  });
  const SeriesMoments total = tree_reduce(parts, 0, parts.size());

  EnsembleStats st;
  st.t.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) st.t[k] = static_cast<double>(k) * cfg.dt;
  st.mean_concurrence = total.mean;
  st.std_concurrence.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    st.std_concurrence[k] = std::sqrt(std::max(0.0, total.m2[k] / static_cast<double>(n)));
  }
  st.n_trajectories = n;
  st.cfg = cfg;
  st.initial = initial.normalized();
  st.t_max = t_max;
  st.master_seed = master_seed;
  st.sampler = opt.sampler;
  st.fingerprint = fingerprint_of(cfg, st.initial, t_max, n, master_seed, opt.sampler);
  return st;
}

/// Full records of trajectories [first, first + n); intended for small runs.
inline std::vector<TrajectoryRecord> run_records(const PureTwoQubitState& initial,
                                                 const MeasurementConfig& cfg, double t_max,
                                                 std::size_t n, std::uint64_t master_seed,
                                                 const TrajectoryOptions& topt = {},
                                                 unsigned workers = 0, std::size_t first = 0) {
  cfg.validate();
  std::vector<TrajectoryRecord> out(n);
  for_each_chunk(n, workers, [&](std::size_t i) {
    out[i] = run_trajectory(initial, cfg, t_max, derive_seed(master_seed, first + i), topt);
  });
  return out;
}

/// Same seeds for every delta, so curves differ only through the phases.
/// Each ensemble uses vartheta = theta + delta.
inline std::vector<EnsembleStats> phase_sweep(const std::vector<double>& deltas,
                                              const MeasurementConfig& base,
                                              const PureTwoQubitState& initial, double t_max,
                                              std::size_t n, std::uint64_t master_seed,
                                              const EnsembleOptions& opt = {}) {
  std::vector<EnsembleStats> out;
  out.reserve(deltas.size());
  for (double d : deltas) {
    if (!(d >= -1e-12 && d <= std::numbers::pi / 2 + 1e-12)) {
      throw PreconditionError("phase_sweep deltas must lie in [0, pi/2]");
    }
    MeasurementConfig cfg = base;
    cfg.vartheta = base.theta + d;
    out.push_back(run_ensemble(initial, cfg, t_max, n, master_seed, opt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heralding: first step at which concurrence exceeds a threshold.

struct HeraldedSample {
  double first_crossing_time = 0.0;
  std::size_t step = 0;
  double concurrence = 0.0;
  BellAmplitudes amplitudes;
  std::uint64_t seed = 0;
  std::size_t trajectory_index = 0;
};

inline void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("herald threshold must lie in (0, 1)");
  }
}

inline std::optional<std::size_t> first_crossing(const std::vector<double>& c, double threshold) {
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k] > threshold) return k;
  }
  return std::nullopt;
}

inline std::optional<HeraldedSample> herald_of(const TrajectoryRecord& rec, double threshold,
                                               std::size_t index) {
  const auto k = first_crossing(rec.concurrence, threshold);
  if (!k) return std::nullopt;
  PureTwoQubitState s;
  if (const Snapshot* snap = rec.snapshot_at(*k)) {
    s = snap->state;
  } else {
    s = replay_state(rec, *k);
  }
  HeraldedSample h;
  h.first_crossing_time = rec.times[*k];
  h.step = *k;
  h.concurrence = rec.concurrence[*k];
  h.amplitudes = bell_decompose(s.normalized());
  h.seed = rec.seed;
  h.trajectory_index = index;
  return h;
}

inline std::vector<HeraldedSample> postselect_heralded(const std::vector<TrajectoryRecord>& records,
                                                       double threshold = 0.999) {
  check_threshold(threshold);
  std::vector<HeraldedSample> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (auto h = herald_of(records[i], threshold, i)) out.push_back(*h);
  }
  return out;
}

struct HeraldRun {
  std::vector<HeraldedSample> samples;
  std::size_t trajectories = 0;  // trajectories simulated to obtain them
};

/// Runs trajectories in index order (in batches of chunks) until `target`
/// heralds are found or `max_trajectories` have run. Each trajectory stops
/// at its first crossing. The result is independent of the worker count.
inline HeraldRun collect_heralds(const PureTwoQubitState& initial, const MeasurementConfig& cfg,
                                 double t_max, std::size_t target, std::uint64_t master_seed,
                                 double threshold = 0.999, const EnsembleOptions& opt = {},
                                 std::size_t max_trajectories = 0) {
  check_threshold(threshold);
  cfg.validate();
  const std::size_t chunk = std::max<std::size_t>(opt.chunk_size, 1);
  constexpr std::size_t batch_chunks = 64;
  if (max_trajectories == 0) max_trajectories = std::max<std::size_t>(target * 1000, 1000);

  TrajectoryOptions topt;
  topt.snapshot_stride = 0;
  topt.sampler = opt.sampler;
  topt.stop_above = threshold;
  topt.keep_readouts = false;

  HeraldRun run;
  std::size_t next_index = 0;
  while (run.samples.size() < target && next_index < max_trajectories) {
    const std::size_t batch = std::min(batch_chunks * chunk, max_trajectories - next_index);
    const std::size_t n_chunks = (batch + chunk - 1) / chunk;
    std::vector<std::vector<HeraldedSample>> found(n_chunks);
    const std::size_t base = next_index;
    for_each_chunk(n_chunks, opt.workers, [&](std::size_t c) {
      const std::size_t end = std::min(base + batch, base + (c + 1) * chunk);
      for (std::size_t i = base + c * chunk; i < end; ++i) {
        const auto rec = run_trajectory(initial, cfg, t_max, derive_seed(master_seed, i), topt);
        if (auto h = herald_of(rec, threshold, i)) found[c].push_back(*h);
      }
    });
    for (auto& f : found) {
      for (auto& h : f) {
        if (run.samples.size() < target) {
          run.samples.push_back(h);
          run.trajectories = h.trajectory_index + 1;
        }
      }
    }
    next_index += batch;
    if (run.samples.size() < target) run.trajectories = next_index;
  }
  return run;
}

}  // namespace qtraj
