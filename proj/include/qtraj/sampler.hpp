#pragma once
// Outcome samplers for one timestep. Each draws from the exact outcome
// distribution ||M_k s||^2 of the current state s (or, for the optional
// Gaussian mode, from a moment-matched normal approximation).

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "qtraj/errors.hpp"
#include "qtraj/kraus.hpp"
#include "qtraj/qstate.hpp"
#include "qtraj/quadrature.hpp"
#include "qtraj/rng.hpp"

namespace qtraj {

enum class SamplerMode { exact, gaussian };

inline std::string_view to_string(SamplerMode m) {
  return m == SamplerMode::exact ? "exact" : "gaussian";
}

inline SamplerMode parse_sampler(std::string_view s) {
  if (s == "exact") return SamplerMode::exact;
  if (s == "gaussian") return SamplerMode::gaussian;
  throw ConfigError("unknown sampler '" + std::string(s) + "' (expected exact or gaussian)");
}

using FieldMatrix = Eigen::Matrix<cplx, 4, kFockDim>;

/// Joint qubit-field state M|s>: column k is the (unnormalized) qubit
/// vector paired with output Fock state k.
inline FieldMatrix field_state(const JointPropagator& p, const Vector4c& s) {
  FieldMatrix f = FieldMatrix::Zero();
  for (const auto& e : p.nonzeros) f(e.row, e.fock) += e.value * s(e.col);
  return f;
}

/// A drawn outcome together with the conditional qubit vector it selects
/// (not normalized) and its probability or probability density.
struct SampledStep {
  Outcome outcome;
  Vector4c post;
  double weight = 0.0;
};

// ---------------------------------------------------------------------------
// Photodetection

inline SampledStep sample_photodetection(const FieldMatrix& f, RngStream& rng) {
  std::array<double, kFockDim> p{};
  double total = 0.0;
  for (int k = 0; k < kFockDim; ++k) {
    p[k] = f.col(k).squaredNorm();
    total += p[k];
  }
  // total == 1 up to rounding for a normalized input; scale the draw by it.
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int last_nonzero = 0;
  for (int k = 0; k < kFockDim; ++k) {
    if (p[k] <= 0.0) continue;
    last_nonzero = k;
    acc += p[k];
    if (u < acc) return {kFockLabels[k], f.col(k), p[k]};
  }
  return {kFockLabels[last_nonzero], f.col(last_nonzero), p[last_nonzero]};
}

// ---------------------------------------------------------------------------
// Rejection sampling for Gaussian x polynomial densities.
//
// The readout density is prefactor^2 * exp(-r^2) * P(x), with P = ||F h(x)||^2
// and h the Fock overlap factors. The proposal is exp(-c r^2) with c = 0.9,
// so the acceptance ratio P(x) exp(-(1-c) r^2) is bounded. The bound
// comes from |h_k(x)| <= a polynomial in r with non-negative coefficients,
// then sup_r r^j exp(-beta r^2) = (j / (2 beta e))^{j/2}.

inline constexpr double kProposalWidth = 0.9;
inline constexpr double kEnvelopeSafety = 1.1;
inline constexpr int kMaxRejections = 1'000'000;

namespace detail {

// |z| without hypot's overflow guards; entries here are O(1).
inline double mag(cplx z) { return std::sqrt(std::norm(z)); }

// Per-row bounds |sum_k F(r,k) h_k| <= a0 + a1 r + a2 r^2, squared and summed.
using RadialPoly = std::array<double, 5>;

inline RadialPoly square_sum(const std::array<std::array<double, 3>, 4>& rows) {
  RadialPoly c{};
  for (const auto& a : rows) {
    c[0] += a[0] * a[0];
    c[1] += 2.0 * a[0] * a[1];
    c[2] += a[1] * a[1] + 2.0 * a[0] * a[2];
    c[3] += 2.0 * a[1] * a[2];
    c[4] += a[2] * a[2];
  }
  return c;
}

inline std::array<double, 5> radial_sups(double beta) {
  std::array<double, 5> s{1.0};
  for (int j = 1; j < 5; ++j) s[j] = std::pow(j / (2.0 * beta * std::numbers::e), 0.5 * j);
  return s;
}

inline double sup_times_gaussian(const RadialPoly& c) {
  static const std::array<double, 5> sup = radial_sups(1.0 - kProposalWidth);
  double s = 0.0;
  for (int j = 0; j < 5; ++j) s += c[j] * sup[j];
  return s;
}

}  // namespace detail

/// sup_x P(x) exp(-(1-c)|x|^2) for the homodyne polynomial, times the
/// safety factor.
inline double homodyne_envelope(const FieldMatrix& f) {
  constexpr double r2 = std::numbers::sqrt2;
  std::array<std::array<double, 3>, 4> rows{};
  for (int r = 0; r < 4; ++r) {
    const double d20 = detail::mag(f(r, k20)) + detail::mag(f(r, k02));
    rows[r][0] = detail::mag(f(r, k00)) + d20 / r2;
    rows[r][1] = r2 * (detail::mag(f(r, k10)) + detail::mag(f(r, k01)));
    rows[r][2] = r2 * d20 + detail::mag(f(r, k11));
  }
  return kEnvelopeSafety *
         detail::sup_times_gaussian(detail::square_sum(rows));
}

inline double heterodyne_envelope(const FieldMatrix& f) {
  constexpr double r2 = std::numbers::sqrt2;
  std::array<std::array<double, 3>, 4> rows{};
  for (int r = 0; r < 4; ++r) {
    rows[r][0] = detail::mag(f(r, k00));
    rows[r][1] = detail::mag(f(r, k10)) + detail::mag(f(r, k01));
    rows[r][2] = (detail::mag(f(r, k20)) + detail::mag(f(r, k02))) / r2 + 0.5 * detail::mag(f(r, k11));
  }
  return kEnvelopeSafety *
         detail::sup_times_gaussian(detail::square_sum(rows));
}

template <class Factors>
Vector4c contract(const FieldMatrix& f, const Factors& h) {
  Vector4c v = Vector4c::Zero();
  for (int k = 0; k < kFockDim; ++k) v += h[k] * f.col(k);
  return v;
}

inline SampledStep sample_homodyne_exact(const FieldMatrix& f, RngStream& rng) {
  const double bound = homodyne_envelope(f);
  const double sigma = 1.0 / std::sqrt(2.0 * kProposalWidth);
  for (int tries = 0; tries < kMaxRejections; ++tries) {
    const double x3 = sigma * rng.normal();
    const double x4 = sigma * rng.normal();
    const auto o = quadrature_overlaps(x3, x4);
    const Vector4c v = contract(f, o.factors);
    const double poly = v.squaredNorm();
    const double ratio = poly * std::exp(-(1.0 - kProposalWidth) * (x3 * x3 + x4 * x4));
    if (ratio > bound) {
      throw EnvelopeViolationError("homodyne acceptance ratio " + std::to_string(ratio) +
                                   " exceeds envelope " + std::to_string(bound));
    }
    if (rng.uniform() * bound < ratio) {
      return {QuadraturePair{x3, x4}, v, o.prefactor * o.prefactor * poly};
    }
  }
  throw EnvelopeViolationError("homodyne rejection sampler did not accept within limit");
}

inline SampledStep sample_heterodyne_exact(const FieldMatrix& f, RngStream& rng) {
  const double bound = heterodyne_envelope(f);
  const double sigma = 1.0 / std::sqrt(2.0 * kProposalWidth);
  for (int tries = 0; tries < kMaxRejections; ++tries) {
    const double u1 = sigma * rng.normal();
    const double u2 = sigma * rng.normal();
    const double u3 = sigma * rng.normal();
    const double u4 = sigma * rng.normal();
    const cplx a3{u1, u2};
    const cplx a4{u3, u4};
    const auto o = coherent_overlaps(a3, a4);
    const Vector4c v = contract(f, o.factors);
    const double poly = v.squaredNorm();
    const double r2 = u1 * u1 + u2 * u2 + u3 * u3 + u4 * u4;
    const double ratio = poly * std::exp(-(1.0 - kProposalWidth) * r2);
    if (ratio > bound) {
      throw EnvelopeViolationError("heterodyne acceptance ratio " + std::to_string(ratio) +
                                   " exceeds envelope " + std::to_string(bound));
    }
    if (rng.uniform() * bound < ratio) {
      return {HeterodynePair{a3, a4}, v, o.prefactor * o.prefactor * poly};
    }
  }
  throw EnvelopeViolationError("heterodyne rejection sampler did not accept within limit");
}

// ---------------------------------------------------------------------------
// Moment-matched Gaussian approximation (fast mode, not exact).

struct AxisMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// First two moments of X3 and X4 under the exact homodyne density,
/// by 6-node Gauss-Hermite quadrature (exact for the degree-6 integrands).
inline std::array<AxisMoments, 2> homodyne_moments(const FieldMatrix& f) {
  static const quad::Rule rule = quad::gauss_hermite(6);
  double z = 0.0;
  std::array<double, 2> m1{}, m2{};
  for (std::size_t i = 0; i < rule.size(); ++i) {
    for (std::size_t j = 0; j < rule.size(); ++j) {
      const double x3 = rule.nodes[i];
      const double x4 = rule.nodes[j];
      const double w = rule.weights[i] * rule.weights[j] *
                       contract(f, quadrature_overlaps(x3, x4).factors).squaredNorm();
      z += w;
      m1[0] += w * x3;
      m1[1] += w * x4;
      m2[0] += w * x3 * x3;
      m2[1] += w * x4 * x4;
    }
  }
  std::array<AxisMoments, 2> out;
  for (int a = 0; a < 2; ++a) {
    out[a].mean = m1[a] / z;
    out[a].variance = m2[a] / z - out[a].mean * out[a].mean;
  }
  return out;
}

/// Moments of (Re a3, Im a3, Re a4, Im a4), 4-node rule per axis.
inline std::array<AxisMoments, 4> heterodyne_moments(const FieldMatrix& f) {
  static const quad::Rule rule = quad::gauss_hermite(4);
  const std::size_t n = rule.size();
  double z = 0.0;
  std::array<double, 4> m1{}, m2{};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          const std::array<double, 4> u{rule.nodes[i], rule.nodes[j], rule.nodes[k], rule.nodes[l]};
          const auto o = coherent_overlaps({u[0], u[1]}, {u[2], u[3]});
          const double w = rule.weights[i] * rule.weights[j] * rule.weights[k] * rule.weights[l] *
                           contract(f, o.factors).squaredNorm();
          z += w;
          for (int a = 0; a < 4; ++a) {
            m1[a] += w * u[a];
            m2[a] += w * u[a] * u[a];
          }
        }
  std::array<AxisMoments, 4> out;
  for (int a = 0; a < 4; ++a) {
    out[a].mean = m1[a] / z;
    out[a].variance = m2[a] / z - out[a].mean * out[a].mean;
  }
  return out;
}

inline SampledStep sample_homodyne_gaussian(const FieldMatrix& f, RngStream& rng) {
  const auto m = homodyne_moments(f);
  const double x3 = m[0].mean + std::sqrt(m[0].variance) * rng.normal();
  const double x4 = m[1].mean + std::sqrt(m[1].variance) * rng.normal();
  const auto o = quadrature_overlaps(x3, x4);
  const Vector4c v = contract(f, o.factors);
  return {QuadraturePair{x3, x4}, v, o.prefactor * o.prefactor * v.squaredNorm()};
}

inline SampledStep sample_heterodyne_gaussian(const FieldMatrix& f, RngStream& rng) {
  const auto m = heterodyne_moments(f);
  std::array<double, 4> u{};
  for (int a = 0; a < 4; ++a) u[a] = m[a].mean + std::sqrt(m[a].variance) * rng.normal();
  const cplx a3{u[0], u[1]};
  const cplx a4{u[2], u[3]};
  const auto o = coherent_overlaps(a3, a4);
  const Vector4c v = contract(f, o.factors);
  return {HeterodynePair{a3, a4}, v, o.prefactor * o.prefactor * v.squaredNorm()};
}

/// One draw for `scheme` given the field state of the current qubit state.
inline SampledStep sample_step(Scheme scheme, SamplerMode mode, const FieldMatrix& f,
                               RngStream& rng) {
  switch (scheme) {
    case Scheme::photodetection:
      return sample_photodetection(f, rng);
    case Scheme::homodyne:
      return mode == SamplerMode::exact ? sample_homodyne_exact(f, rng)
                                        : sample_homodyne_gaussian(f, rng);
    case Scheme::heterodyne:
      return mode == SamplerMode::exact ? sample_heterodyne_exact(f, rng)
                                        : sample_heterodyne_gaussian(f, rng);
  }
  throw PreconditionError("unknown scheme");
}

// Public per-scheme entry points taking a state.

inline void require_normalized(const PureTwoQubitState& s, const char* who) {
  if (!s.is_normalized()) throw PreconditionError(std::string(who) + " requires a normalized state");
}

inline PhotoCounts sample_photodetection_outcome(const PureTwoQubitState& s,
                                                 const JointPropagator& p, RngStream& rng) {
  require_normalized(s, "sample_photodetection_outcome");
  return std::get<PhotoCounts>(sample_photodetection(field_state(p, s.amplitudes()), rng).outcome);
}

inline QuadraturePair sample_homodyne_readout(const PureTwoQubitState& s, const JointPropagator& p,
                                              RngStream& rng,
                                              SamplerMode mode = SamplerMode::exact) {
  require_normalized(s, "sample_homodyne_readout");
  return std::get<QuadraturePair>(
      sample_step(Scheme::homodyne, mode, field_state(p, s.amplitudes()), rng).outcome);
}

inline HeterodynePair sample_heterodyne_readout(const PureTwoQubitState& s,
                                                const JointPropagator& p, RngStream& rng,
                                                SamplerMode mode = SamplerMode::exact) {
  require_normalized(s, "sample_heterodyne_readout");
  return std::get<HeterodynePair>(
      sample_step(Scheme::heterodyne, mode, field_state(p, s.amplitudes()), rng).outcome);
}

}  // namespace qtraj
