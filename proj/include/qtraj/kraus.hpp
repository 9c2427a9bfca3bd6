#pragma once
// Joint qubit (x) field propagator for one timestep, the 50/50 beamsplitter
// with output phase plates, and the Kraus families obtained by projecting
// the output modes onto photon-number, quadrature, or coherent states.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qtraj/errors.hpp"
#include "qtraj/quadrature.hpp"
#include "qtraj/qstate.hpp"

namespace qtraj {

enum class Scheme { photodetection, homodyne, heterodyne };

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::photodetection: return "photodetection";
    case Scheme::homodyne: return "homodyne";
    case Scheme::heterodyne: return "heterodyne";
  }
  return "unknown";
}

inline Scheme parse_scheme(std::string_view name) {
  if (name == "photodetection") return Scheme::photodetection;
  if (name == "homodyne") return Scheme::homodyne;
  if (name == "heterodyne") return Scheme::heterodyne;
  throw ConfigError("unknown scheme '" + std::string(name) +
                    "' (expected photodetection, homodyne or heterodyne)");
}

/// Largest gamma*dt accepted as a "small" timestep.
inline constexpr double kMaxEpsilon = 0.05;

struct MeasurementConfig {
  Scheme scheme = Scheme::homodyne;
  double theta = 0.0;     // radians, phase plate on output 3
  double vartheta = 0.0;  // radians, phase plate on output 4
  double gamma = 1.0;     // decay rate 1/T1
  double dt = 1e-3;

  double epsilon() const { return gamma * dt; }

  /// Empty when valid; otherwise the reason, naming the offending field.
  std::optional<std::string> check() const {
    if (!std::isfinite(theta) || !std::isfinite(vartheta)) return "theta/vartheta must be finite";
    if (!(gamma > 0.0) || !std::isfinite(gamma)) return "gamma must be positive";
    if (!(dt > 0.0) || !std::isfinite(dt)) return "dt must be positive";
    if (!(epsilon() < kMaxEpsilon)) {
      return "epsilon = gamma*dt = " + std::to_string(epsilon()) +
             " is outside the small-step regime (must be < " + std::to_string(kMaxEpsilon) + ")";
    }
    return std::nullopt;
  }

  void validate() const {
    if (auto why = check()) throw ConfigError(*why);
  }
};

// Output Fock basis of modes 3 and 4, at most two photons in total.
inline constexpr int kFockDim = 6;
enum FockIndex : int { k00 = 0, k10, k01, k20, k11, k02 };

struct PhotoCounts {
  int n3 = 0;
  int m4 = 0;
  friend bool operator==(const PhotoCounts&, const PhotoCounts&) = default;
};

inline constexpr std::array<PhotoCounts, kFockDim> kFockLabels{
    {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}};

inline int fock_index(PhotoCounts pc) {
  for (int k = 0; k < kFockDim; ++k) {
    if (kFockLabels[k] == pc) return k;
  }
  throw PreconditionError("photocount outcome (" + std::to_string(pc.n3) + "," +
                          std::to_string(pc.m4) + ") is outside the two-photon basis");
}

using FieldKet = Eigen::Matrix<cplx, kFockDim, 1>;

/// M of the two-qubit update with modes 1,2 rewritten in modes 3,4.
/// Stored as one 4x4 qubit matrix per output Fock state:
/// `fock[k](row, col) = <k| block(row, col)`.
struct JointPropagator {
  std::array<Matrix4c, kFockDim> fock;
  double epsilon = 0.0;
  double theta = 0.0;
  double vartheta = 0.0;

  // Nonzero entries of `fock`, for sparse application in the hot loop.
  struct Entry {
    int fock;
    int row;
    int col;
    cplx value;
  };
  std::vector<Entry> nonzeros;

  FieldKet block(int row, int col) const {
    FieldKet v;
    for (int k = 0; k < kFockDim; ++k) v(k) = fock[k](row, col);
    return v;
  }
};

/// Field kets a1^dag|00>, a2^dag|00>, a1^dag a2^dag|00> after the beamsplitter
/// a1^dag = (e^{i theta} a3^dag + e^{i vartheta} a4^dag)/sqrt2,
/// a2^dag = (e^{i theta} a3^dag - e^{i vartheta} a4^dag)/sqrt2.
struct BeamsplitterKets {
  FieldKet one_from_1;
  FieldKet one_from_2;
  FieldKet pair;
};

inline BeamsplitterKets beamsplitter_kets(double theta, double vartheta) {
  const cplx u = std::polar(1.0 / std::numbers::sqrt2, theta);     // coefficient of a3^dag
  const cplx v = std::polar(1.0 / std::numbers::sqrt2, vartheta);  // coefficient of a4^dag
  BeamsplitterKets k;
  k.one_from_1 = FieldKet::Zero();
  k.one_from_1(k10) = u;
  k.one_from_1(k01) = v;
  k.one_from_2 = FieldKet::Zero();
  k.one_from_2(k10) = u;
  k.one_from_2(k01) = -v;
  // (u a3 + v a4)(u a3 - v a4)|00>, with a3^dag^2|00> = sqrt2 |20>.
  k.pair = FieldKet::Zero();
  k.pair(k20) = std::numbers::sqrt2 * u * u;
  k.pair(k11) = v * u - u * v;
  k.pair(k02) = -std::numbers::sqrt2 * v * v;
  return k;
}

/// Unchecked construction; 0 <= epsilon <= 1.
inline JointPropagator joint_propagator(double epsilon, double theta, double vartheta) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("joint_propagator: epsilon must lie in [0, 1]");
  }
  JointPropagator p;
  p.epsilon = epsilon;
  p.theta = theta;
  p.vartheta = vartheta;
  for (auto& m : p.fock) m.setZero();

  const auto bs = beamsplitter_kets(theta, vartheta);
  const double keep = std::sqrt(1.0 - epsilon);
  const double single = std::sqrt(epsilon * (1.0 - epsilon));
  const double emit = std::sqrt(epsilon);

  auto put = [&p](int row, int col, const FieldKet& ket, double scale) {
    for (int k = 0; k < kFockDim; ++k) p.fock[k](row, col) += scale * ket(k);
  };
  FieldKet vac = FieldKet::Zero();
  vac(k00) = 1.0;

  // column |ee>
  put(kEE, kEE, vac, 1.0 - epsilon);
  put(kEG, kEE, bs.one_from_2, single);  // B emitted
  put(kGE, kEE, bs.one_from_1, single);  // A emitted
  put(kGG, kEE, bs.pair, epsilon);
  // column |eg>: only A can emit
  put(kEG, kEG, vac, keep);
  put(kGG, kEG, bs.one_from_1, emit);
  // column |ge>
  put(kGE, kGE, vac, keep);
  put(kGG, kGE, bs.one_from_2, emit);
  // column |gg>
  put(kGG, kGG, vac, 1.0);

  for (int k = 0; k < kFockDim; ++k)
    for (int c = 0; c < 4; ++c)
      for (int r = 0; r < 4; ++r)
        if (p.fock[k](r, c) != cplx(0.0)) p.nonzeros.push_back({k, r, c, p.fock[k](r, c)});
  return p;
}

inline JointPropagator joint_propagator(const MeasurementConfig& cfg) {
  cfg.validate();
  return joint_propagator(cfg.epsilon(), cfg.theta, cfg.vartheta);
}

/// Sum over Fock outcomes of fock[k]^dag fock[k]; identity for an isometry.
inline Matrix4c isometry_gram(const JointPropagator& p) {
  Matrix4c g = Matrix4c::Zero();
  for (const auto& m : p.fock) g += m.adjoint() * m;
  return g;
}

struct QuadraturePair {
  double x3 = 0.0;
  double x4 = 0.0;
};

struct HeterodynePair {
  cplx alpha3{};
  cplx alpha4{};
};

using Outcome = std::variant<PhotoCounts, QuadraturePair, HeterodynePair>;

struct KrausOperator {
  Matrix4c matrix;
  Outcome outcome;
};

// ---------------------------------------------------------------------------
// Overlaps of the output Fock states with the measurement basis. The Fock
// state |k> projects to prefactor * factors[k].

/// <X3 X4| n m> = pi^{-1/2} exp(-(X3^2+X4^2)/2) * f_n(X3) f_m(X4), with
/// f_0 = 1, f_1 = sqrt2 X, f_2 = (2X^2 - 1)/sqrt2 for X = (a + a^dag)/sqrt2.
struct QuadratureOverlaps {
  double prefactor = 0.0;
  std::array<double, kFockDim> factors{};
};

inline QuadratureOverlaps quadrature_overlaps(double x3, double x4) {
  constexpr double r2 = std::numbers::sqrt2;
  const double f3[3] = {1.0, r2 * x3, (2.0 * x3 * x3 - 1.0) / r2};
  const double f4[3] = {1.0, r2 * x4, (2.0 * x4 * x4 - 1.0) / r2};
  QuadratureOverlaps o;
  o.prefactor = std::exp(-0.5 * (x3 * x3 + x4 * x4)) / std::sqrt(std::numbers::pi);
  for (int k = 0; k < kFockDim; ++k) {
    o.factors[k] = f3[kFockLabels[k].n3] * f4[kFockLabels[k].m4];
  }
  return o;
}

/// pi^{-1} <alpha3 alpha4| n m>: the 1/pi coherent-state measure of each
/// mode is folded in so that the family integrates to the identity.
struct CoherentOverlaps {
  double prefactor = 0.0;
  std::array<cplx, kFockDim> factors{};
};

inline CoherentOverlaps coherent_overlaps(cplx alpha3, cplx alpha4) {
  const cplx c3 = std::conj(alpha3);
  const cplx c4 = std::conj(alpha4);
  const cplx f3[3] = {1.0, c3, c3 * c3 / std::numbers::sqrt2};
  const cplx f4[3] = {1.0, c4, c4 * c4 / std::numbers::sqrt2};
  CoherentOverlaps o;
  o.prefactor = std::exp(-0.5 * (std::norm(alpha3) + std::norm(alpha4))) / std::numbers::pi;
  for (int k = 0; k < kFockDim; ++k) {
    o.factors[k] = f3[kFockLabels[k].n3] * f4[kFockLabels[k].m4];
  }
  return o;
}

// ---------------------------------------------------------------------------

inline std::vector<KrausOperator> photodetection_kraus(const JointPropagator& p) {
  std::vector<KrausOperator> ops;
  ops.reserve(kFockDim);
  for (int k = 0; k < kFockDim; ++k) ops.push_back({p.fock[k], kFockLabels[k]});
  return ops;
}

inline std::vector<KrausOperator> photodetection_kraus(const MeasurementConfig& cfg) {
  if (cfg.scheme != Scheme::photodetection) {
    throw PreconditionError("photodetection_kraus requires scheme = photodetection");
  }
  return photodetection_kraus(joint_propagator(cfg));
}

inline KrausOperator homodyne_kraus(const JointPropagator& p, double x3, double x4) {
  if (!std::isfinite(x3) || !std::isfinite(x4)) {
    throw PreconditionError("homodyne readout must be finite");
  }
  const auto o = quadrature_overlaps(x3, x4);
  Matrix4c m = Matrix4c::Zero();
  for (int k = 0; k < kFockDim; ++k) m += o.factors[k] * p.fock[k];
  return {o.prefactor * m, QuadraturePair{x3, x4}};
}

inline KrausOperator homodyne_kraus(const MeasurementConfig& cfg, double x3, double x4) {
  if (cfg.scheme != Scheme::homodyne) {
    throw PreconditionError("homodyne_kraus requires scheme = homodyne");
  }
  return homodyne_kraus(joint_propagator(cfg), x3, x4);
}

inline KrausOperator heterodyne_kraus(const JointPropagator& p, cplx alpha3, cplx alpha4) {
  const auto o = coherent_overlaps(alpha3, alpha4);
  Matrix4c m = Matrix4c::Zero();
  for (int k = 0; k < kFockDim; ++k) m += o.factors[k] * p.fock[k];
  return {o.prefactor * m, HeterodynePair{alpha3, alpha4}};
}

inline KrausOperator heterodyne_kraus(const MeasurementConfig& cfg, cplx alpha3, cplx alpha4) {
  if (cfg.scheme != Scheme::heterodyne) {
    throw PreconditionError("heterodyne_kraus requires scheme = heterodyne");
  }
  return heterodyne_kraus(joint_propagator(cfg), alpha3, alpha4);
}

/// Readout density for a single photon entering the beamsplitter from
/// port 1 (+) or port 2 (-).
enum class Port { one = 1, two = 2 };

inline double which_path_density(double x3, double x4, double theta, double vartheta, Port port) {
  const double sign = port == Port::one ? 1.0 : -1.0;
  const double poly = x3 * x3 + x4 * x4 + sign * 2.0 * x3 * x4 * std::cos(theta - vartheta);
  return std::exp(-x3 * x3 - x4 * x4) * poly / std::numbers::pi;
}

// ---------------------------------------------------------------------------
// POVM completeness.

/// Node counts for the completeness integrals. Homodyne entries of M^dag M
/// are exp(-X^2) times polynomials of degree <= 4 per axis, so a
/// Gauss-Hermite rule with n >= 3 nodes is exact; 5 is the enforced floor.
/// Heterodyne uses Gauss-Laguerre in |alpha|^2 (exact at >= 2 nodes for the
/// |alpha|^4 terms) and an equispaced angular rule (exact for Fourier
/// orders |k| < nodes; orders reach 2).
struct QuadratureOrder {
  int hermite_nodes = 7;
  int laguerre_nodes = 4;
  int angular_nodes = 8;

  static constexpr int kMinHermite = 5;
  static constexpr int kMinLaguerre = 2;
  static constexpr int kMinAngular = 3;
};

inline double max_abs_deviation_from_identity(const Matrix4c& m) {
  return (m - Matrix4c::Identity()).cwiseAbs().maxCoeff();
}

inline Matrix4c homodyne_completeness_integral(const JointPropagator& p, int nodes) {
  const auto rule = quad::gauss_hermite(nodes);
  Matrix4c acc = Matrix4c::Zero();
  for (std::size_t i = 0; i < rule.size(); ++i) {
    for (std::size_t j = 0; j < rule.size(); ++j) {
      const auto o = quadrature_overlaps(rule.nodes[i], rule.nodes[j]);
      Matrix4c h = Matrix4c::Zero();
      for (int k = 0; k < kFockDim; ++k) h += o.factors[k] * p.fock[k];
      // exp(-X3^2 - X4^2) is carried by the weights.
      acc += (rule.weights[i] * rule.weights[j] / std::numbers::pi) * (h.adjoint() * h);
    }
  }
  return acc;
}

inline Matrix4c heterodyne_completeness_integral(const JointPropagator& p, int laguerre_nodes,
                                                 int angular_nodes) {
  // d^2 alpha = r dr dphi; with u = r^2, r dr exp(-r^2) = exp(-u) du / 2.
  const auto lag = quad::gauss_laguerre(laguerre_nodes);
  struct Node {
    cplx alpha;
    double weight;
  };
  std::vector<Node> plane;
  const double dphi = 2.0 * std::numbers::pi / angular_nodes;
  for (std::size_t i = 0; i < lag.size(); ++i) {
    const double r = std::sqrt(lag.nodes[i]);
    for (int a = 0; a < angular_nodes; ++a) {
      plane.push_back({std::polar(r, a * dphi), 0.5 * lag.weights[i] * dphi});
    }
  }
  Matrix4c acc = Matrix4c::Zero();
  for (const auto& n3 : plane) {
    for (const auto& n4 : plane) {
      const auto o = coherent_overlaps(n3.alpha, n4.alpha);
      Matrix4c h = Matrix4c::Zero();
      for (int k = 0; k < kFockDim; ++k) h += o.factors[k] * p.fock[k];
      // pi^{-2} measure, Gaussian carried by the Laguerre weights.
      const double w = n3.weight * n4.weight / (std::numbers::pi * std::numbers::pi);
      acc += w * (h.adjoint() * h);
    }
  }
  return acc;
}

/// max |(sum or integral of M^dag M) - I| over entries.
inline double completeness_defect(const MeasurementConfig& cfg, const QuadratureOrder& order = {}) {
  const auto p = joint_propagator(cfg);
  switch (cfg.scheme) {
    case Scheme::photodetection: {
      Matrix4c sum = Matrix4c::Zero();
      for (const auto& k : photodetection_kraus(p)) sum += k.matrix.adjoint() * k.matrix;
      return max_abs_deviation_from_identity(sum);
    }
    case Scheme::homodyne:
      if (order.hermite_nodes < QuadratureOrder::kMinHermite) {
        throw ConfigError("homodyne completeness needs >= " +
                          std::to_string(QuadratureOrder::kMinHermite) +
                          " Gauss-Hermite nodes per axis, got " +
                          std::to_string(order.hermite_nodes));
      }
      return max_abs_deviation_from_identity(homodyne_completeness_integral(p, order.hermite_nodes));
    case Scheme::heterodyne:
      if (order.laguerre_nodes < QuadratureOrder::kMinLaguerre ||
          order.angular_nodes < QuadratureOrder::kMinAngular) {
        throw ConfigError("heterodyne completeness needs >= " +
                          std::to_string(QuadratureOrder::kMinLaguerre) + " radial and >= " +
                          std::to_string(QuadratureOrder::kMinAngular) + " angular nodes");
      }
      return max_abs_deviation_from_identity(
          heterodyne_completeness_integral(p, order.laguerre_nodes, order.angular_nodes));
  }
  return 0.0;
}

}  // namespace qtraj
