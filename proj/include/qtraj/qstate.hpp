#pragma once
// Two-qubit pure and mixed states in the (ee, eg, ge, gg) basis, concurrence,
// and the decomposition onto the Bell basis used for heralded states.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "qtraj/errors.hpp"

namespace qtraj {

using cplx = std::complex<double>;
using Vector4c = Eigen::Matrix<cplx, 4, 1>;
using Matrix4c = Eigen::Matrix<cplx, 4, 4>;

/// Basis index of each two-qubit product state; qubit A is the left label.
enum BasisIndex : int { kEE = 0, kEG = 1, kGE = 2, kGG = 3 };

inline constexpr double kNormTolerance = 1e-8;

/// A pure two-qubit state. The amplitudes are not forced to unit norm on
/// construction; `normalized()` returns a copy on the unit sphere.
class PureTwoQubitState {
 public:
  PureTwoQubitState() : amps_(Vector4c::Zero()) { amps_(kGG) = 1.0; }
  explicit PureTwoQubitState(const Vector4c& amps) : amps_(amps) {}
  PureTwoQubitState(cplx ee, cplx eg, cplx ge, cplx gg) { amps_ << ee, eg, ge, gg; }

  static PureTwoQubitState excited() { return {1.0, 0.0, 0.0, 0.0}; }
  static PureTwoQubitState ground() { return {0.0, 0.0, 0.0, 1.0}; }

  const Vector4c& amplitudes() const { return amps_; }
  cplx operator[](int i) const { return amps_(i); }

  double norm_squared() const { return amps_.squaredNorm(); }

  bool is_normalized(double tol = kNormTolerance) const {
    return std::abs(norm_squared() - 1.0) <= tol;
  }

  PureTwoQubitState normalized() const {
    const double n2 = norm_squared();
    if (!(n2 > 0.0) || !std::isfinite(n2)) {
      throw InvalidStateError("cannot normalize a zero or non-finite state vector");
    }
    return PureTwoQubitState(Vector4c(amps_ / std::sqrt(n2)));
  }

  /// |s><s|
  Matrix4c projector() const { return amps_ * amps_.adjoint(); }

  friend bool operator==(const PureTwoQubitState&, const PureTwoQubitState&) = default;

 private:
  Vector4c amps_;
};

/// Tensor product (zeta|e> + phi|g>) (x) (xi|e> + varphi|g>), normalized.
inline PureTwoQubitState make_product_state(cplx zeta, cplx phi, cplx xi, cplx varphi) {
  const double na = std::norm(zeta) + std::norm(phi);
  const double nb = std::norm(xi) + std::norm(varphi);
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw InvalidStateError("product state requires a nonzero single-qubit vector on each side");
  }
  return PureTwoQubitState(zeta * xi, zeta * varphi, phi * xi, phi * varphi).normalized();
}

/// Pure-state concurrence 2|a_ee a_gg - a_eg a_ge|.
inline double concurrence_pure(const PureTwoQubitState& s) {
  if (!s.is_normalized()) {
    throw PreconditionError("concurrence_pure requires a normalized state (norm^2 = " +
                            std::to_string(s.norm_squared()) + ")");
  }
  const double c = 2.0 * std::abs(s[kEE] * s[kGG] - s[kEG] * s[kGE]);
  return std::min(c, 1.0);
}

/// 4x4 density matrix with validated invariants.
class TwoQubitDensity {
 public:
  static constexpr double kTolerance = 1e-12;
  static constexpr double kEigenFloor = -1e-10;

  explicit TwoQubitDensity(const Matrix4c& m) : m_(m) { validate(); }

  static TwoQubitDensity from_pure(const PureTwoQubitState& s) {
    return TwoQubitDensity(s.normalized().projector());
  }

  const Matrix4c& matrix() const { return m_; }

 private:
  void validate() const {
    if (!m_.allFinite()) throw InvalidDensityError("density matrix has non-finite entries");
    if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kTolerance) {
      throw InvalidDensityError("density matrix is not Hermitian");
    }
    if (std::abs(m_.trace() - cplx(1.0)) > kTolerance) {
      throw InvalidDensityError("density matrix trace differs from 1");
    }
    const Matrix4c herm = 0.5 * (m_ + m_.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix4c> es(herm, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < kEigenFloor) {
      throw InvalidDensityError("density matrix has a negative eigenvalue " +
                                std::to_string(es.eigenvalues().minCoeff()));
    }
  }

  Matrix4c m_;
};

/// sigma_y (x) sigma_y in the (ee, eg, ge, gg) basis.
inline Matrix4c spin_flip() {
  Matrix4c f = Matrix4c::Zero();
  f(kEE, kGG) = -1.0;
  f(kEG, kGE) = 1.0;
  f(kGE, kEG) = 1.0;
  f(kGG, kEE) = -1.0;
  return f;
}

/// Wootters concurrence max(0, l1 - l2 - l3 - l4), l_i the descending square
/// roots of the eigenvalues of rho (sy x sy) rho* (sy x sy). The l_i are
/// taken as the singular values of sqrt(rho) F sqrt(rho)*, which avoids
/// square roots of eigenvalues that are zero up to rounding.
inline double concurrence_mixed(const TwoQubitDensity& rho) {
  const Matrix4c herm = 0.5 * (rho.matrix() + rho.matrix().adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(herm);
  Eigen::Vector4d root;
  for (int i = 0; i < 4; ++i) root(i) = std::sqrt(std::max(es.eigenvalues()(i), 0.0));
  const Matrix4c sq = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().adjoint();
  const Matrix4c a = sq * spin_flip() * sq.conjugate();
  Eigen::JacobiSVD<Matrix4c> svd(a);
  const Eigen::Vector4d lam = svd.singularValues();  // descending
  return std::clamp(lam(0) - lam(1) - lam(2) - lam(3), 0.0, 1.0);
}

/// Coefficients on {(ee-gg), (eg+ge), i(eg-ge), (ee+gg)}/sqrt2 after a
/// global phase rotation that makes the leading nonzero one of the first
/// three real and non-negative.
struct BellAmplitudes {
  double b = 0.0;
  double c = 0.0;
  double e = 0.0;
  cplx residual{0.0, 0.0};
  double global_phase = 0.0;
  // Imaginary parts left on the (eg+ge) and i(eg-ge) coefficients after
  // the phase fix; zero for states of the real three-Bell form.
  double imag_c = 0.0;
  double imag_e = 0.0;

  double norm_squared() const { return b * b + c * c + e * e + std::norm(residual); }
};

namespace detail {
inline std::array<Vector4c, 4> bell_basis() {
  const double h = 1.0 / std::numbers::sqrt2;
  const cplx i{0.0, 1.0};
  std::array<Vector4c, 4> v;
  v[0] << h, 0.0, 0.0, -h;
  v[1] << 0.0, h, h, 0.0;
  v[2] << 0.0, i * h, -i * h, 0.0;
  v[3] << h, 0.0, 0.0, h;
  return v;
}
}  // namespace detail

inline BellAmplitudes bell_decompose(const PureTwoQubitState& s) {
  if (!s.is_normalized()) {
    throw PreconditionError("bell_decompose requires a normalized state");
  }
  const auto basis = detail::bell_basis();
  std::array<cplx, 4> coef;
  for (int j = 0; j < 4; ++j) coef[j] = basis[j].dot(s.amplitudes());  // <B_j|s>

  constexpr double kPivotFloor = 1e-12;
  int pivot = 3;
  for (int j = 0; j < 3; ++j) {
    if (std::abs(coef[j]) >= kPivotFloor) {
      pivot = j;
      break;
    }
  }
  const double phase = std::abs(coef[pivot]) > 0.0 ? std::arg(coef[pivot]) : 0.0;
  const cplx rot = std::polar(1.0, -phase);
  for (auto& c : coef) c *= rot;

  BellAmplitudes out;
  out.b = coef[0].real();
  out.c = coef[1].real();
  out.e = coef[2].real();
  out.residual = coef[3];
  out.global_phase = phase;
  out.imag_c = coef[1].imag();
  out.imag_e = coef[2].imag();
  return out;
}

/// Inverse of bell_decompose, including the global phase.
inline PureTwoQubitState bell_recompose(const BellAmplitudes& a) {
  const auto basis = detail::bell_basis();
  const Vector4c v = cplx(a.b, 0.0) * basis[0] + cplx(a.c, a.imag_c) * basis[1] +
                     cplx(a.e, a.imag_e) * basis[2] + a.residual * basis[3];
  return PureTwoQubitState(Vector4c(std::polar(1.0, a.global_phase) * v));
}

}  // namespace qtraj
