#pragma once
// Gaussian quadrature rules built with the Golub-Welsch eigenvalue method.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "qtraj/errors.hpp"

namespace qtraj::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

// Nodes are the eigenvalues of the symmetric Jacobi matrix; weights are
// mu0 times the squared first components of the eigenvectors.
inline Rule golub_welsch(const Eigen::VectorXd& diag, const Eigen::VectorXd& offdiag, double mu0) {
  const auto n = diag.size();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    j(i, i) = diag(i);
    if (i + 1 < n) {
      j(i, i + 1) = offdiag(i);
      j(i + 1, i) = offdiag(i);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    r.weights[i] = mu0 * v0 * v0;
  }
  return r;
}

}  // namespace detail

/// n-point rule for integral f(x) exp(-x^2) dx over the real line.
/// Exact for polynomials of degree <= 2n - 1.
inline Rule gauss_hermite(int n) {
  if (n < 1) throw ConfigError("gauss_hermite: need at least one node");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd b(std::max(n - 1, 0));
  for (int i = 0; i + 1 < n; ++i) b(i) = std::sqrt(0.5 * (i + 1));
  Rule r = detail::golub_welsch(a, b, std::sqrt(std::numbers::pi));
  // Restore the exact mirror symmetry lost to rounding in the eigensolver.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

/// n-point rule for integral f(u) exp(-u) du over [0, inf).
inline Rule gauss_laguerre(int n) {
  if (n < 1) throw ConfigError("gauss_laguerre: need at least one node");
  Eigen::VectorXd a(n);
  Eigen::VectorXd b(std::max(n - 1, 0));
  for (int i = 0; i < n; ++i) a(i) = 2.0 * i + 1.0;
  for (int i = 0; i + 1 < n; ++i) b(i) = i + 1.0;
  return detail::golub_welsch(a, b, 1.0);
}

}  // namespace qtraj::quad
