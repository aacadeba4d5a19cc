#include "gtx/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gtx {

void symmetric_eigen(const Tensor& m, std::vector<double>& evals, Tensor& evecs) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetric_eigen: matrix must be square");
  const int n = m.rows();
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = m(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric_eigen: did not converge");
  evals.resize(n);
  evecs = Tensor(n, n);
  for (int i = 0; i < n; ++i) {
    evals[i] = solver.eigenvalues()(i);
    for (int j = 0; j < n; ++j) evecs(i, j) = solver.eigenvectors()(i, j);
  }
}

std::vector<double> symmetric_eigenvalues(const Tensor& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetric_eigenvalues: matrix must be square");
  const int n = m.rows();
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = m(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric_eigenvalues: did not converge");
  std::vector<double> evals(n);
  for (int i = 0; i < n; ++i) evals[i] = solver.eigenvalues()(i);
  return evals;
}

Tensor dense_laplacian(const Graph& g) {
  Tensor m(g.n(), g.n());
  const Csr& lap = g.laplacian();
  for (int i = 0; i < lap.n; ++i) {
    auto cols = lap.row_cols(i);
    auto vals = lap.row_vals(i);
    for (size_t k = 0; k < cols.size(); ++k) m(i, cols[k]) += vals[k];
  }
  return m;
}

Tensor dense_adjacency(const Graph& g) {
  Tensor m(g.n(), g.n());
  const Csr& adj = g.adjacency();
  for (int i = 0; i < adj.n; ++i) {
    auto cols = adj.row_cols(i);
    auto vals = adj.row_vals(i);
    for (size_t k = 0; k < cols.size(); ++k) m(i, cols[k]) += vals[k];
  }
  return m;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_slope: need >= 2 points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double num = 0, den = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  if (den == 0) throw std::invalid_argument("fit_slope: degenerate x");
  return num / den;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double interquartile_range(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("interquartile_range: empty");
  std::sort(v.begin(), v.end());
  auto quantile = [&](double q) {
    const double pos = q * (v.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - lo;
    return v[lo] * (1 - frac) + v[hi] * frac;
  };
  return quantile(0.75) - quantile(0.25);
}

}  // namespace gtx
