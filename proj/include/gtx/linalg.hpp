#pragma once

#include <vector>

#include "gtx/graph.hpp"
#include "gtx/tensor.hpp"

namespace gtx {

// Eigendecomposition of a dense symmetric matrix; eigenvalues ascending,
// eigenvectors in the columns of `evecs` (orthonormal under the standard
// inner product).
void symmetric_eigen(const Tensor& m, std::vector<double>& evals, Tensor& evecs);

std::vector<double> symmetric_eigenvalues(const Tensor& m);

Tensor dense_laplacian(const Graph& g);
Tensor dense_adjacency(const Graph& g);

// least-squares slope of y against x
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);
double interquartile_range(std::vector<double> v);

}  // namespace gtx
