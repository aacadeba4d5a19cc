#pragma once

#include <vector>

#include "gtx/graph.hpp"
#include "gtx/tensor.hpp"

namespace gtx {

// Order-K graph-convolution coefficients; taps[k] multiplies Z L^k.
struct FilterBank {
  std::vector<Tensor> taps;  // each out_dim x in_dim, shared shape
  int order() const { return static_cast<int>(taps.size()); }
  int in_dim() const { return taps.empty() ? 0 : taps[0].cols(); }
  int out_dim() const { return taps.empty() ? 0 : taps[0].rows(); }
};

struct PELayer {
  FilterBank bank;
  Nonlinearity act = Nonlinearity::Relu;
};

// Shape of the positional encoder; parameters live in PEParams.
struct PEConfig {
  int layers = 1;
  int order = 3;       // K taps per filter
  int hidden = 8;      // width of intermediate layers
  int out_dim = 8;
  int m_samples = 16;  // random-ID realizations averaged by rpearl
  Nonlinearity act = Nonlinearity::Relu;
};

struct PEParams {
  std::vector<PELayer> layers;
  int out_dim() const { return layers.empty() ? 0 : layers.back().bank.out_dim(); }
};

PEParams init_pe_params(const PEConfig& cfg, RngStream& init);

// Σ_{k=0}^{K-1} H_k Z L^k by iterated sparse right-multiplication (L^k is
// never materialized); differentiable in the taps and in Z.
Tensor graph_conv(const FilterBank& bank, const Graph& g, const Tensor& z);

// Cascade of graph_conv + pointwise nonlinearity per layer.
Tensor gnn_forward(const PEParams& params, const Graph& g, const Tensor& z);

// The seeded random node IDs: m_samples standard-normal 1xN rows, keyed by
// (seed, n) through the "pe" substream.
std::vector<Tensor> rpearl_draw_ids(int n, int m_samples, uint64_t seed);

// Empirical average of gnn_forward over the M random-ID branches; output is
// node-major (N x out_dim). Differentiable w.r.t. filter taps.
Tensor rpearl(const PEParams& params, const Graph& g, int m_samples, uint64_t seed);

// Same but with externally supplied realizations (the conditional
// permutation-equivariance hook).
Tensor rpearl_with_ids(const PEParams& params, const Graph& g, const std::vector<Tensor>& ids);

}  // namespace gtx
