#include "gtx/pe.hpp"

#include <cmath>
#include <stdexcept>

namespace gtx {

PEParams init_pe_params(const PEConfig& cfg, RngStream& init) {
  if (cfg.layers < 1 || cfg.order < 1 || cfg.out_dim < 1 || cfg.m_samples < 1)
    throw std::invalid_argument("init_pe_params: bad config");
  PEParams p;
  int in_dim = 1;  // random IDs are 1 x N
  for (int l = 0; l < cfg.layers; ++l) {
    const int out = (l == cfg.layers - 1) ? cfg.out_dim : cfg.hidden;
    PELayer layer;
    layer.act = cfg.act;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(in_dim * cfg.order));
    for (int k = 0; k < cfg.order; ++k)
      layer.bank.taps.push_back(Tensor::randn(out, in_dim, init, stddev));
    p.layers.push_back(std::move(layer));
    in_dim = out;
  }
  return p;
}

Tensor graph_conv(const FilterBank& bank, const Graph& g, const Tensor& z) {
  if (bank.taps.empty()) throw std::invalid_argument("graph_conv: empty filter bank");
  if (z.rows() != bank.in_dim() || z.cols() != g.n())
    throw std::invalid_argument("graph_conv: z is " + z.shape_str() + ", expected " +
                                std::to_string(bank.in_dim()) + "x" + std::to_string(g.n()));
  Tensor z_pow = z;
  Tensor acc = matmul(bank.taps[0], z_pow);
  for (size_t k = 1; k < bank.taps.size(); ++k) {
    z_pow = spmm_right_laplacian(z_pow, g);
    acc = add(acc, matmul(bank.taps[k], z_pow));
  }
  return acc;
}

Tensor gnn_forward(const PEParams& params, const Graph& g, const Tensor& z) {
  if (params.layers.empty()) throw std::invalid_argument("gnn_forward: no layers");
  Tensor x = z;
  for (const auto& layer : params.layers)
    x = pointwise_nonlinearity(graph_conv(layer.bank, g, x), layer.act);
  return x;
}

std::vector<Tensor> rpearl_draw_ids(int n, int m_samples, uint64_t seed) {
  std::vector<Tensor> ids;
  ids.reserve(m_samples);
  for (int m = 0; m < m_samples; ++m) {
    RngStream rng(substream_seed(seed, "pe", static_cast<uint64_t>(n), static_cast<uint64_t>(m)));
    ids.push_back(Tensor::randn(1, n, rng));
  }
  return ids;
}

Tensor rpearl(const PEParams& params, const Graph& g, int m_samples, uint64_t seed) {
  return rpearl_with_ids(params, g, rpearl_draw_ids(g.n(), m_samples, seed));
}

Tensor rpearl_with_ids(const PEParams& params, const Graph& g, const std::vector<Tensor>& ids) {
  if (ids.empty()) throw std::invalid_argument("rpearl: need at least one realization");
  Tensor acc;  // branches reduced in fixed index order
  for (const auto& z : ids) {
    Tensor branch = gnn_forward(params, g, z);
    acc = acc.empty() ? branch : add(acc, branch);
  }
  return transpose(scale(acc, 1.0 / static_cast<double>(ids.size())));
}

}  // namespace gtx
