#include <cmath>
#include <functional>

#include "gtx/attention.hpp"
#include "gtx/graph.hpp"
#include "gtx/pe.hpp"
#include "gtx/runner.hpp"
#include "gtx/tensor.hpp"
#include "gtx/train.hpp"

namespace gtx {

namespace {

constexpr uint64_t kSeed = 20240817;

// random values bounded away from relu/abs kinks so central differences stay
// second-order accurate
Tensor randn_offset(int r, int c, RngStream& rng, double offset = 0.2) {
  Tensor t = Tensor::randn(r, c, rng);
  for (int i = 0; i < t.size(); ++i) {
    double& x = t.data()[i];
    x += x >= 0.0 ? offset : -offset;
  }
  return t;
}

Graph small_graph(RngStream& rng, int n = 8) {
  std::vector<Edge> pairs;
  for (int i = 1; i < n; ++i) pairs.push_back({rng.below_int(i), i, 1.0});  // random tree: connected
  for (int e = 0; e < n; ++e) {
    const int a = rng.below_int(n), b = rng.below_int(n);
    if (a == b) continue;
    bool dup = false;
    for (const auto& p : pairs)
      if ((p.i == std::min(a, b) && p.j == std::max(a, b)) ||
          (p.j == std::min(a, b) && p.i == std::max(a, b)))
        dup = true;
    if (!dup) pairs.push_back({std::min(a, b), std::max(a, b), 0.5 + rng.uniform()});
  }
  return Graph::from_undirected(n, pairs);
}

// rebuild the model's parameters from one flat row vector so a single
// finite_diff_check covers every weight of the forward pass
ModelParams params_from_flat(const ModelParams& shape, const Tensor& flat) {
  ModelParams local = shape.clone();
  long off = 0;
  for (auto& [name, t] : local.named()) {
    *t = unflatten_slice(flat, static_cast<int>(off), t->rows(), t->cols());
    off += t->size();
  }
  return local;
}

Tensor params_to_flat(const ModelParams& params) {
  Tensor flat(1, static_cast<int>(params.num_scalars()));
  long off = 0;
  for (const auto& [name, t] : params.named()) {
    std::copy(t->data(), t->data() + t->size(), flat.data() + off);
    off += t->size();
  }
  return flat;
}

}  // namespace

std::vector<std::pair<std::string, double>> gradcheck_battery() {
  std::vector<std::pair<std::string, double>> results;
  auto check = [&](const std::string& name, const std::function<Tensor(Tape&, Tensor)>& f,
                   const Tensor& x0) { results.emplace_back(name, finite_diff_check(f, x0)); };

  RngStream rng(kSeed);

  {
    Tensor b = Tensor::randn(7, 3, rng);
    check("matmul_lhs", [b](Tape&, Tensor x) { return sum(matmul(x, b)); }, Tensor::randn(5, 7, rng));
    Tensor a = Tensor::randn(4, 6, rng);
    check("matmul_rhs", [a](Tape&, Tensor x) { return sum(hadamard(matmul(a, x), matmul(a, x))); },
          Tensor::randn(6, 5, rng));
  }
  {
    Tensor b = Tensor::randn(4, 4, rng);
    check("add", [b](Tape&, Tensor x) { return sum(hadamard(add(x, b), add(x, b))); },
          Tensor::randn(4, 4, rng));
    check("sub", [b](Tape&, Tensor x) { return sum(hadamard(sub(x, b), sub(x, b))); },
          Tensor::randn(4, 4, rng));
    check("scale", [](Tape&, Tensor x) { return sum(hadamard(scale(x, -2.5), scale(x, -2.5))); },
          Tensor::randn(3, 5, rng));
    check("hadamard", [b](Tape&, Tensor x) { return sum(hadamard(x, hadamard(x, b))); },
          Tensor::randn(4, 4, rng));
    check("transpose", [b](Tape&, Tensor x) { return sum(matmul(transpose(x), b)); },
          Tensor::randn(4, 4, rng));
    check("vstack", [](Tape&, Tensor x) {
      Tensor two = scale(x, 2.0);
      return sum(hadamard(vstack({x, two}), vstack({two, x})));
    }, Tensor::randn(3, 4, rng));
    check("unflatten_slice", [](Tape&, Tensor x) {
      Tensor a = unflatten_slice(x, 0, 2, 3);
      Tensor b2 = unflatten_slice(x, 6, 3, 2);
      return sum(matmul(a, b2));
    }, Tensor::randn(1, 12, rng));
  }
  {
    check("relu", [](Tape&, Tensor x) {
      Tensor y = pointwise_nonlinearity(x, Nonlinearity::Relu);
      return sum(hadamard(y, y));
    }, randn_offset(4, 5, rng));
    check("tanh", [](Tape&, Tensor x) {
      Tensor y = pointwise_nonlinearity(x, Nonlinearity::Tanh);
      return sum(hadamard(y, y));
    }, Tensor::randn(3, 3, rng));
  }
  {
    BoolMat mask(4, 4, false);
    for (int i = 0; i < 4; ++i) {
      mask.set(i, i, true);
      mask.set(i, (i + 1) % 4, true);
      mask.set(i, (i + 2) % 4, true);
    }
    Tensor w = Tensor::randn(4, 4, rng);
    check("masked_row_softmax", [mask, w](Tape&, Tensor x) {
      return sum(hadamard(masked_row_softmax(x, &mask), w));
    }, Tensor::randn(4, 4, rng));
    check("row_softmax", [w](Tape&, Tensor x) {
      return sum(hadamard(masked_row_softmax(x, nullptr), w));
    }, Tensor::randn(4, 4, rng));
  }
  {
    Tensor w = Tensor::randn(5, 3, rng);
    check("layer_norm", [w](Tape&, Tensor x) { return sum(hadamard(layer_norm_cols(x), w)); },
          Tensor::randn(5, 3, rng));
  }
  {
    Graph g = small_graph(rng);
    Tensor w = Tensor::randn(3, g.n(), rng);
    check("spmm_right_laplacian",
          [&g, w](Tape&, Tensor x) { return sum(hadamard(spmm_right_laplacian(x, g), w)); },
          Tensor::randn(3, g.n(), rng));

    const int K = 3, din = 2, dout = 3;
    Tensor z = Tensor::randn(din, g.n(), rng);
    Tensor wc = Tensor::randn(dout, g.n(), rng);
    check("graph_conv_taps", [&g, z, wc](Tape&, Tensor flat) {
      FilterBank bank;
      for (int k = 0; k < K; ++k) bank.taps.push_back(unflatten_slice(flat, k * dout * din, dout, din));
      return sum(hadamard(graph_conv(bank, g, z), wc));
    }, Tensor::randn(1, K * dout * din, rng));
    FilterBank fixed;
    RngStream bankrng(substream_seed(kSeed, "bank"));
    for (int k = 0; k < K; ++k) fixed.taps.push_back(Tensor::randn(dout, din, bankrng, 0.5));
    check("graph_conv_signal",
          [&g, fixed, wc](Tape&, Tensor x) { return sum(hadamard(graph_conv(fixed, g, x), wc)); },
          Tensor::randn(din, g.n(), rng));
  }
  {
    Graph g = small_graph(rng);
    PEConfig pc;
    pc.layers = 2;
    pc.order = 2;
    pc.hidden = 3;
    pc.out_dim = 3;
    pc.m_samples = 2;
    pc.act = Nonlinearity::Tanh;
    RngStream init(substream_seed(kSeed, "pe_init"));
    PEParams pe = init_pe_params(pc, init);
    Tensor w = Tensor::randn(g.n(), 3, rng);
    check("rpearl_taps", [&](Tape&, Tensor x) {
      PEParams local = pe;
      local.layers[0].bank.taps[0] = x;
      return sum(hadamard(rpearl(local, g, pc.m_samples, 7), w));
    }, pe.layers[0].bank.taps[0].clone());
  }
  {
    RngStream init(substream_seed(kSeed, "attn"));
    AttentionParams p;
    const int dm = 6, dh = 3;
    for (int h = 0; h < 2; ++h)
      p.heads.push_back({Tensor::randn(dh, dm, init, 0.5), Tensor::randn(dh, dm, init, 0.5),
                         Tensor::randn(dh, dm, init, 0.5)});
    p.out_proj = Tensor::randn(dm, 2 * dh, init, 0.5);
    p.ff1 = Tensor::randn(8, dm, init, 0.5);
    p.ff2 = Tensor::randn(dm, 8, init, 0.5);
    p.ff_act = Nonlinearity::Tanh;
    Graph g = small_graph(rng, 7);
    KHopMask mask = k_hop_mask(g, 1);
    Tensor w = Tensor::randn(dm, 7, rng);
    check("dense_attention", [&](Tape&, Tensor x) {
      return sum(hadamard(dense_attention(p, x), w));
    }, Tensor::randn(dm, 7, rng));
    check("sparse_attention", [&](Tape&, Tensor x) {
      return sum(hadamard(sparse_attention(p, x, mask), w));
    }, Tensor::randn(dm, 7, rng));
    Tensor feats = Tensor::randn(dm, 7, rng);
    check("sparse_attention_query", [&](Tape&, Tensor x) {
      AttentionParams local;
      local.heads.push_back({x, p.heads[0].k, p.heads[0].v});
      local.out_proj = Tensor::identity(dh);
      local.ff1 = p.ff1;
      local.ff2 = p.ff2;
      return sum(hadamard(sparse_attention(local, feats, mask), Tensor::ones(dh, 7)));
    }, p.heads[0].q.clone());
    check("gt_layer", [&](Tape&, Tensor x) {
      return sum(hadamard(gt_layer(p, x, &mask), w));
    }, Tensor::randn(dm, 7, rng));
  }
  {
    std::vector<int> labels = {0, 2, 1, 1, 0};
    check("cross_entropy", [labels](Tape&, Tensor x) { return cross_entropy(x, labels); },
          Tensor::randn(3, 5, rng));
    PairSet pairs = {{0, 1, 1.5}, {1, 3, 0.7}, {2, 0, 2.2}};
    check("spd_metric_loss", [pairs](Tape&, Tensor x) { return spd_metric_loss(x, pairs); },
          randn_offset(3, 4, rng, 0.05));
  }
  {
    // full sparse GT + RPEARL forward with a cross-entropy loss; one flat
    // parameter vector covers every weight of the model
    ModelConfig cfg;
    cfg.mode = Mode::SparseGT;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 6;
    cfg.d_ff = 8;
    cfg.hops = 2;
    cfg.d_in = 3;
    cfg.use_pe = true;
    cfg.pe.layers = 1;
    cfg.pe.order = 2;
    cfg.pe.hidden = 4;
    cfg.pe.out_dim = 4;
    cfg.pe.m_samples = 2;
    cfg.pe.act = Nonlinearity::Tanh;
    cfg.head = {TaskHead::Kind::Classify, 2};
    ModelParams params = init_model_params(cfg, 3);
    for (auto& lay : params.gt_layers) lay.ff_act = Nonlinearity::Tanh;
    Graph g = small_graph(rng, 9);
    KHopMask mask = k_hop_mask(g, cfg.hops);
    Tensor feats = Tensor::randn(cfg.d_in, 9, rng);
    std::vector<int> labels(9);
    for (int i = 0; i < 9; ++i) labels[i] = i % 2;
    check("sparse_gt_rpearl_full_model", [&, cfg](Tape&, Tensor theta) {
      ModelParams local = params_from_flat(params, theta);
      ForwardOpts opts;
      opts.mask = &mask;
      opts.pe_seed = 5;
      Tensor logits = model_forward(cfg, local, g, feats, opts);
      return cross_entropy(logits, labels);
    }, params_to_flat(params));
  }
  return results;
}

}  // namespace gtx
