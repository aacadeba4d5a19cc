#include <algorithm>
#include <cmath>
#include <limits>

#include "gtx/attention.hpp"
#include "gtx/graph.hpp"
#include "gtx/linalg.hpp"
#include "gtx/manifold.hpp"
#include "gtx/pe.hpp"
#include "gtx/runner.hpp"
#include "gtx/terrain.hpp"
#include "gtx/train.hpp"
#include "gtx/util.hpp"

namespace gtx {

namespace {

Graph random_connected_graph(int n, double extra_edge_rate, RngStream& rng) {
  std::vector<Edge> pairs;
  for (int i = 1; i < n; ++i) pairs.push_back({rng.below_int(i), i, 1.0});
  const int extra = static_cast<int>(extra_edge_rate * n);
  for (int e = 0; e < extra; ++e) {
    int a = rng.below_int(n), b = rng.below_int(n);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    bool dup = false;
    for (const auto& p : pairs)
      if (p.i == a && p.j == b) dup = true;
    if (!dup) pairs.push_back({a, b, 1.0});
  }
  return Graph::from_undirected(n, pairs);
}

ModelConfig tiny_model_config(Mode mode) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 12;
  cfg.hops = 2;
  cfg.d_in = 3;
  cfg.use_pe = true;
  cfg.pe.layers = 1;
  cfg.pe.order = 2;
  cfg.pe.hidden = 4;
  cfg.pe.out_dim = 4;
  cfg.pe.m_samples = 3;
  cfg.head = {TaskHead::Kind::Classify, 2};
  return cfg;
}

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace

std::vector<std::pair<std::string, bool>> selftest_battery() {
  std::vector<std::pair<std::string, bool>> checks;
  auto push = [&](const std::string& name, bool ok) { checks.emplace_back(name, ok); };
  RngStream rng(99);

  {  // softmax: unmasked rows sum to one, masked entries exactly zero
    bool ok = true;
    Tensor s = Tensor::randn(6, 6, rng, 3.0);
    BoolMat mask(6, 6, false);
    for (int i = 0; i < 6; ++i) {
      mask.set(i, i, true);
      mask.set(i, (i * 2 + 1) % 6, true);
    }
    Tensor a = masked_row_softmax(s, &mask);
    for (int i = 0; i < 6; ++i) {
      double rs = 0.0;
      for (int j = 0; j < 6; ++j) {
        rs += a(i, j);
        if (!mask.at(i, j) && a(i, j) != 0.0) ok = false;
      }
      if (!close(rs, 1.0, 1e-12)) ok = false;
    }
    push("softmax_row_stochastic", ok);
  }
  {  // softmax stability and empty-row error
    Tensor s = Tensor::from({{0.0, 1e6}});
    Tensor a = masked_row_softmax(s, nullptr);
    bool ok = close(a(0, 0), 0.0, 1e-12) && close(a(0, 1), 1.0, 1e-12) && a.all_finite();
    BoolMat empty(1, 2, false);
    bool threw = false;
    try {
      masked_row_softmax(s, &empty);
    } catch (const std::exception&) {
      threw = true;
    }
    push("softmax_stability_and_empty_row", ok && threw);
  }
  {  // 1-Lipschitz nonlinearities
    bool ok = true;
    for (auto kind : {Nonlinearity::Relu, Nonlinearity::Tanh}) {
      for (int t = 0; t < 2000; ++t) {
        const double a = 6.0 * rng.normal(), b = 6.0 * rng.normal();
        Tensor ta = Tensor::from({{a}}), tb = Tensor::from({{b}});
        const double fa = pointwise_nonlinearity(ta, kind)(0, 0);
        const double fb = pointwise_nonlinearity(tb, kind)(0, 0);
        if (std::fabs(fa - fb) > std::fabs(a - b) + 1e-15) ok = false;
      }
      Tensor zero = Tensor::from({{0.0}});
      if (pointwise_nonlinearity(zero, kind)(0, 0) != 0.0) ok = false;
    }
    push("nonlinearity_lipschitz_and_zero", ok);
  }
  {  // laplacian: permutation commutes exactly
    Graph g = random_connected_graph(12, 1.5, rng);
    std::vector<int> perm(12);
    for (int i = 0; i < 12; ++i) perm[i] = i;
    rng.shuffle(perm);
    Graph gp = permute_graph(g, perm);
    Tensor l = dense_laplacian(g), lp = dense_laplacian(gp);
    bool ok = true;
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        if (lp(perm[i], perm[j]) != l(i, j)) ok = false;
    push("laplacian_permutation_exact", ok);
  }
  {  // laplacian rows sum to zero; kernel graph PSD
    PointCloud cloud = sample_manifold({ManifoldKind::Circle}, 64, 5);
    Graph g = Graph::kernel_graph(cloud.points, 0.1);
    Tensor l = dense_laplacian(g);
    bool ok = true;
    for (int i = 0; i < g.n(); ++i) {
      double rs = 0.0;
      for (int j = 0; j < g.n(); ++j) rs += l(i, j);
      if (!close(rs, 0.0, 1e-10)) ok = false;
    }
    auto evals = symmetric_eigenvalues(l);
    if (evals.front() < -1e-8) ok = false;
    push("kernel_laplacian_rows_and_psd", ok);
  }
  {  // k-hop masks: self included, nested in k
    Graph g = random_connected_graph(20, 1.0, rng);
    KHopMask m1 = k_hop_mask(g, 1), m2 = k_hop_mask(g, 2);
    bool ok = true;
    for (int i = 0; i < 20; ++i) {
      const auto& r1 = m1.row(i);
      const auto& r2 = m2.row(i);
      if (!std::binary_search(r1.begin(), r1.end(), i)) ok = false;
      for (int j : r1)
        if (!std::binary_search(r2.begin(), r2.end(), j)) ok = false;
    }
    push("khop_self_and_nested", ok);
  }
  {  // subsampling: exact count, determinism, edge containment
    Graph g = random_connected_graph(30, 2.0, rng);
    auto [s1, kept1] = subsample_graph(g, 0.4, 77);
    auto [s2, kept2] = subsample_graph(g, 0.4, 77);
    bool ok = kept1 == kept2 && s1.n() == static_cast<int>(std::ceil(0.4 * 30));
    Tensor a = dense_adjacency(g), as = dense_adjacency(s1);
    for (int i = 0; i < s1.n() && ok; ++i)
      for (int j = 0; j < s1.n(); ++j)
        if (as(i, j) != a(kept1[i], kept1[j])) ok = false;
    push("subsample_count_determinism_containment", ok);
  }
  {  // expander: degrees exact, no self loops; K4 for n=4 d=3
    EdgeSet e = random_expander_edges(10, 3, 11);
    std::vector<int> deg(10, 0);
    bool ok = true;
    for (auto [a, b] : e) {
      if (a == b) ok = false;
      deg[a]++;
      deg[b]++;
    }
    for (int d : deg)
      if (d != 3) ok = false;
    EdgeSet k4 = random_expander_edges(4, 3, 2);
    if (k4.size() != 6) ok = false;
    push("expander_regular_simple", ok);
  }
  {  // dense == sparse with a diameter-wide mask
    Graph g = random_connected_graph(20, 1.5, rng);
    const int diam = diameter(g);
    KHopMask mask = k_hop_mask(g, diam);
    ModelConfig cfg = tiny_model_config(Mode::SparseGT);
    ModelParams params = init_model_params(cfg, 12);
    Tensor x = Tensor::randn(cfg.d_model, 20, rng);
    Tensor ds = dense_attention(params.gt_layers[0], x);
    Tensor sp = sparse_attention(params.gt_layers[0], x, mask);
    double worst = 0.0;
    for (int i = 0; i < ds.size(); ++i)
      worst = std::max(worst, std::fabs(ds.data()[i] - sp.data()[i]));
    push("dense_sparse_equivalence", worst < 1e-9);
  }
  {  // conditional permutation equivariance of the full model
    Graph g = random_connected_graph(14, 1.5, rng);
    ModelConfig cfg = tiny_model_config(Mode::SparseGT);
    ModelParams params = init_model_params(cfg, 21);
    Tensor feats = Tensor::randn(cfg.d_in, 14, rng);
    auto ids = rpearl_draw_ids(14, cfg.pe.m_samples, 31);
    KHopMask mask = k_hop_mask(g, cfg.hops);
    ForwardOpts opts;
    opts.mask = &mask;
    opts.pe_ids = &ids;
    Tensor out = model_forward(cfg, params, g, feats, opts);

    std::vector<int> perm(14);
    for (int i = 0; i < 14; ++i) perm[i] = i;
    rng.shuffle(perm);
    Graph gp = permute_graph(g, perm);
    Tensor feats_p = permute_cols(feats, perm);
    std::vector<Tensor> ids_p;
    for (const auto& z : ids) ids_p.push_back(permute_cols(z, perm));
    KHopMask mask_p = k_hop_mask(gp, cfg.hops);
    ForwardOpts opts_p;
    opts_p.mask = &mask_p;
    opts_p.pe_ids = &ids_p;
    Tensor out_p = model_forward(cfg, params, gp, feats_p, opts_p);
    Tensor expected = permute_cols(out, perm);
    double worst = 0.0;
    for (int i = 0; i < out_p.size(); ++i)
      worst = std::max(worst, std::fabs(out_p.data()[i] - expected.data()[i]));
    push("model_permutation_equivariance", worst < 1e-10);
  }
  {  // graph_conv is linear in the signal
    Graph g = random_connected_graph(10, 1.0, rng);
    FilterBank bank;
    for (int k = 0; k < 3; ++k) bank.taps.push_back(Tensor::randn(3, 2, rng, 0.5));
    Tensor z1 = Tensor::randn(2, 10, rng), z2 = Tensor::randn(2, 10, rng);
    Tensor lhs = graph_conv(bank, g, add(scale(z1, 1.7), scale(z2, -0.6)));
    Tensor rhs = add(scale(graph_conv(bank, g, z1), 1.7), scale(graph_conv(bank, g, z2), -0.6));
    double worst = 0.0;
    for (int i = 0; i < lhs.size(); ++i)
      worst = std::max(worst, std::fabs(lhs.data()[i] - rhs.data()[i]));
    push("graph_conv_linear", worst < 1e-10);
  }
  {  // mt_reference: infinite radius equals the dense case exactly
    FrozenSignal sig = frozen_bandlimited_signal({ManifoldKind::Circle}, 3, 5, 4);
    MtParams mt = frozen_mt_params(3, 4);
    PointCloud quad = sample_manifold({ManifoldKind::Circle}, 512, 8);
    PointCloud eval = sample_manifold({ManifoldKind::Circle}, 32, 9);
    Tensor fq = eval_signal(sig, quad.points), fe = eval_signal(sig, eval.points);
    Tensor dense = mt_reference(mt, fq, quad.points, fe, eval.points);
    Tensor inf_r = mt_reference(mt, fq, quad.points, fe, eval.points,
                                std::numeric_limits<double>::infinity());
    bool ok = true;
    for (int i = 0; i < dense.size(); ++i)
      if (dense.data()[i] != inf_r.data()[i]) ok = false;
    push("mt_reference_infinite_radius", ok);
  }
  {  // adam: zero gradient leaves parameters unchanged
    Tensor w = Tensor::randn(3, 3, rng);
    Tensor w0 = w.clone();
    AdamState state;
    std::vector<std::pair<std::string, Tensor*>> params{{"w", &w}};
    std::vector<Tensor> grads{Tensor::zeros(3, 3)};
    adam_step(params, grads, state, AdamConfig{});
    bool ok = true;
    for (int i = 0; i < w.size(); ++i)
      if (w.data()[i] != w0.data()[i]) ok = false;
    push("adam_zero_grad_fixed_point", ok);
  }
  {  // checkpoint round trip is bit exact
    ModelConfig cfg = tiny_model_config(Mode::SparseGT);
    ModelParams params = init_model_params(cfg, 5);
    const std::string path = "/tmp/gtx_selftest_ckpt.bin";
    save_checkpoint(path, cfg, params);
    auto [cfg2, params2] = load_checkpoint(path);
    bool ok = model_config_to_text(cfg) == model_config_to_text(cfg2);
    auto a = params.named();
    auto b = params2.named();
    if (a.size() != b.size()) ok = false;
    for (size_t i = 0; ok && i < a.size(); ++i) {
      if (a[i].first != b[i].first) ok = false;
      for (int j = 0; ok && j < a[i].second->size(); ++j)
        if (a[i].second->data()[j] != b[i].second->data()[j]) ok = false;
    }
    push("checkpoint_roundtrip_bit_exact", ok);
  }
  {  // training determinism on a tiny task
    CommunityParams cp;
    cp.n = 120;
    cp.seed = 3;
    NodeDataset data = make_community_dataset(cp);
    GraphSlice train = induce_slice(data, data.train_idx);
    GraphSlice val = induce_slice(data, data.val_idx);
    ModelConfig cfg = tiny_model_config(Mode::SparseGT);
    cfg.d_in = train.features.rows();
    TrainConfig tc;
    tc.max_epochs = 5;
    tc.patience = 10;
    tc.seed = 17;
    TrainResult r1 = train_classifier(cfg, train, val, tc);
    TrainResult r2 = train_classifier(cfg, train, val, tc);
    bool ok = r1.record.train_loss == r2.record.train_loss &&
              r1.record.val_metric == r2.record.val_metric;
    push("train_determinism", ok);
  }
  {  // spd loss is invariant to embedding translation
    PairSet pairs = {{0, 1, 0.5}, {2, 3, 1.0}, {1, 3, 0.2}};
    Tensor e = Tensor::randn(3, 4, rng);
    Tensor shifted = e.clone();
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 3; ++i) shifted(i, j) += (i + 1) * 0.37;
    const double l0 = spd_metric_loss(e, pairs).scalar();
    const double l1 = spd_metric_loss(shifted, pairs).scalar();
    push("spd_loss_translation_invariant", close(l0, l1, 1e-12));
  }
  {  // manifold samples satisfy their constraints and are deterministic
    bool ok = true;
    for (auto kind : {ManifoldKind::Circle, ManifoldKind::FlatTorus2d, ManifoldKind::Sphere2d}) {
      PointCloud c1 = sample_manifold({kind}, 50, 13);
      PointCloud c2 = sample_manifold({kind}, 50, 13);
      if (constraint_residual(c1) > 1e-12) ok = false;
      for (int i = 0; i < c1.points.size(); ++i)
        if (c1.points.data()[i] != c2.points.data()[i]) ok = false;
    }
    push("manifold_constraints_and_determinism", ok);
  }
  {  // validation errors surface as exceptions
    bool ok = true;
    try {
      Graph::from_symmetric_edges(3, {{0, 1, 1.0}});  // missing reverse entry
      ok = false;
    } catch (const std::exception&) {
    }
    try {
      Graph::from_undirected(3, {{0, 1, -2.0}});
      ok = false;
    } catch (const std::exception&) {
    }
    try {
      parse_config("[a]\nx = 1\n");
      validate_config(parse_config("[a]\nx = 1\n"), {{"a.y", "int", ""}});
      ok = false;
    } catch (const std::exception&) {
    }
    push("validation_errors_throw", ok);
  }
  {  // dijkstra matches a straight-line lower bound on a terrain graph
    ElevationGrid dem = make_hill_dem(12, 12, 1.0, 3, 7);
    Graph g = grid_graph_8nn(dem);
    auto dist = dijkstra_spd(g, 0);
    bool ok = true;
    for (int t = 1; t < g.n(); ++t) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = g.coords()(0, c) - g.coords()(t, c);
        d2 += d * d;
      }
      if (dist[t] < std::sqrt(d2) - 1e-9) ok = false;
    }
    push("dijkstra_euclid_lower_bound", ok);
  }
  return checks;
}

}  // namespace gtx
