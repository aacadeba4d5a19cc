#include <doctest.h>

#include <cmath>

#include "gtx/linalg.hpp"
#include "gtx/train.hpp"

using namespace gtx;

TEST_CASE("cross entropy") {
  SUBCASE("uniform logits cost ln C") {
    Tensor logits = Tensor::zeros(4, 6);
    std::vector<int> labels = {0, 1, 2, 3, 0, 1};
    CHECK(cross_entropy(logits, labels).scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }
  SUBCASE("a huge correct margin costs nearly nothing") {
    Tensor logits = Tensor::zeros(3, 2);
    logits(1, 0) = 50.0;
    logits(2, 1) = 50.0;
    std::vector<int> labels = {1, 2};
    CHECK(cross_entropy(logits, labels).scalar() < 1e-12);
  }
  SUBCASE("random case matches a scalar-loop oracle") {
    RngStream rng(81);
    Tensor logits = Tensor::randn(5, 9, rng, 2.0);
    std::vector<int> labels(9);
    for (int i = 0; i < 9; ++i) labels[i] = rng.below_int(5);
    std::vector<int> mask = {0, 2, 3, 7};
    double oracle = 0.0;
    for (int j : mask) {
      double z = 0.0;
      for (int c = 0; c < 5; ++c) z += std::exp(logits(c, j));
      oracle += -std::log(std::exp(logits(labels[j], j)) / z);
    }
    oracle /= mask.size();
    CHECK(cross_entropy(logits, labels, &mask).scalar() == doctest::Approx(oracle).epsilon(1e-12));
  }
  SUBCASE("empty mask is a contract error") {
    Tensor logits = Tensor::zeros(2, 2);
    std::vector<int> labels = {0, 1};
    std::vector<int> mask;
    CHECK_THROWS_AS(cross_entropy(logits, labels, &mask), std::invalid_argument);
  }
}

TEST_CASE("spd metric loss") {
  SUBCASE("identical embeddings with zero targets cost zero") {
    Tensor emb = Tensor::ones(3, 4);
    PairSet pairs = {{0, 1, 0.0}, {2, 3, 0.0}};
    CHECK(spd_metric_loss(emb, pairs).scalar() == 0.0);
  }
  SUBCASE("the l1 distance is what is regressed") {
    Tensor emb = Tensor::zeros(2, 2);
    emb(0, 0) = 3.0;
    emb(1, 0) = -4.0;  // phi_0 - phi_1 = (3, -4), l1 = 7
    PairSet pairs = {{0, 1, 7.0}};
    CHECK(spd_metric_loss(emb, pairs).scalar() == 0.0);
  }
  SUBCASE("random batch matches a scalar-loop oracle") {
    RngStream rng(82);
    Tensor emb = Tensor::randn(4, 6, rng);
    PairSet pairs;
    for (int t = 0; t < 8; ++t)
      pairs.push_back({rng.below_int(6), rng.below_int(6), rng.uniform() * 3.0});
    double oracle = 0.0;
    for (const auto& p : pairs) {
      double l1 = 0.0;
      for (int c = 0; c < 4; ++c) l1 += std::fabs(emb(c, p.src) - emb(c, p.dst));
      oracle += (l1 - p.spd) * (l1 - p.spd);
    }
    oracle /= pairs.size();
    CHECK(spd_metric_loss(emb, pairs).scalar() == doctest::Approx(oracle).epsilon(1e-12));
  }
  SUBCASE("translation invariance") {
    RngStream rng(83);
    Tensor emb = Tensor::randn(3, 5, rng);
    PairSet pairs = {{0, 4, 1.0}, {1, 2, 0.4}};
    Tensor shifted = emb.clone();
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 3; ++i) shifted(i, j) += 0.7 * (i + 1);
    CHECK(spd_metric_loss(emb, pairs).scalar() ==
          doctest::Approx(spd_metric_loss(shifted, pairs).scalar()).epsilon(1e-12));
  }
  SUBCASE("bad indices are contract errors") {
    Tensor emb = Tensor::zeros(2, 3);
    CHECK_THROWS_AS(spd_metric_loss(emb, {{0, 9, 1.0}}), std::invalid_argument);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged while moments decay") {
    RngStream rng(84);
    Tensor w = Tensor::randn(2, 2, rng);
    Tensor w0 = w.clone();
    AdamState st;
    std::vector<std::pair<std::string, Tensor*>> params{{"w", &w}};
    adam_step(params, {Tensor::ones(2, 2)}, st, AdamConfig{});
    Tensor w1 = w.clone();
    adam_step(params, {Tensor::zeros(2, 2)}, st, AdamConfig{});
    for (int i = 0; i < 4; ++i) CHECK(w.data()[i] != w0.data()[i]);
    // the second step still moves a little (momentum), but the moment decays
    CHECK(std::fabs(st.m[0](0, 0)) < 1.0);
    (void)w1;
  }
  SUBCASE("first step magnitude is the learning rate (bias corrected)") {
    Tensor w = Tensor::zeros(1, 1);
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.01;
    std::vector<std::pair<std::string, Tensor*>> params{{"w", &w}};
    adam_step(params, {Tensor::ones(1, 1)}, st, cfg);
    CHECK(std::fabs(w(0, 0) + cfg.lr) < 1e-9);  // m_hat/sqrt(v_hat) = 1 exactly
  }
  SUBCASE("a convex quadratic is minimized") {
    RngStream rng(85);
    Tensor target = Tensor::randn(3, 3, rng);
    Tensor w = Tensor::zeros(3, 3);
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 0.05;
    std::vector<std::pair<std::string, Tensor*>> params{{"w", &w}};
    double loss = 0.0;
    for (int step = 0; step < 100; ++step) {
      Tape tape;
      tape.bind(w);
      Tensor diff = sub(w, target);
      Tensor l = sum(hadamard(diff, diff));
      loss = l.scalar();
      auto grads = tape.backward(l);
      Tensor g = Tape::grad(grads, w);
      w.detach();
      adam_step(params, {g}, st, cfg);
    }
    CHECK(loss < 1e-3);  // optimum is 0
  }
  SUBCASE("non-finite gradients abort with the parameter name") {
    Tensor w = Tensor::zeros(1, 1);
    AdamState st;
    Tensor bad = Tensor::full(1, 1, std::nan(""));
    std::vector<std::pair<std::string, Tensor*>> params{{"w_head", &w}};
    CHECK_THROWS_WITH_AS(adam_step(params, {bad}, st, AdamConfig{}), doctest::Contains("w_head"),
                         std::runtime_error);
  }
}

TEST_CASE("splits and slices") {
  std::vector<int> tr, va, te;
  split_nodes(1000, 4, tr, va, te);
  CHECK(tr.size() == 450);
  CHECK(va.size() == 100);
  CHECK(te.size() == 450);
  std::vector<char> seen(1000, 0);
  for (int i : tr) seen[i] += 1;
  for (int i : va) seen[i] += 1;
  for (int i : te) seen[i] += 1;
  for (char c : seen) CHECK(c == 1);  // disjoint, covering
}

TEST_CASE("dataset generators") {
  SUBCASE("community dataset is balanced and deterministic") {
    CommunityParams p;
    p.n = 400;
    p.seed = 9;
    NodeDataset a = make_community_dataset(p);
    NodeDataset b = make_community_dataset(p);
    int ones = 0;
    for (int y : a.labels) ones += y;
    CHECK(ones > 100);
    CHECK(ones < 300);
    CHECK(a.features.rows() == 5);
    for (int i = 0; i < a.features.size(); ++i)
      CHECK(a.features.data()[i] == b.features.data()[i]);
  }
  SUBCASE("heterophilic labels depend on the 2-hop structure") {
    HeterophilicParams p;
    p.n = 500;
    p.seed = 10;
    NodeDataset d = make_heterophilic_dataset(p);
    CHECK(d.features.rows() == 4);
    int ones = 0;
    for (int y : d.labels) ones += y;
    CHECK(ones > 125);
    CHECK(ones < 375);
    // the leak channel agrees with the label more often than chance but far
    // from always (flip probability 0.4)
    int agree = 0;
    for (int i = 0; i < p.n; ++i)
      agree += (d.features(1, i) > 0) == (d.labels[i] == 1) ? 1 : 0;
    CHECK(agree > 0.52 * p.n);
    CHECK(agree < 0.68 * p.n);
  }
}

TEST_CASE("training loop") {
  SUBCASE("a separable task is learned by the mlp baseline") {
    // linearly separable synthetic features
    RngStream rng(86);
    const int n = 120;
    NodeDataset data;
    data.g = Graph::from_undirected(n, {});
    data.num_classes = 2;
    data.features = Tensor(2, n);
    data.labels.resize(n);
    for (int i = 0; i < n; ++i) {
      data.labels[i] = i % 2;
      data.features(0, i) = (data.labels[i] ? 1.0 : -1.0) + 0.1 * rng.normal();
      data.features(1, i) = rng.normal();
    }
    split_nodes(n, 1, data.train_idx, data.val_idx, data.test_idx);
    ModelConfig cfg;
    cfg.mode = Mode::MlpBaseline;
    cfg.layers = 1;
    cfg.d_model = 8;
    cfg.d_in = 2;
    cfg.use_pe = false;
    cfg.head = {TaskHead::Kind::Classify, 2};
    TrainConfig tc;
    tc.max_epochs = 50;
    tc.patience = 50;
    tc.adam.lr = 0.05;
    tc.seed = 2;
    GraphSlice train = induce_slice(data, data.train_idx);
    GraphSlice val = induce_slice(data, data.val_idx);
    TrainResult r = train_classifier(cfg, train, val, tc);
    const double train_acc = classification_accuracy(cfg, r.params, train, 0);
    CHECK(train_acc == 1.0);
  }
  SUBCASE("zero learning rate leaves parameters unchanged and the loss flat") {
    CommunityParams p;
    p.n = 100;
    p.seed = 2;
    NodeDataset data = make_community_dataset(p);
    ModelConfig cfg;
    cfg.mode = Mode::SparseGT;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 8;
    cfg.hops = 2;
    cfg.d_in = 5;
    cfg.use_pe = false;
    cfg.head = {TaskHead::Kind::Classify, 2};
    TrainConfig tc;
    tc.max_epochs = 4;
    tc.patience = 10;
    tc.adam.lr = 0.0;
    tc.seed = 5;
    GraphSlice train = induce_slice(data, data.train_idx);
    GraphSlice val = induce_slice(data, data.val_idx);
    ModelParams init = init_model_params(cfg, tc.seed);
    TrainResult r = train_classifier(cfg, train, val, tc);
    for (double l : r.record.train_loss)
      CHECK(l == doctest::Approx(r.record.train_loss[0]).epsilon(1e-15));
    auto a = init.named();
    auto b = r.params.named();
    for (size_t i = 0; i < a.size(); ++i)
      for (int j = 0; j < a[i].second->size(); ++j)
        CHECK(a[i].second->data()[j] == b[i].second->data()[j]);
  }
  SUBCASE("identical seeds give identical run records") {
    CommunityParams p;
    p.n = 100;
    p.seed = 3;
    NodeDataset data = make_community_dataset(p);
    ModelConfig cfg;
    cfg.mode = Mode::SparseGT;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 8;
    cfg.hops = 2;
    cfg.d_in = 5;
    cfg.use_pe = true;
    cfg.pe.layers = 1;
    cfg.pe.order = 2;
    cfg.pe.hidden = 4;
    cfg.pe.out_dim = 4;
    cfg.pe.m_samples = 2;
    cfg.dropout = 0.1;
    cfg.attn_dropout = 0.1;
    cfg.head = {TaskHead::Kind::Classify, 2};
    TrainConfig tc;
    tc.max_epochs = 6;
    tc.patience = 10;
    tc.seed = 7;
    GraphSlice train = induce_slice(data, data.train_idx);
    GraphSlice val = induce_slice(data, data.val_idx);
    TrainResult r1 = train_classifier(cfg, train, val, tc);
    TrainResult r2 = train_classifier(cfg, train, val, tc);
    CHECK(r1.record.train_loss == r2.record.train_loss);
    CHECK(r1.record.val_metric == r2.record.val_metric);
  }
  SUBCASE("loss decreases within the first epochs") {
    CommunityParams p;
    p.n = 200;
    p.seed = 6;
    NodeDataset data = make_community_dataset(p);
    ModelConfig cfg;
    cfg.mode = Mode::SparseGT;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 16;
    cfg.d_ff = 16;
    cfg.hops = 2;
    cfg.d_in = 5;
    cfg.use_pe = false;
    cfg.head = {TaskHead::Kind::Classify, 2};
    TrainConfig tc;
    tc.max_epochs = 20;
    tc.patience = 20;
    tc.adam.lr = 0.01;
    tc.seed = 8;
    GraphSlice train = induce_slice(data, data.train_idx);
    GraphSlice val = induce_slice(data, data.val_idx);
    TrainResult r = train_classifier(cfg, train, val, tc);
    REQUIRE(r.record.train_loss.size() >= 20);
    CHECK(r.record.train_loss[19] < r.record.train_loss[0]);
  }
}

TEST_CASE("ablation helpers") {
  SUBCASE("report formatting fixture") {
    CHECK(format_pct_vs_baseline(49.70, 31.33) == "+58.63%");
    CHECK(format_pct_vs_baseline(31.01, 31.33) == "-1.02%");
    CHECK(format_pct_vs_baseline(34.63, 31.33) == "+10.53%");
  }
  SUBCASE("variant configs") {
    ModelConfig base;
    base.d_in = 4;
    ModelConfig v = ablation_variant_config(base, "mask+rpearl+re");
    CHECK(v.mode == Mode::SparseGT);
    CHECK(v.use_pe);
    CHECK(v.expander_degree == 3);
    ModelConfig b = ablation_variant_config(base, "no_pe");
    CHECK(b.mode == Mode::DenseGT);
    CHECK(!b.use_pe);
    CHECK_THROWS_AS(ablation_variant_config(base, "bogus"), std::invalid_argument);
    CHECK(ablation_display_name("mask+rpearl") == "GT + Mask + RPEARL");
  }
}

TEST_CASE("transferability grid completeness") {
  CommunityParams p;
  p.n = 160;
  p.seed = 12;
  NodeDataset data = make_community_dataset(p);
  ModelConfig cfg;
  cfg.mode = Mode::SparseGT;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d_model = 8;
  cfg.d_ff = 8;
  cfg.hops = 2;
  cfg.d_in = 5;
  cfg.use_pe = false;
  cfg.head = {TaskHead::Kind::Classify, 2};
  GridSpec grid;
  grid.alphas_train = {0.5, 1.0};
  grid.alphas_test = {1.0};
  grid.seeds = 2;
  TrainConfig tc;
  tc.max_epochs = 5;
  tc.patience = 10;
  tc.seed = 1;
  auto cells = transferability_grid({{"sparse_gt", cfg}}, data, grid, tc, 2);
  CHECK(cells.size() == 4);  // |alphas_train| * |alphas_test| * seeds
  for (const auto& c : cells) {
    CHECK(!c.failed);
    CHECK(c.metric >= 0.0);
    CHECK(c.metric <= 1.0);
  }
  // determinism across runs (including with a thread pool)
  auto cells2 = transferability_grid({{"sparse_gt", cfg}}, data, grid, tc, 1);
  for (size_t i = 0; i < cells.size(); ++i) CHECK(cells[i].metric == cells2[i].metric);
}
