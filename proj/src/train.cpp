#include "gtx/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gtx/linalg.hpp"
#include "gtx/util.hpp"

namespace gtx {

// ---- losses -------------------------------------------------------------------

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<int>* node_mask) {
  const int classes = logits.rows(), n = logits.cols();
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " columns");
  std::vector<int> all;
  const std::vector<int>* nodes = node_mask;
  if (!nodes) {
    all.resize(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    nodes = &all;
  }
  if (nodes->empty()) throw std::invalid_argument("cross_entropy: empty node mask");
  for (int j : *nodes) {
    if (j < 0 || j >= n) throw std::invalid_argument("cross_entropy: node index out of range");
    if (labels[j] < 0 || labels[j] >= classes)
      throw std::invalid_argument("cross_entropy: label " + std::to_string(labels[j]) +
                                  " out of range for " + std::to_string(classes) + " classes");
  }
  double loss = 0.0;
  for (int j : *nodes) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) mx = std::max(mx, logits(c, j));
    double z = 0.0;
    for (int c = 0; c < classes; ++c) z += std::exp(logits(c, j) - mx);
    loss += std::log(z) + mx - logits(labels[j], j);
  }
  Tensor out(1, 1);
  out(0, 0) = loss / nodes->size();
  if (!logits.requires_grad()) return out;
  Tape* tape = logits.tape();
  Tensor lv = logits;
  std::vector<int> nodes_copy = *nodes;
  std::vector<int> labels_copy = labels;
  const int node = tape->record({lv.node()}, [lv, nodes_copy, labels_copy, classes](
                                                 const Tensor& g, Tape::Grads& grads) {
    const double go = g.scalar() / nodes_copy.size();
    Tensor dl(lv.rows(), lv.cols());
    for (int j : nodes_copy) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < classes; ++c) mx = std::max(mx, lv(c, j));
      double z = 0.0;
      for (int c = 0; c < classes; ++c) z += std::exp(lv(c, j) - mx);
      for (int c = 0; c < classes; ++c) {
        const double p = std::exp(lv(c, j) - mx) / z;
        dl(c, j) = go * (p - (c == labels_copy[j] ? 1.0 : 0.0));
      }
    }
    accumulate_grad(grads, lv.node(), dl);
  });
  return tape->adopt(std::move(out), node);
}

Tensor spd_metric_loss(const Tensor& embeddings, const PairSet& pairs) {
  if (pairs.empty()) throw std::invalid_argument("spd_metric_loss: empty pair set");
  const int d = embeddings.rows(), n = embeddings.cols();
  for (const auto& p : pairs) {
    if (p.src < 0 || p.src >= n || p.dst < 0 || p.dst >= n)
      throw std::invalid_argument("spd_metric_loss: pair index out of range");
    if (p.spd < 0.0) throw std::invalid_argument("spd_metric_loss: negative spd");
  }
  double loss = 0.0;
  for (const auto& p : pairs) {
    double l1 = 0.0;
    for (int c = 0; c < d; ++c) l1 += std::fabs(embeddings(c, p.src) - embeddings(c, p.dst));
    const double r = l1 - p.spd;
    loss += r * r;
  }
  Tensor out(1, 1);
  out(0, 0) = loss / pairs.size();
  if (!embeddings.requires_grad()) return out;
  Tape* tape = embeddings.tape();
  Tensor ev = embeddings;
  PairSet pairs_copy = pairs;
  const int node =
      tape->record({ev.node()}, [ev, pairs_copy, d](const Tensor& g, Tape::Grads& grads) {
        const double go = 2.0 * g.scalar() / pairs_copy.size();
        Tensor de(ev.rows(), ev.cols());
        for (const auto& p : pairs_copy) {
          double l1 = 0.0;
          for (int c = 0; c < d; ++c) l1 += std::fabs(ev(c, p.src) - ev(c, p.dst));
          const double coef = go * (l1 - p.spd);
          for (int c = 0; c < d; ++c) {
            const double diff = ev(c, p.src) - ev(c, p.dst);
            const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            de(c, p.src) += coef * s;
            de(c, p.dst) -= coef * s;
          }
        }
        accumulate_grad(grads, ev.node(), de);
      });
  return tape->adopt(std::move(out), node);
}

// ---- optimizer ------------------------------------------------------------------

void adam_step(const std::vector<std::pair<std::string, Tensor*>>& params,
               const std::vector<Tensor>& grads, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params/grads size mismatch");
  if (state.m.empty()) {
    for (const auto& [name, t] : params) {
      state.m.push_back(Tensor::zeros(t->rows(), t->cols()));
      state.v.push_back(Tensor::zeros(t->rows(), t->cols()));
    }
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t p = 0; p < params.size(); ++p) {
    Tensor* w = params[p].second;
    double* pm = state.m[p].data();
    double* pv = state.v[p].data();
    double* pw = w->data();
    const bool has_grad = !grads[p].empty();
    if (has_grad && !grads[p].all_finite())
      throw std::runtime_error("adam_step: non-finite gradient for parameter '" + params[p].first +
                               "'");
    const double* pg = has_grad ? grads[p].data() : nullptr;
    for (int i = 0; i < w->size(); ++i) {
      const double g = pg ? pg[i] : 0.0;
      pm[i] = cfg.beta1 * pm[i] + (1.0 - cfg.beta1) * g;
      pv[i] = cfg.beta2 * pv[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = pm[i] / bc1;
      const double vhat = pv[i] / bc2;
      pw[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * pw[i]);
    }
  }
}

// ---- datasets -------------------------------------------------------------------

GraphSlice induce_slice(const NodeDataset& data, const std::vector<int>& nodes) {
  std::vector<int> inv(data.g.n(), -1);
  for (size_t i = 0; i < nodes.size(); ++i) inv[nodes[i]] = static_cast<int>(i);
  std::vector<Edge> pairs;
  for (int i = 0; i < data.g.n(); ++i) {
    if (inv[i] < 0) continue;
    auto cols = data.g.neighbors(i);
    auto vals = data.g.adjacency().row_vals(i);
    for (size_t k = 0; k < cols.size(); ++k)
      if (cols[k] > i && inv[cols[k]] >= 0) pairs.push_back({inv[i], inv[cols[k]], vals[k]});
  }
  GraphSlice slice;
  slice.g = Graph::from_undirected(static_cast<int>(nodes.size()), pairs);
  slice.features = Tensor(data.features.rows(), static_cast<int>(nodes.size()));
  slice.labels.resize(nodes.size());
  for (size_t i = 0; i < nodes.size(); ++i) {
    for (int r = 0; r < data.features.rows(); ++r)
      slice.features(r, static_cast<int>(i)) = data.features(r, nodes[i]);
    slice.labels[i] = data.labels[nodes[i]];
  }
  if (data.g.has_coords()) {
    Tensor c(static_cast<int>(nodes.size()), data.g.coords().cols());
    for (size_t i = 0; i < nodes.size(); ++i)
      for (int j = 0; j < c.cols(); ++j) c(static_cast<int>(i), j) = data.g.coords()(nodes[i], j);
    slice.g.set_coords(std::move(c));
  }
  return slice;
}

void split_nodes(int n, uint64_t seed, std::vector<int>& train, std::vector<int>& val,
                 std::vector<int>& test, double train_frac, double val_frac) {
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  RngStream rng(substream_seed(seed, "split"));
  rng.shuffle(perm);
  const int ntr = static_cast<int>(std::round(train_frac * n));
  const int nva = static_cast<int>(std::round(val_frac * n));
  train.assign(perm.begin(), perm.begin() + ntr);
  val.assign(perm.begin() + ntr, perm.begin() + ntr + nva);
  test.assign(perm.begin() + ntr + nva, perm.end());
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  std::sort(test.begin(), test.end());
}

namespace {

// geometric graph on the unit sphere: edges between points closer than radius
Graph sphere_radius_graph(const Tensor& pts, double radius) {
  const int n = pts.rows();
  const double r2 = radius * radius;
  std::vector<Edge> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        const double t = pts(i, a) - pts(j, a);
        d2 += t * t;
      }
      if (d2 < r2) pairs.push_back({i, j, 1.0});
    }
  }
  Graph g = Graph::from_undirected(n, pairs);
  g.set_coords(pts.clone());
  return g;
}

Tensor sphere_points(int n, RngStream& rng) {
  Tensor pts(n, 3);
  for (int i = 0; i < n; ++i) {
    double v[3], norm = 0.0;
    do {
      norm = 0.0;
      for (double& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (int a = 0; a < 3; ++a) pts(i, a) = v[a] / norm;
  }
  return pts;
}

}  // namespace

NodeDataset make_community_dataset(const CommunityParams& p) {
  RngStream rng(substream_seed(p.seed, "community", static_cast<uint64_t>(p.n)));
  Tensor pts = sphere_points(p.n, rng);
  NodeDataset data;
  data.g = sphere_radius_graph(pts, p.radius);
  data.num_classes = 2;
  data.labels.resize(p.n);
  for (int i = 0; i < p.n; ++i) data.labels[i] = pts(i, 2) > 0.0 ? 1 : 0;
  const int d_in = 3 + p.noise_dims;
  data.features = Tensor(d_in, p.n);
  for (int i = 0; i < p.n; ++i) {
    for (int a = 0; a < 3; ++a) data.features(a, i) = pts(i, a) + p.feature_noise * rng.normal();
    for (int a = 3; a < d_in; ++a) data.features(a, i) = rng.normal();
  }
  split_nodes(p.n, p.seed, data.train_idx, data.val_idx, data.test_idx);
  return data;
}

NodeDataset make_heterophilic_dataset(const HeterophilicParams& p) {
  RngStream rng(substream_seed(p.seed, "heterophilic", static_cast<uint64_t>(p.n)));
  Tensor pts = sphere_points(p.n, rng);
  NodeDataset data;
  data.g = sphere_radius_graph(pts, p.radius);
  data.num_classes = 2;
  std::vector<double> hidden(p.n);
  for (int i = 0; i < p.n; ++i) hidden[i] = rng.normal();
  KHopMask two_hop = k_hop_mask(data.g, 2);
  std::vector<double> m(p.n), sz(p.n);
  for (int i = 0; i < p.n; ++i) {
    double acc = 0.0;
    for (int j : two_hop.row(i)) acc += hidden[j];
    m[i] = acc / two_hop.row(i).size();
    sz[i] = static_cast<double>(two_hop.row(i).size());
  }
  auto standardize = [&](std::vector<double>& v) {
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - mu) * (x - mu);
    var /= v.size();
    const double s = var > 1e-18 ? 1.0 / std::sqrt(var) : 0.0;
    for (double& x : v) x = (x - mu) * s;
  };
  standardize(m);
  standardize(sz);
  data.labels.resize(p.n);
  for (int i = 0; i < p.n; ++i)
    data.labels[i] = (m[i] + p.structural_weight * sz[i]) > 0.0 ? 1 : 0;
  const int d_in = 2 + p.noise_dims;
  data.features = Tensor(d_in, p.n);
  for (int i = 0; i < p.n; ++i) {
    data.features(0, i) = hidden[i];
    const bool flip = rng.uniform() < p.leak_flip;
    const int leak = flip ? 1 - data.labels[i] : data.labels[i];
    data.features(1, i) = leak ? 1.0 : -1.0;
    for (int a = 2; a < d_in; ++a) data.features(a, i) = rng.normal();
  }
  split_nodes(p.n, p.seed, data.train_idx, data.val_idx, data.test_idx);
  return data;
}

// ---- training --------------------------------------------------------------------

std::string run_record_to_log(const RunRecord& r) {
  std::ostringstream os;
  os.precision(12);
  for (size_t e = 0; e < r.train_loss.size(); ++e)
    os << "epoch=" << (e + 1) << " train_loss=" << r.train_loss[e]
       << " val_metric=" << r.val_metric[e] << "\n";
  os << "final test_metric=" << r.test_metric << " epochs=" << r.epochs_run
     << " wallclock=" << r.wallclock_s << " seed=" << r.seed << " diverged=" << (r.diverged ? 1 : 0)
     << "\n";
  return os.str();
}

KHopMask build_model_mask(const ModelConfig& cfg, const Graph& g, uint64_t seed) {
  if (cfg.mode != Mode::SparseGT) return KHopMask{};
  if (cfg.pe.m_samples < 1) throw std::invalid_argument("build_model_mask: bad config");
  if (cfg.hops < 1) throw std::invalid_argument("build_model_mask: hops must be >= 1");
  if (cfg.expander_degree > 0) {
    EdgeSet extra = random_expander_edges(g.n(), cfg.expander_degree, substream_seed(seed, "re"));
    return k_hop_mask_with_extra(g, cfg.hops, extra);
  }
  return k_hop_mask(g, cfg.hops);
}

double classification_accuracy(const ModelConfig& cfg, const ModelParams& params,
                               const GraphSlice& slice, uint64_t pe_seed) {
  ForwardOpts opts;
  KHopMask mask = build_model_mask(cfg, slice.g, pe_seed);
  if (cfg.mode == Mode::SparseGT) opts.mask = &mask;
  opts.pe_seed = pe_seed;
  Tensor logits = model_forward(cfg, params, slice.g, slice.features, opts);
  int correct = 0;
  for (int j = 0; j < logits.cols(); ++j) {
    int best = 0;
    for (int c = 1; c < logits.rows(); ++c)
      if (logits(c, j) > logits(best, j)) best = c;
    if (best == slice.labels[j]) ++correct;
  }
  return static_cast<double>(correct) / logits.cols();
}

namespace {

// One optimization step: bind, forward, backward, align grads, unbind, adam.
// Returns the loss value (may be non-finite on divergence).
template <typename LossFn>
double train_step(const ModelConfig& cfg, ModelParams& params, AdamState& adam,
                  const TrainConfig& tc, LossFn&& loss_fn) {
  Tape tape;
  params.bind_all(tape);
  Tensor loss = loss_fn(params);
  const double loss_value = loss.scalar();
  if (!std::isfinite(loss_value)) {
    params.unbind_all();
    return loss_value;
  }
  auto grads = tape.backward(loss);
  auto named = params.named();
  std::vector<Tensor> aligned;
  aligned.reserve(named.size());
  for (auto& [name, t] : named) aligned.push_back(Tape::grad(grads, *t));
  params.unbind_all();
  adam_step(named, aligned, adam, tc.adam);
  if (tc.norm_budget) clamp_qkv_norms(params, *tc.norm_budget);
  (void)cfg;
  return loss_value;
}

}  // namespace

TrainResult train_classifier(const ModelConfig& cfg, const GraphSlice& train, const GraphSlice& val,
                             const TrainConfig& tc) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  ModelParams params = init_model_params(cfg, tc.seed);
  AdamState adam;
  RunRecord record;
  record.seed = tc.seed;
  record.config_echo = model_config_to_text(cfg);
  const uint64_t pe_seed = substream_seed(tc.seed, "pe_root");
  KHopMask train_mask = build_model_mask(cfg, train.g, pe_seed);
  RngStream drop_rng(substream_seed(tc.seed, "dropout"));

  ModelParams best = params.clone();
  double best_score = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const double loss_value = train_step(cfg, params, adam, tc, [&](ModelParams& p) {
      ForwardOpts opts;
      if (cfg.mode == Mode::SparseGT) opts.mask = &train_mask;
      opts.pe_seed = pe_seed;
      opts.drop.hidden = cfg.dropout;
      opts.drop.attn = cfg.attn_dropout;
      opts.drop.rng = &drop_rng;
      opts.drop.training = true;
      Tensor logits = model_forward(cfg, p, train.g, train.features, opts);
      return cross_entropy(logits, train.labels, nullptr);
    });
    record.train_loss.push_back(loss_value);
    record.epochs_run = epoch + 1;
    if (!std::isfinite(loss_value)) {
      record.diverged = true;
      record.val_metric.push_back(best_score);
      break;
    }
    const double val_acc = classification_accuracy(cfg, params, val, pe_seed);
    record.val_metric.push_back(val_acc);
    if (val_acc > best_score) {
      best_score = val_acc;
      best = params.clone();
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  record.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  record.seconds_per_epoch = record.epochs_run > 0 ? record.wallclock_s / record.epochs_run : 0.0;
  return {std::move(best), std::move(record)};
}

TrainResult train_spd(const ModelConfig& cfg, const Graph& g, const Tensor& features,
                      const PairSet& train_pairs, const PairSet& val_pairs, const TrainConfig& tc) {
  cfg.validate();
  if (cfg.head.kind != TaskHead::Kind::Embed)
    throw std::invalid_argument("train_spd: model head must be embed");
  const auto t_start = std::chrono::steady_clock::now();
  ModelParams params = init_model_params(cfg, tc.seed);
  AdamState adam;
  RunRecord record;
  record.seed = tc.seed;
  record.config_echo = model_config_to_text(cfg);
  const uint64_t pe_seed = substream_seed(tc.seed, "pe_root");
  KHopMask mask = build_model_mask(cfg, g, pe_seed);
  RngStream drop_rng(substream_seed(tc.seed, "dropout"));

  auto embed_all = [&](const ModelParams& p) {
    ForwardOpts opts;
    if (cfg.mode == Mode::SparseGT) opts.mask = &mask;
    opts.pe_seed = pe_seed;
    return model_forward(cfg, p, g, features, opts);
  };
  auto val_mae = [&](const ModelParams& p) {
    Tensor emb = embed_all(p);
    double mae = 0.0;
    for (const auto& pr : val_pairs) {
      double l1 = 0.0;
      for (int c = 0; c < emb.rows(); ++c) l1 += std::fabs(emb(c, pr.src) - emb(c, pr.dst));
      mae += std::fabs(l1 - pr.spd);
    }
    return mae / val_pairs.size();
  };

  ModelParams best = params.clone();
  double best_score = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    const double loss_value = train_step(cfg, params, adam, tc, [&](ModelParams& p) {
      ForwardOpts opts;
      if (cfg.mode == Mode::SparseGT) opts.mask = &mask;
      opts.pe_seed = pe_seed;
      opts.drop.hidden = cfg.dropout;
      opts.drop.attn = cfg.attn_dropout;
      opts.drop.rng = &drop_rng;
      opts.drop.training = true;
      Tensor emb = model_forward(cfg, p, g, features, opts);
      return spd_metric_loss(emb, train_pairs);
    });
    record.train_loss.push_back(loss_value);
    record.epochs_run = epoch + 1;
    if (!std::isfinite(loss_value)) {
      record.diverged = true;
      record.val_metric.push_back(best_score);
      break;
    }
    const double mae = val_mae(params);
    record.val_metric.push_back(mae);
    if (-mae > best_score) {
      best_score = -mae;
      best = params.clone();
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  record.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  record.seconds_per_epoch = record.epochs_run > 0 ? record.wallclock_s / record.epochs_run : 0.0;
  return {std::move(best), std::move(record)};
}

// ---- harnesses ---------------------------------------------------------------------

namespace {

std::vector<int> subsample_indices(const std::vector<int>& idx, double fraction, uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("subsample_indices: fraction out of range");
  const int keep = std::max(2, static_cast<int>(std::ceil(fraction * idx.size())));
  RngStream rng(seed);
  auto pick = rng.sample_without_replacement(static_cast<int>(idx.size()), keep);
  std::vector<int> out;
  out.reserve(keep);
  for (int p : pick) out.push_back(idx[p]);
  return out;
}

}  // namespace

std::vector<GridCell> transferability_grid(
    const std::vector<std::pair<std::string, ModelConfig>>& models, const NodeDataset& data,
    const GridSpec& grid, const TrainConfig& tc, int threads) {
  struct CellSpec {
    int model_idx;
    int a_tr, a_te, seed;
  };
  std::vector<CellSpec> specs;
  for (int m = 0; m < static_cast<int>(models.size()); ++m)
    for (int i = 0; i < static_cast<int>(grid.alphas_train.size()); ++i)
      for (int j = 0; j < static_cast<int>(grid.alphas_test.size()); ++j)
        for (int s = 0; s < grid.seeds; ++s) specs.push_back({m, i, j, s});
  std::vector<GridCell> cells(specs.size());
  parallel_for(static_cast<int>(specs.size()), threads, [&](int c) {
    const CellSpec& sp = specs[c];
    GridCell& cell = cells[c];
    cell.model = models[sp.model_idx].first;
    cell.alpha_train = grid.alphas_train[sp.a_tr];
    cell.alpha_test = grid.alphas_test[sp.a_te];
    cell.seed = sp.seed;
    try {
      const uint64_t cell_seed = substream_seed(grid.root_seed, "grid_cell", sp.seed,
                                                static_cast<uint64_t>(sp.a_tr) * 1000 + sp.a_te);
      auto tr_nodes = subsample_indices(data.train_idx, cell.alpha_train,
                                        substream_seed(cell_seed, "tr"));
      auto va_nodes = subsample_indices(data.val_idx, cell.alpha_train,
                                        substream_seed(cell_seed, "va"));
      auto te_nodes = subsample_indices(data.test_idx, cell.alpha_test,
                                        substream_seed(cell_seed, "te"));
      GraphSlice train = induce_slice(data, tr_nodes);
      GraphSlice val = induce_slice(data, va_nodes);
      GraphSlice test = induce_slice(data, te_nodes);
      TrainConfig cell_tc = tc;
      cell_tc.seed = substream_seed(tc.seed, "grid_train", sp.seed, sp.model_idx);
      TrainResult result = train_classifier(models[sp.model_idx].second, train, val, cell_tc);
      const uint64_t pe_seed = substream_seed(cell_tc.seed, "pe_root");
      cell.metric =
          classification_accuracy(models[sp.model_idx].second, result.params, test, pe_seed);
      cell.wallclock_s = result.record.wallclock_s;
      cell.seconds_per_epoch = result.record.seconds_per_epoch;
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  });
  return cells;
}

ModelConfig ablation_variant_config(const ModelConfig& base, const std::string& variant) {
  ModelConfig cfg = base;
  cfg.expander_degree = 0;
  if (variant == "no_pe") {
    cfg.mode = Mode::DenseGT;
    cfg.use_pe = false;
  } else if (variant == "rpearl") {
    cfg.mode = Mode::DenseGT;
    cfg.use_pe = true;
  } else if (variant == "mask") {
    cfg.mode = Mode::SparseGT;
    cfg.use_pe = false;
  } else if (variant == "mask+rpearl") {
    cfg.mode = Mode::SparseGT;
    cfg.use_pe = true;
  } else if (variant == "mask+re") {
    cfg.mode = Mode::SparseGT;
    cfg.use_pe = false;
    cfg.expander_degree = 3;
  } else if (variant == "mask+rpearl+re") {
    cfg.mode = Mode::SparseGT;
    cfg.use_pe = true;
    cfg.expander_degree = 3;
  } else {
    throw std::invalid_argument("unknown ablation variant: " + variant);
  }
  return cfg;
}

std::string ablation_display_name(const std::string& variant) {
  if (variant == "no_pe") return "GT (no PE)";
  if (variant == "rpearl") return "GT + RPEARL";
  if (variant == "mask") return "GT + Mask";
  if (variant == "mask+rpearl") return "GT + Mask + RPEARL";
  if (variant == "mask+re") return "GT + Mask + RE";
  if (variant == "mask+rpearl+re") return "GT + Mask + RPEARL + RE";
  return variant;
}

std::string format_pct_vs_baseline(double metric, double baseline) {
  const double pct = (metric - baseline) / baseline * 100.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f%%", pct);
  return std::string(buf);
}

std::vector<AblationRow> ablation_run(const ModelConfig& base, const std::vector<std::string>& variants,
                                      const NodeDataset& data, double alpha, int seeds,
                                      const TrainConfig& tc, int threads) {
  if (variants.empty()) throw std::invalid_argument("ablation_run: no variants");
  struct Cell {
    int variant_idx, seed;
  };
  std::vector<Cell> cells;
  for (int v = 0; v < static_cast<int>(variants.size()); ++v)
    for (int s = 0; s < seeds; ++s) cells.push_back({v, s});
  std::vector<double> metrics(cells.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<int>(cells.size()), threads, [&](int c) {
    const auto [v, s] = cells[c];
    // shared seeds/splits across variants: the subsample depends only on s
    const uint64_t cell_seed = substream_seed(tc.seed, "ablation_cell", s);
    auto tr_nodes = subsample_indices(data.train_idx, alpha, substream_seed(cell_seed, "tr"));
    auto va_nodes = subsample_indices(data.val_idx, alpha, substream_seed(cell_seed, "va"));
    GraphSlice train = induce_slice(data, tr_nodes);
    GraphSlice val = induce_slice(data, va_nodes);
    GraphSlice test = induce_slice(data, data.test_idx);
    ModelConfig cfg = ablation_variant_config(base, variants[v]);
    TrainConfig cell_tc = tc;
    cell_tc.seed = substream_seed(tc.seed, "ablation_train", s);
    TrainResult result = train_classifier(cfg, train, val, cell_tc);
    const uint64_t pe_seed = substream_seed(cell_tc.seed, "pe_root");
    metrics[c] = classification_accuracy(cfg, result.params, test, pe_seed);
  });
  std::vector<AblationRow> rows;
  double baseline = 0.0;
  for (int v = 0; v < static_cast<int>(variants.size()); ++v) {
    std::vector<double> per_seed;
    for (size_t c = 0; c < cells.size(); ++c)
      if (cells[c].variant_idx == v) per_seed.push_back(metrics[c]);
    const double med = median(per_seed);
    if (v == 0) baseline = med;
    rows.push_back({variants[v], med, v == 0 ? "--" : format_pct_vs_baseline(med, baseline)});
  }
  return rows;
}

}  // namespace gtx
