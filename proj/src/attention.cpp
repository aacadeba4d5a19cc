#include "gtx/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gtx {

namespace {

void check_projection_shapes(const AttentionParams& p, const Tensor& x) {
  if (p.heads.empty()) throw std::invalid_argument("attention: no heads");
  const int d_model = x.rows();
  const int d_head = p.heads[0].q.rows();
  for (const auto& h : p.heads) {
    for (const Tensor* m : {&h.q, &h.k, &h.v})
      if (m->rows() != d_head || m->cols() != d_model)
        throw std::invalid_argument("attention: projection is " + m->shape_str() + ", expected " +
                                    std::to_string(d_head) + "x" + std::to_string(d_model));
  }
  if (p.out_proj.cols() != static_cast<int>(p.heads.size()) * d_head)
    throw std::invalid_argument("attention: out_proj is " + p.out_proj.shape_str() +
                                ", expected cols " + std::to_string(p.heads.size() * d_head));
}

void stats_from_softmax(const Tensor& a, AttnStats* stats) {
  if (!stats) return;
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) {
      s += a(i, j);
      stats->min_weight = std::min(stats->min_weight, a(i, j));
    }
    stats->max_row_sum_dev = std::max(stats->max_row_sum_dev, std::fabs(s - 1.0));
  }
}

}  // namespace

Tensor dense_attention(const AttentionParams& p, const Tensor& x, bool scaled,
                       const DropoutCtx* drop, AttnStats* stats) {
  check_projection_shapes(p, x);
  const double tau = scaled ? 1.0 / std::sqrt(static_cast<double>(p.heads[0].q.rows())) : 1.0;
  std::vector<Tensor> head_outs;
  head_outs.reserve(p.heads.size());
  for (const auto& h : p.heads) {
    Tensor q = matmul(h.q, x);
    Tensor k = matmul(h.k, x);
    Tensor v = matmul(h.v, x);
    Tensor scores = scale(matmul(transpose(q), k), tau);
    Tensor attn = masked_row_softmax(scores, nullptr);
    stats_from_softmax(attn, stats);
    if (drop && drop->training && drop->attn > 0.0)
      attn = dropout(attn, drop->attn, *drop->rng, true);
    head_outs.push_back(matmul(v, transpose(attn)));
  }
  return matmul(p.out_proj, vstack(head_outs));
}

Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const KHopMask& mask,
                        double scale_factor, double attn_dropout, RngStream* rng, bool training,
                        AttnStats* stats) {
  const int d = q.rows(), n = q.cols();
  if (k.rows() != d || k.cols() != n || v.rows() != d || v.cols() != n)
    throw std::invalid_argument("masked_attention: q/k/v shape mismatch");
  if (mask.n != n)
    throw std::invalid_argument("masked_attention: mask covers " + std::to_string(mask.n) +
                                " nodes, x has " + std::to_string(n));
  const bool use_drop = training && attn_dropout > 0.0;
  if (use_drop && !rng) throw std::invalid_argument("masked_attention: dropout needs an rng");

  // ragged per-row attention weights, saved for backward
  auto weights = std::make_shared<std::vector<std::vector<double>>>(n);
  auto keep = use_drop ? std::make_shared<std::vector<std::vector<double>>>(n) : nullptr;
  Tensor out(d, n);
  std::vector<double> scores;
  for (int i = 0; i < n; ++i) {
    const auto& row = mask.row(i);
    scores.resize(row.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < row.size(); ++r) {
      const int j = row[r];
      double s = 0.0;
      for (int t = 0; t < d; ++t) s += q(t, i) * k(t, j);
      scores[r] = s * scale_factor;
      mx = std::max(mx, scores[r]);
    }
    double z = 0.0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      z += s;
    }
    auto& w = (*weights)[i];
    w.resize(row.size());
    double row_sum = 0.0;
    for (size_t r = 0; r < row.size(); ++r) {
      w[r] = scores[r] / z;
      row_sum += w[r];
      if (stats) stats->min_weight = std::min(stats->min_weight, w[r]);
    }
    if (stats) stats->max_row_sum_dev = std::max(stats->max_row_sum_dev, std::fabs(row_sum - 1.0));
    const double* kp = nullptr;
    if (use_drop) {
      auto& kr = (*keep)[i];
      kr.resize(row.size());
      const double inv_keep = 1.0 / (1.0 - attn_dropout);
      for (size_t r = 0; r < row.size(); ++r)
        kr[r] = rng->uniform() < (1.0 - attn_dropout) ? inv_keep : 0.0;
      kp = kr.data();
    }
    for (size_t r = 0; r < row.size(); ++r) {
      const int j = row[r];
      const double a = kp ? w[r] * kp[r] : w[r];
      if (a == 0.0) continue;
      for (int t = 0; t < d; ++t) out(t, i) += a * v(t, j);
    }
  }

  Tape* tape = nullptr;
  for (const Tensor* t : {&q, &k, &v}) {
    if (t->requires_grad()) {
      if (tape && tape != t->tape()) throw std::invalid_argument("masked_attention: mixed tapes");
      tape = t->tape();
    }
  }
  if (!tape) return out;
  std::vector<int> parents;
  for (const Tensor* t : {&q, &k, &v})
    if (t->requires_grad()) parents.push_back(t->node());
  Tensor qv = q, kv = k, vv = v;
  auto rows_ptr = mask.rows;
  const int node = tape->record(
      parents, [qv, kv, vv, rows_ptr, weights, keep, scale_factor, d, n](const Tensor& g,
                                                                         Tape::Grads& grads) {
        Tensor dq(d, n), dk(d, n), dv(d, n);
        std::vector<double> da, ds;
        for (int i = 0; i < n; ++i) {
          const auto& row = (*rows_ptr)[i];
          const auto& w = (*weights)[i];
          const double* kp = keep ? (*keep)[i].data() : nullptr;
          da.resize(row.size());
          ds.resize(row.size());
          // dL/da_j = (drop_j) <g_i, v_j>; dv_j += a_j drop_j g_i
          for (size_t r = 0; r < row.size(); ++r) {
            const int j = row[r];
            double gv = 0.0;
            for (int t = 0; t < d; ++t) gv += g(t, i) * vv(t, j);
            const double mult = kp ? kp[r] : 1.0;
            da[r] = gv * mult;
            const double aw = w[r] * mult;
            if (aw != 0.0)
              for (int t = 0; t < d; ++t) dv(t, j) += aw * g(t, i);
          }
          // softmax backward on the pre-dropout weights
          double dot = 0.0;
          for (size_t r = 0; r < row.size(); ++r) dot += da[r] * w[r];
          for (size_t r = 0; r < row.size(); ++r) ds[r] = w[r] * (da[r] - dot);
          for (size_t r = 0; r < row.size(); ++r) {
            const int j = row[r];
            const double sj = ds[r] * scale_factor;
            if (sj == 0.0) continue;
            for (int t = 0; t < d; ++t) {
              dq(t, i) += sj * kv(t, j);
              dk(t, j) += sj * qv(t, i);
            }
          }
        }
        if (qv.requires_grad()) accumulate_grad(grads, qv.node(), dq);
        if (kv.requires_grad()) accumulate_grad(grads, kv.node(), dk);
        if (vv.requires_grad()) accumulate_grad(grads, vv.node(), dv);
      });
  return tape->adopt(std::move(out), node);
}

Tensor sparse_attention(const AttentionParams& p, const Tensor& x, const KHopMask& mask, bool scaled,
                        const DropoutCtx* drop, AttnStats* stats) {
  check_projection_shapes(p, x);
  const double tau = scaled ? 1.0 / std::sqrt(static_cast<double>(p.heads[0].q.rows())) : 1.0;
  std::vector<Tensor> head_outs;
  head_outs.reserve(p.heads.size());
  for (const auto& h : p.heads) {
    Tensor q = matmul(h.q, x);
    Tensor k = matmul(h.k, x);
    Tensor v = matmul(h.v, x);
    const bool training = drop && drop->training;
    head_outs.push_back(masked_attention(q, k, v, mask, tau, drop ? drop->attn : 0.0,
                                         drop ? drop->rng : nullptr, training, stats));
  }
  return matmul(p.out_proj, vstack(head_outs));
}

Tensor gt_layer(const AttentionParams& p, const Tensor& x, const KHopMask* mask, bool scaled,
                const DropoutCtx* drop, AttnStats* stats) {
  Tensor attn_in = layer_norm_cols(x);
  Tensor attn_out = mask ? sparse_attention(p, attn_in, *mask, scaled, drop, stats)
                         : dense_attention(p, attn_in, scaled, drop, stats);
  if (drop && drop->training && drop->hidden > 0.0)
    attn_out = dropout(attn_out, drop->hidden, *drop->rng, true);
  Tensor h = add(x, attn_out);
  Tensor ff_in = layer_norm_cols(h);
  Tensor ff = matmul(p.ff2, pointwise_nonlinearity(matmul(p.ff1, ff_in), p.ff_act));
  if (drop && drop->training && drop->hidden > 0.0) ff = dropout(ff, drop->hidden, *drop->rng, true);
  return add(h, ff);
}

void ModelConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("config: layers must be >= 1");
  if (d_in < 1) throw std::invalid_argument("config: d_in must be set");
  if (mode == Mode::DenseGT || mode == Mode::SparseGT) {
    if (heads < 1 || d_model < 1 || d_ff < 1) throw std::invalid_argument("config: bad dims");
    if (d_model % heads != 0) throw std::invalid_argument("config: d_model must divide by heads");
  }
  if (mode == Mode::SparseGT && hops < 1)
    throw std::invalid_argument("config: sparse mode needs hops >= 1");
  if (head.dim < 1) throw std::invalid_argument("config: head dim must be >= 1");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::DenseGT: return "dense_gt";
    case Mode::SparseGT: return "sparse_gt";
    case Mode::GnnBaseline: return "gnn_baseline";
    case Mode::MlpBaseline: return "mlp_baseline";
  }
  return "?";
}

Mode mode_from_name(const std::string& s) {
  if (s == "dense_gt") return Mode::DenseGT;
  if (s == "sparse_gt") return Mode::SparseGT;
  if (s == "gnn_baseline") return Mode::GnnBaseline;
  if (s == "mlp_baseline") return Mode::MlpBaseline;
  throw std::invalid_argument("unknown mode: " + s);
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("w_in", &w_in);
  if (!w_pe.empty()) out.emplace_back("w_pe", &w_pe);
  for (size_t l = 0; l < pe.layers.size(); ++l)
    for (size_t k = 0; k < pe.layers[l].bank.taps.size(); ++k)
      out.emplace_back("pe.layer" + std::to_string(l) + ".tap" + std::to_string(k),
                       &pe.layers[l].bank.taps[k]);
  for (size_t l = 0; l < gt_layers.size(); ++l) {
    auto& lay = gt_layers[l];
    const std::string base = "layer" + std::to_string(l) + ".";
    for (size_t h = 0; h < lay.heads.size(); ++h) {
      out.emplace_back(base + "head" + std::to_string(h) + ".q", &lay.heads[h].q);
      out.emplace_back(base + "head" + std::to_string(h) + ".k", &lay.heads[h].k);
      out.emplace_back(base + "head" + std::to_string(h) + ".v", &lay.heads[h].v);
    }
    out.emplace_back(base + "out_proj", &lay.out_proj);
    out.emplace_back(base + "ff1", &lay.ff1);
    out.emplace_back(base + "ff2", &lay.ff2);
  }
  for (size_t l = 0; l < gnn_layers.size(); ++l)
    for (size_t k = 0; k < gnn_layers[l].taps.size(); ++k)
      out.emplace_back("gnn.layer" + std::to_string(l) + ".tap" + std::to_string(k),
                       &gnn_layers[l].taps[k]);
  for (size_t l = 0; l < mlp_layers.size(); ++l)
    out.emplace_back("mlp.layer" + std::to_string(l), &mlp_layers[l]);
  out.emplace_back("w_head", &w_head);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  auto mut = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

void ModelParams::bind_all(Tape& tape) {
  for (auto& [name, t] : named()) tape.bind(*t);
}

void ModelParams::unbind_all() {
  for (auto& [name, t] : named()) t->detach();
}

ModelParams ModelParams::clone() const {
  ModelParams c;
  c.w_in = w_in.empty() ? Tensor() : w_in.clone();
  c.w_pe = w_pe.empty() ? Tensor() : w_pe.clone();
  for (const auto& layer : pe.layers) {
    PELayer nl;
    nl.act = layer.act;
    for (const auto& t : layer.bank.taps) nl.bank.taps.push_back(t.clone());
    c.pe.layers.push_back(std::move(nl));
  }
  for (const auto& layer : gt_layers) {
    AttentionParams np;
    for (const auto& h : layer.heads) np.heads.push_back({h.q.clone(), h.k.clone(), h.v.clone()});
    np.out_proj = layer.out_proj.clone();
    np.ff1 = layer.ff1.clone();
    np.ff2 = layer.ff2.clone();
    np.ff_act = layer.ff_act;
    c.gt_layers.push_back(std::move(np));
  }
  for (const auto& bank : gnn_layers) {
    FilterBank nb;
    for (const auto& t : bank.taps) nb.taps.push_back(t.clone());
    c.gnn_layers.push_back(std::move(nb));
  }
  c.gnn_act = gnn_act;
  for (const auto& t : mlp_layers) c.mlp_layers.push_back(t.clone());
  c.w_head = w_head.empty() ? Tensor() : w_head.clone();
  return c;
}

long ModelParams::num_scalars() const {
  long s = 0;
  for (const auto& [name, t] : named()) s += t->size();
  return s;
}

ModelParams init_model_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  RngStream init(substream_seed(seed, "init"));
  ModelParams p;
  p.w_in = Tensor::randn(cfg.d_model, cfg.d_in, init, 1.0 / std::sqrt(static_cast<double>(cfg.d_in)));
  if (cfg.use_pe) {
    p.pe = init_pe_params(cfg.pe, init);
    p.w_pe = Tensor::randn(cfg.d_model, cfg.pe.out_dim, init,
                           1.0 / std::sqrt(static_cast<double>(cfg.pe.out_dim)));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  if (cfg.mode == Mode::DenseGT || cfg.mode == Mode::SparseGT) {
    for (int l = 0; l < cfg.layers; ++l) {
      AttentionParams lay;
      for (int h = 0; h < cfg.heads; ++h)
        lay.heads.push_back({Tensor::randn(cfg.d_head(), cfg.d_model, init, inv_sqrt_d),
                             Tensor::randn(cfg.d_head(), cfg.d_model, init, inv_sqrt_d),
                             Tensor::randn(cfg.d_head(), cfg.d_model, init, inv_sqrt_d)});
      lay.out_proj = Tensor::randn(cfg.d_model, cfg.heads * cfg.d_head(), init, inv_sqrt_d);
      lay.ff1 = Tensor::randn(cfg.d_ff, cfg.d_model, init, inv_sqrt_d);
      lay.ff2 = Tensor::randn(cfg.d_model, cfg.d_ff, init,
                              1.0 / std::sqrt(static_cast<double>(cfg.d_ff)));
      p.gt_layers.push_back(std::move(lay));
    }
  } else if (cfg.mode == Mode::GnnBaseline) {
    for (int l = 0; l < cfg.layers; ++l) {
      FilterBank bank;
      const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d_model * cfg.pe.order));
      for (int k = 0; k < cfg.pe.order; ++k)
        bank.taps.push_back(Tensor::randn(cfg.d_model, cfg.d_model, init, s));
      p.gnn_layers.push_back(std::move(bank));
    }
  } else {
    for (int l = 0; l < cfg.layers; ++l)
      p.mlp_layers.push_back(Tensor::randn(cfg.d_model, cfg.d_model, init, inv_sqrt_d));
  }
  p.w_head = Tensor::randn(cfg.head.dim, cfg.d_model, init, inv_sqrt_d);
  return p;
}

Tensor model_forward(const ModelConfig& cfg, const ModelParams& params, const Graph& g,
                     const Tensor& features, const ForwardOpts& opts) {
  cfg.validate();
  if (features.rows() != cfg.d_in)
    throw std::invalid_argument("model_forward: features are " + features.shape_str() +
                                ", config d_in=" + std::to_string(cfg.d_in));
  if (cfg.mode != Mode::MlpBaseline && features.cols() != g.n())
    throw std::invalid_argument("model_forward: features cover " +
                                std::to_string(features.cols()) + " nodes, graph has " +
                                std::to_string(g.n()));
  if (cfg.mode == Mode::SparseGT && opts.mask == nullptr)
    throw std::invalid_argument("model_forward: sparse mode requires a k-hop mask");

  Tensor x = matmul(params.w_in, features);
  if (cfg.use_pe) {
    Tensor enc = opts.pe_ids ? rpearl_with_ids(params.pe, g, *opts.pe_ids)
                             : rpearl(params.pe, g, cfg.pe.m_samples, opts.pe_seed);
    x = add(x, matmul(params.w_pe, transpose(enc)));
  }
  const DropoutCtx* drop = opts.drop.training ? &opts.drop : nullptr;
  switch (cfg.mode) {
    case Mode::DenseGT:
      for (const auto& lay : params.gt_layers)
        x = gt_layer(lay, x, nullptr, !cfg.unscaled_scores, drop, opts.stats);
      x = layer_norm_cols(x);  // pre-norm stacks normalize before the head
      break;
    case Mode::SparseGT:
      for (const auto& lay : params.gt_layers)
        x = gt_layer(lay, x, opts.mask, !cfg.unscaled_scores, drop, opts.stats);
      x = layer_norm_cols(x);
      break;
    case Mode::GnnBaseline:
      for (const auto& bank : params.gnn_layers) {
        x = pointwise_nonlinearity(graph_conv(bank, g, x), params.gnn_act);
        if (drop && drop->hidden > 0.0) x = dropout(x, drop->hidden, *drop->rng, true);
      }
      break;
    case Mode::MlpBaseline:
      for (const auto& w : params.mlp_layers) {
        x = pointwise_nonlinearity(matmul(w, x), Nonlinearity::Relu);
        if (drop && drop->hidden > 0.0) x = dropout(x, drop->hidden, *drop->rng, true);
      }
      break;
  }
  return matmul(params.w_head, x);
}

double spectral_norm(const Tensor& m, int iters) {
  const int r = m.rows(), c = m.cols();
  std::vector<double> v(c, 1.0 / std::sqrt(static_cast<double>(c))), u(r, 0.0);
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    // u = M v
    for (int i = 0; i < r; ++i) {
      double s = 0.0;
      for (int j = 0; j < c; ++j) s += m(i, j) * v[j];
      u[i] = s;
    }
    double un = 0.0;
    for (double x : u) un += x * x;
    un = std::sqrt(un);
    if (un == 0.0) return 0.0;
    for (double& x : u) x /= un;
    // v = M^T u
    for (int j = 0; j < c; ++j) {
      double s = 0.0;
      for (int i = 0; i < r; ++i) s += m(i, j) * u[i];
      v[j] = s;
    }
    double vn = 0.0;
    for (double x : v) vn += x * x;
    vn = std::sqrt(vn);
    sigma = vn;
    if (vn == 0.0) return 0.0;
    for (double& x : v) x /= vn;
  }
  return sigma;
}

void clamp_qkv_norms(ModelParams& params, double budget) {
  for (auto& lay : params.gt_layers) {
    for (auto& h : lay.heads) {
      for (Tensor* m : {&h.q, &h.k, &h.v}) {
        const double s = spectral_norm(*m);
        if (s > budget) {
          const double f = budget / s;
          double* p = m->data();
          for (int i = 0; i < m->size(); ++i) p[i] *= f;
        }
      }
    }
  }
}

double max_qkv_norm(const ModelParams& params) {
  double mx = 0.0;
  for (const auto& lay : params.gt_layers)
    for (const auto& h : lay.heads)
      for (const Tensor* m : {&h.q, &h.k, &h.v}) mx = std::max(mx, spectral_norm(*m));
  return mx;
}

// ---- config text + checkpoint ------------------------------------------------

std::string model_config_to_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "mode = " << mode_name(cfg.mode) << "\n";
  os << "layers = " << cfg.layers << "\n";
  os << "heads = " << cfg.heads << "\n";
  os << "d_model = " << cfg.d_model << "\n";
  os << "d_ff = " << cfg.d_ff << "\n";
  os << "hops = " << cfg.hops << "\n";
  os << "d_in = " << cfg.d_in << "\n";
  os << "use_pe = " << (cfg.use_pe ? 1 : 0) << "\n";
  os << "pe_layers = " << cfg.pe.layers << "\n";
  os << "pe_order = " << cfg.pe.order << "\n";
  os << "pe_hidden = " << cfg.pe.hidden << "\n";
  os << "pe_out_dim = " << cfg.pe.out_dim << "\n";
  os << "pe_m_samples = " << cfg.pe.m_samples << "\n";
  os << "pe_act = " << (cfg.pe.act == Nonlinearity::Relu ? "relu" : "tanh") << "\n";
  os << "dropout = " << cfg.dropout << "\n";
  os << "attn_dropout = " << cfg.attn_dropout << "\n";
  os << "head = " << (cfg.head.kind == TaskHead::Kind::Classify ? "classify" : "embed") << "\n";
  os << "head_dim = " << cfg.head.dim << "\n";
  os << "unscaled_scores = " << (cfg.unscaled_scores ? 1 : 0) << "\n";
  os << "expander_degree = " << cfg.expander_degree << "\n";
  if (cfg.norm_budget) os << "norm_budget = " << *cfg.norm_budget << "\n";
  return os.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("model config text: missing key " + key);
    return it->second;
  };
  ModelConfig cfg;
  cfg.mode = mode_from_name(get("mode"));
  cfg.layers = std::stoi(get("layers"));
  cfg.heads = std::stoi(get("heads"));
  cfg.d_model = std::stoi(get("d_model"));
  cfg.d_ff = std::stoi(get("d_ff"));
  cfg.hops = std::stoi(get("hops"));
  cfg.d_in = std::stoi(get("d_in"));
  cfg.use_pe = get("use_pe") == "1";
  cfg.pe.layers = std::stoi(get("pe_layers"));
  cfg.pe.order = std::stoi(get("pe_order"));
  cfg.pe.hidden = std::stoi(get("pe_hidden"));
  cfg.pe.out_dim = std::stoi(get("pe_out_dim"));
  cfg.pe.m_samples = std::stoi(get("pe_m_samples"));
  cfg.pe.act = get("pe_act") == "tanh" ? Nonlinearity::Tanh : Nonlinearity::Relu;
  cfg.dropout = std::stod(get("dropout"));
  cfg.attn_dropout = std::stod(get("attn_dropout"));
  cfg.head.kind = get("head") == "embed" ? TaskHead::Kind::Embed : TaskHead::Kind::Classify;
  cfg.head.dim = std::stoi(get("head_dim"));
  cfg.unscaled_scores = get("unscaled_scores") == "1";
  if (kv.count("expander_degree")) cfg.expander_degree = std::stoi(kv["expander_degree"]);
  if (kv.count("norm_budget")) cfg.norm_budget = std::stod(kv["norm_budget"]);
  return cfg;
}

namespace {

constexpr char kMagic[5] = {'G', 'T', 'T', 'X', '1'};

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64_array(std::ostream& os, const double* p, size_t count) {
  for (size_t i = 0; i < count; ++i) {
    uint64_t bits;
    std::memcpy(&bits, &p[i], 8);
    write_u64(os, bits);
  }
}

void read_f64_array(std::istream& is, double* p, size_t count) {
  for (size_t i = 0; i < count; ++i) {
    const uint64_t bits = read_u64(is);
    std::memcpy(&p[i], &bits, 8);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kMagic, 5);
  const std::string manifest = model_config_to_text(cfg);
  write_u64(os, manifest.size());
  os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const auto& [name, t] : params.named()) {
    write_u64(os, static_cast<uint64_t>(t->rows()));
    write_u64(os, static_cast<uint64_t>(t->cols()));
    write_f64_array(os, t->data(), static_cast<size_t>(t->size()));
  }
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const uint64_t mlen = read_u64(is);
  std::string manifest(mlen, '\0');
  is.read(manifest.data(), static_cast<std::streamsize>(mlen));
  if (!is) throw std::runtime_error("checkpoint: truncated manifest");
  ModelConfig cfg = model_config_from_text(manifest);
  ModelParams params = init_model_params(cfg, 0);
  for (auto& [name, t] : params.named()) {
    const uint64_t r = read_u64(is), c = read_u64(is);
    if (static_cast<int>(r) != t->rows() || static_cast<int>(c) != t->cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    read_f64_array(is, t->data(), static_cast<size_t>(t->size()));
  }
  return {cfg, params};
}

}  // namespace gtx
