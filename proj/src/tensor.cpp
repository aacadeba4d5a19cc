#include "gtx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace gtx {

Tensor::Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative shape");
  buf_ = std::make_shared<std::vector<double>>(static_cast<size_t>(rows) * cols, 0.0);
}

Tensor Tensor::ones(int rows, int cols) { return full(rows, cols, 1.0); }

Tensor Tensor::full(int rows, int cols, double value) {
  Tensor t(rows, cols);
  std::fill(t.buf_->begin(), t.buf_->end(), value);
  return t;
}

Tensor Tensor::identity(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::from(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Tensor t(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw std::invalid_argument("Tensor::from: ragged rows");
    int j = 0;
    for (double x : row) t(i, j++) = x;
    ++i;
  }
  return t;
}

Tensor Tensor::from_data(int rows, int cols, std::vector<double> data) {
  if (static_cast<size_t>(rows) * cols != data.size())
    throw std::invalid_argument("Tensor::from_data: size mismatch");
  Tensor t;
  t.rows_ = rows;
  t.cols_ = cols;
  t.buf_ = std::make_shared<std::vector<double>>(std::move(data));
  return t;
}

Tensor Tensor::randn(int rows, int cols, RngStream& rng, double stddev) {
  Tensor t(rows, cols);
  double* p = t.data();
  for (int i = 0; i < t.size(); ++i) p[i] = stddev * rng.normal();
  return t;
}

Tensor Tensor::clone() const {
  if (empty()) return Tensor();
  Tensor t;
  t.rows_ = rows_;
  t.cols_ = cols_;
  t.buf_ = std::make_shared<std::vector<double>>(*buf_);
  return t;
}

double Tensor::scalar() const {
  if (rows_ != 1 || cols_ != 1) throw std::invalid_argument("scalar(): tensor is " + shape_str());
  return (*buf_)[0];
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double x : *buf_) m = std::max(m, std::fabs(x));
  return m;
}

double Tensor::frobenius_norm() const {
  double s = 0.0;
  for (double x : *buf_) s += x * x;
  return std::sqrt(s);
}

bool Tensor::all_finite() const {
  for (double x : *buf_)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

// ---- Tape -------------------------------------------------------------------

void Tape::bind(Tensor& t) {
  if (t.empty()) throw std::invalid_argument("Tape::bind: empty tensor");
  t.tape_ = this;
  t.node_ = record({}, nullptr);
}

int Tape::record(std::vector<int> parents, BackFn back) {
  nodes_.push_back(Node{std::move(parents), std::move(back)});
  return static_cast<int>(nodes_.size()) - 1;
}

Tape::Grads Tape::backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " + loss.shape_str());
  if (loss.tape() != this || loss.node() < 0)
    throw std::invalid_argument("backward: loss is not recorded on this tape");
  Grads grads(nodes_.size());
  grads[loss.node()] = Tensor::ones(1, 1);
  for (int id = loss.node(); id >= 0; --id) {
    if (grads[id].empty() || !nodes_[id].back) continue;
    nodes_[id].back(grads[id], grads);
  }
  return grads;
}

Tensor Tape::grad(const Grads& grads, const Tensor& t) {
  if (t.node() < 0 || t.node() >= static_cast<int>(grads.size())) return Tensor();
  return grads[t.node()];
}

void accumulate_grad(Tape::Grads& grads, int node, const Tensor& delta) {
  Tensor& slot = grads[node];
  if (slot.empty()) {
    slot = delta.clone();
    return;
  }
  double* d = slot.data();
  const double* s = delta.data();
  const int n = slot.size();
  for (int i = 0; i < n; ++i) d[i] += s[i];
}

namespace {

Tape* joint_tape(const Tensor& a, const Tensor& b) {
  Tape* ta = a.requires_grad() ? a.tape() : nullptr;
  Tape* tb = b.requires_grad() ? b.tape() : nullptr;
  if (ta && tb && ta != tb) throw std::invalid_argument("operands recorded on different tapes");
  return ta ? ta : tb;
}

Tensor attach(Tensor t, Tape* tape, int node) { return tape->adopt(std::move(t), node); }

}  // namespace

// ---- kernels ---------------------------------------------------------------

namespace {

// C += A(ra x ca) * B(ca x cb), row-major, ikj order
void gemm_acc(double* c, const double* a, const double* b, int ra, int ca, int cb) {
  for (int i = 0; i < ra; ++i) {
    const double* ai = a + static_cast<size_t>(i) * ca;
    double* ci = c + static_cast<size_t>(i) * cb;
    for (int k = 0; k < ca; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b + static_cast<size_t>(k) * cb;
      for (int j = 0; j < cb; ++j) ci[j] += aik * bk[j];
    }
  }
}

// C += A * B^T, A: ra x ca, B: rb x ca  -> C: ra x rb
void gemm_abt_acc(double* c, const double* a, const double* b, int ra, int ca, int rb) {
  for (int i = 0; i < ra; ++i) {
    const double* ai = a + static_cast<size_t>(i) * ca;
    double* ci = c + static_cast<size_t>(i) * rb;
    for (int j = 0; j < rb; ++j) {
      const double* bj = b + static_cast<size_t>(j) * ca;
      double s = 0.0;
      for (int k = 0; k < ca; ++k) s += ai[k] * bj[k];
      ci[j] += s;
    }
  }
}

// C += A^T * B, A: ra x ca, B: ra x cb -> C: ca x cb
void gemm_atb_acc(double* c, const double* a, const double* b, int ra, int ca, int cb) {
  for (int k = 0; k < ra; ++k) {
    const double* ak = a + static_cast<size_t>(k) * ca;
    const double* bk = b + static_cast<size_t>(k) * cb;
    for (int i = 0; i < ca; ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c + static_cast<size_t>(i) * cb;
      for (int j = 0; j < cb; ++j) ci[j] += aki * bk[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: dimension mismatch, a is " + a.shape_str() + ", b is " +
                                b.shape_str());
  Tensor out(a.rows(), b.cols());
  gemm_acc(out.data(), a.data(), b.data(), a.rows(), a.cols(), b.cols());
  Tape* tape = joint_tape(a, b);
  if (!tape) return out;
  std::vector<int> parents;
  if (a.requires_grad()) parents.push_back(a.node());
  if (b.requires_grad()) parents.push_back(b.node());
  Tensor av = a, bv = b;
  const int node = tape->record(parents, [av, bv](const Tensor& g, Tape::Grads& grads) {
    if (av.requires_grad()) {
      Tensor da(av.rows(), av.cols());
      gemm_abt_acc(da.data(), g.data(), bv.data(), g.rows(), g.cols(), bv.rows());
      accumulate_grad(grads, av.node(), da);
    }
    if (bv.requires_grad()) {
      Tensor db(bv.rows(), bv.cols());
      gemm_atb_acc(db.data(), av.data(), g.data(), av.rows(), av.cols(), g.cols());
      accumulate_grad(grads, bv.node(), db);
    }
  });
  return attach(std::move(out), tape, node);
}

namespace {

Tensor elementwise_binary(const Tensor& a, const Tensor& b, bool is_add, const char* name) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(name) + ": shape mismatch, a is " + a.shape_str() +
                                ", b is " + b.shape_str());
  Tensor out(a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const int n = a.size();
  if (is_add)
    for (int i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  else
    for (int i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
  Tape* tape = joint_tape(a, b);
  if (!tape) return out;
  std::vector<int> parents;
  if (a.requires_grad()) parents.push_back(a.node());
  if (b.requires_grad()) parents.push_back(b.node());
  Tensor av = a, bv = b;
  const int node = tape->record(parents, [av, bv, is_add](const Tensor& g, Tape::Grads& grads) {
    if (av.requires_grad()) accumulate_grad(grads, av.node(), g);
    if (bv.requires_grad()) {
      if (is_add) {
        accumulate_grad(grads, bv.node(), g);
      } else {
        Tensor neg(g.rows(), g.cols());
        const double* pg = g.data();
        double* pn = neg.data();
        for (int i = 0; i < g.size(); ++i) pn[i] = -pg[i];
        accumulate_grad(grads, bv.node(), neg);
      }
    }
  });
  return attach(std::move(out), tape, node);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, true, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise_binary(a, b, false, "sub"); }

Tensor scale(const Tensor& a, double s) {
  Tensor out(a.rows(), a.cols());
  const double* pa = a.data();
  double* po = out.data();
  for (int i = 0; i < a.size(); ++i) po[i] = s * pa[i];
  if (!a.requires_grad()) return out;
  Tape* tape = a.tape();
  const int anode = a.node();
  const int node = tape->record({anode}, [anode, s](const Tensor& g, Tape::Grads& grads) {
    Tensor dg(g.rows(), g.cols());
    const double* pg = g.data();
    double* pd = dg.data();
    for (int i = 0; i < g.size(); ++i) pd[i] = s * pg[i];
    accumulate_grad(grads, anode, dg);
  });
  return attach(std::move(out), tape, node);
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("hadamard: shape mismatch, a is " + a.shape_str() + ", b is " +
                                b.shape_str());
  Tensor out(a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
  Tape* tape = joint_tape(a, b);
  if (!tape) return out;
  std::vector<int> parents;
  if (a.requires_grad()) parents.push_back(a.node());
  if (b.requires_grad()) parents.push_back(b.node());
  Tensor av = a, bv = b;
  const int node = tape->record(parents, [av, bv](const Tensor& g, Tape::Grads& grads) {
    const double* pg = g.data();
    if (av.requires_grad()) {
      Tensor da(av.rows(), av.cols());
      const double* pb2 = bv.data();
      double* pd = da.data();
      for (int i = 0; i < da.size(); ++i) pd[i] = pg[i] * pb2[i];
      accumulate_grad(grads, av.node(), da);
    }
    if (bv.requires_grad()) {
      Tensor db(bv.rows(), bv.cols());
      const double* pa2 = av.data();
      double* pd = db.data();
      for (int i = 0; i < db.size(); ++i) pd[i] = pg[i] * pa2[i];
      accumulate_grad(grads, bv.node(), db);
    }
  });
  return attach(std::move(out), tape, node);
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  if (!a.requires_grad()) return out;
  Tape* tape = a.tape();
  const int anode = a.node();
  const int node = tape->record({anode}, [anode](const Tensor& g, Tape::Grads& grads) {
    Tensor dg(g.cols(), g.rows());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) dg(j, i) = g(i, j);
    accumulate_grad(grads, anode, dg);
  });
  return attach(std::move(out), tape, node);
}

Tensor sum(const Tensor& a) {
  Tensor out(1, 1);
  double s = 0.0;
  const double* pa = a.data();
  for (int i = 0; i < a.size(); ++i) s += pa[i];
  out(0, 0) = s;
  if (!a.requires_grad()) return out;
  Tape* tape = a.tape();
  const int anode = a.node();
  const int r = a.rows(), c = a.cols();
  const int node = tape->record({anode}, [anode, r, c](const Tensor& g, Tape::Grads& grads) {
    accumulate_grad(grads, anode, Tensor::full(r, c, g.scalar()));
  });
  return attach(std::move(out), tape, node);
}

Tensor vstack(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("vstack: no parts");
  const int c = parts[0].cols();
  int r = 0;
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    if (p.cols() != c) throw std::invalid_argument("vstack: column mismatch");
    r += p.rows();
    if (p.requires_grad()) {
      if (tape && tape != p.tape()) throw std::invalid_argument("vstack: mixed tapes");
      tape = p.tape();
    }
  }
  Tensor out(r, c);
  int off = 0;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + static_cast<size_t>(off) * c);
    off += p.rows();
  }
  if (!tape) return out;
  std::vector<int> parents;
  for (const auto& p : parts)
    if (p.requires_grad()) parents.push_back(p.node());
  std::vector<Tensor> saved = parts;
  const int node = tape->record(parents, [saved, c](const Tensor& g, Tape::Grads& grads) {
    int off2 = 0;
    for (const auto& p : saved) {
      if (p.requires_grad()) {
        Tensor dg(p.rows(), p.cols());
        std::copy(g.data() + static_cast<size_t>(off2) * c,
                  g.data() + static_cast<size_t>(off2 + p.rows()) * c, dg.data());
        accumulate_grad(grads, p.node(), dg);
      }
      off2 += p.rows();
    }
  });
  return attach(std::move(out), tape, node);
}

Tensor unflatten_slice(const Tensor& flat, int offset, int rows, int cols) {
  if (flat.rows() != 1) throw std::invalid_argument("unflatten_slice: flat tensor must be 1 x M");
  if (offset < 0 || offset + rows * cols > flat.cols())
    throw std::invalid_argument("unflatten_slice: slice out of range");
  Tensor out(rows, cols);
  const double* pf = flat.data() + offset;
  std::copy(pf, pf + static_cast<size_t>(rows) * cols, out.data());
  if (!flat.requires_grad()) return out;
  Tape* tape = flat.tape();
  const int fnode = flat.node();
  const int fcols = flat.cols();
  const int node =
      tape->record({fnode}, [fnode, fcols, offset, rows, cols](const Tensor& g, Tape::Grads& grads) {
        Tensor df(1, fcols);
        std::copy(g.data(), g.data() + static_cast<size_t>(rows) * cols, df.data() + offset);
        accumulate_grad(grads, fnode, df);
      });
  return tape->adopt(std::move(out), node);
}

Tensor pointwise_nonlinearity(const Tensor& x, Nonlinearity kind) {
  Tensor out(x.rows(), x.cols());
  const double* px = x.data();
  double* po = out.data();
  const int n = x.size();
  if (kind == Nonlinearity::Relu)
    for (int i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  else
    for (int i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
  if (!x.requires_grad()) return out;
  Tape* tape = x.tape();
  Tensor xv = x, ov = out;
  const int node = tape->record({x.node()}, [xv, ov, kind](const Tensor& g, Tape::Grads& grads) {
    Tensor dg(g.rows(), g.cols());
    const double* pg = g.data();
    double* pd = dg.data();
    const int m = g.size();
    if (kind == Nonlinearity::Relu) {
      const double* px2 = xv.data();
      // subgradient at 0 is 0
      for (int i = 0; i < m; ++i) pd[i] = px2[i] > 0.0 ? pg[i] : 0.0;
    } else {
      const double* po2 = ov.data();
      for (int i = 0; i < m; ++i) pd[i] = pg[i] * (1.0 - po2[i] * po2[i]);
    }
    accumulate_grad(grads, xv.node(), dg);
  });
  return attach(std::move(out), tape, node);
}

Tensor masked_row_softmax(const Tensor& scores, const BoolMat* mask) {
  const int r = scores.rows(), c = scores.cols();
  if (mask && (mask->rows != r || mask->cols != c))
    throw std::invalid_argument("masked_row_softmax: mask shape " + std::to_string(mask->rows) + "x" +
                                std::to_string(mask->cols) + " does not match scores " +
                                scores.shape_str());
  Tensor out(r, c);
  for (int i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < c; ++j)
      if (!mask || mask->at(i, j)) mx = std::max(mx, scores(i, j));
    if (!std::isfinite(mx))
      throw std::invalid_argument("masked_row_softmax: row " + std::to_string(i) +
                                  " has no unmasked entries (add self-loops first)");
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      if (!mask || mask->at(i, j)) {
        const double e = std::exp(scores(i, j) - mx);
        out(i, j) = e;
        z += e;
      }
    }
    for (int j = 0; j < c; ++j)
      if (!mask || mask->at(i, j)) out(i, j) /= z;
  }
  if (!scores.requires_grad()) return out;
  Tape* tape = scores.tape();
  Tensor ov = out;
  const int snode = scores.node();
  const int node = tape->record({snode}, [ov, snode](const Tensor& g, Tape::Grads& grads) {
    // masked entries have a=0, so ds=0 there automatically
    Tensor ds(g.rows(), g.cols());
    for (int i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < g.cols(); ++j) dot += g(i, j) * ov(i, j);
      for (int j = 0; j < g.cols(); ++j) ds(i, j) = ov(i, j) * (g(i, j) - dot);
    }
    accumulate_grad(grads, snode, ds);
  });
  return attach(std::move(out), tape, node);
}

Tensor layer_norm_cols(const Tensor& x, double eps) {
  const int d = x.rows(), n = x.cols();
  if (d < 1) throw std::invalid_argument("layer_norm_cols: empty feature dim");
  Tensor out(d, n);
  std::vector<double> inv_std(n), mean(n);
  for (int j = 0; j < n; ++j) {
    double mu = 0.0;
    for (int i = 0; i < d; ++i) mu += x(i, j);
    mu /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      const double t = x(i, j) - mu;
      var += t * t;
    }
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    mean[j] = mu;
    inv_std[j] = is;
    for (int i = 0; i < d; ++i) out(i, j) = (x(i, j) - mu) * is;
  }
  if (!x.requires_grad()) return out;
  Tape* tape = x.tape();
  Tensor ov = out;
  const int xnode = x.node();
  const int node = tape->record(
      {xnode}, [ov, xnode, inv_std = std::move(inv_std), d](const Tensor& g, Tape::Grads& grads) {
        Tensor dx(g.rows(), g.cols());
        for (int j = 0; j < g.cols(); ++j) {
          double gmean = 0.0, gymean = 0.0;
          for (int i = 0; i < d; ++i) {
            gmean += g(i, j);
            gymean += g(i, j) * ov(i, j);
          }
          gmean /= d;
          gymean /= d;
          for (int i = 0; i < d; ++i)
            dx(i, j) = inv_std[j] * (g(i, j) - gmean - ov(i, j) * gymean);
        }
        accumulate_grad(grads, xnode, dx);
      });
  return attach(std::move(out), tape, node);
}

Tensor dropout(const Tensor& x, double rate, RngStream& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<double>>(x.size());
  Tensor out(x.rows(), x.cols());
  const double* px = x.data();
  double* po = out.data();
  for (int i = 0; i < x.size(); ++i) {
    const double m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    (*mask)[i] = m;
    po[i] = px[i] * m;
  }
  if (!x.requires_grad()) return out;
  Tape* tape = x.tape();
  const int xnode = x.node();
  const int node = tape->record({xnode}, [xnode, mask](const Tensor& g, Tape::Grads& grads) {
    Tensor dg(g.rows(), g.cols());
    const double* pg = g.data();
    double* pd = dg.data();
    for (int i = 0; i < g.size(); ++i) pd[i] = pg[i] * (*mask)[i];
    accumulate_grad(grads, xnode, dg);
  });
  return attach(std::move(out), tape, node);
}

Tensor permute_cols(const Tensor& x, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != x.cols())
    throw std::invalid_argument("permute_cols: perm size mismatch");
  Tensor out(x.rows(), x.cols());
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i) out(i, perm[j]) = x(i, j);
  return out;
}

double finite_diff_check(const std::function<Tensor(Tape&, Tensor)>& f, const Tensor& x0,
                         double step) {
  if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be > 0");
  Tensor analytic;
  {
    Tape tape;
    Tensor x = x0.clone();
    tape.bind(x);
    Tensor loss = f(tape, x);
    auto grads = tape.backward(loss);
    analytic = Tape::grad(grads, x);
    if (analytic.empty()) analytic = Tensor::zeros(x0.rows(), x0.cols());
  }
  double max_rel = 0.0;
  Tensor xp = x0.clone();
  for (int i = 0; i < x0.rows(); ++i) {
    for (int j = 0; j < x0.cols(); ++j) {
      const double orig = xp(i, j);
      xp(i, j) = orig + step;
      Tape tp;
      const double fp = f(tp, tp.leaf(xp.clone())).scalar();
      xp(i, j) = orig - step;
      Tape tm;
      const double fm = f(tm, tm.leaf(xp.clone())).scalar();
      xp(i, j) = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("finite_diff_check: non-finite output at entry (" +
                                 std::to_string(i) + "," + std::to_string(j) + ")");
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic(i, j);
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace gtx
