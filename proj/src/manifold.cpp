#include "gtx/manifold.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gtx/linalg.hpp"
#include "gtx/util.hpp"

namespace gtx {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::string manifold_name(ManifoldKind k) {
  switch (k) {
    case ManifoldKind::Circle: return "circle";
    case ManifoldKind::FlatTorus2d: return "flat_torus_2d";
    case ManifoldKind::Sphere2d: return "sphere_2d";
  }
  return "?";
}

ManifoldKind manifold_from_name(const std::string& s) {
  if (s == "circle") return ManifoldKind::Circle;
  if (s == "flat_torus_2d") return ManifoldKind::FlatTorus2d;
  if (s == "sphere_2d") return ManifoldKind::Sphere2d;
  throw std::invalid_argument("unknown manifold: " + s);
}

PointCloud sample_manifold(const ManifoldSpec& spec, int n, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_manifold: n must be >= 2");
  RngStream rng(substream_seed(seed, "sampling", static_cast<uint64_t>(spec.kind)));
  Tensor pts(n, spec.ambient_dim());
  switch (spec.kind) {
    case ManifoldKind::Circle:
      for (int i = 0; i < n; ++i) {
        const double th = rng.uniform(0.0, kTwoPi);
        pts(i, 0) = std::cos(th);
        pts(i, 1) = std::sin(th);
      }
      break;
    case ManifoldKind::FlatTorus2d:
      for (int i = 0; i < n; ++i) {
        const double th = rng.uniform(0.0, kTwoPi);
        const double ph = rng.uniform(0.0, kTwoPi);
        pts(i, 0) = std::cos(th);
        pts(i, 1) = std::sin(th);
        pts(i, 2) = std::cos(ph);
        pts(i, 3) = std::sin(ph);
      }
      break;
    case ManifoldKind::Sphere2d:
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
        for (int d = 0; d < 3; ++d) pts(i, d) = v[d] / norm;
      }
      break;
  }
  return PointCloud{spec, std::move(pts), seed};
}

double constraint_residual(const PointCloud& cloud) {
  double worst = 0.0;
  const Tensor& p = cloud.points;
  for (int i = 0; i < p.rows(); ++i) {
    double r = 0.0;
    switch (cloud.spec.kind) {
      case ManifoldKind::Circle:
        r = std::fabs(p(i, 0) * p(i, 0) + p(i, 1) * p(i, 1) - 1.0);
        break;
      case ManifoldKind::FlatTorus2d:
        r = std::max(std::fabs(p(i, 0) * p(i, 0) + p(i, 1) * p(i, 1) - 1.0),
                     std::fabs(p(i, 2) * p(i, 2) + p(i, 3) * p(i, 3) - 1.0));
        break;
      case ManifoldKind::Sphere2d:
        r = std::fabs(p(i, 0) * p(i, 0) + p(i, 1) * p(i, 1) + p(i, 2) * p(i, 2) - 1.0);
        break;
    }
    worst = std::max(worst, r);
  }
  return worst;
}

// ---- analytic spectra ---------------------------------------------------------

namespace {

double legendre_assoc(int l, int m, double x) {
  // P_m^m via the standard recurrence, then raise l
  double pmm = 1.0;
  const double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  double fact = 1.0;
  for (int i = 0; i < m; ++i) {
    pmm *= -fact * somx2;
    fact += 2.0;
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = (x * (2.0 * ll - 1.0) * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

double factorial_ratio(int l, int m) {
  // (l-m)! / (l+m)!
  double r = 1.0;
  for (int k = l - m + 1; k <= l + m; ++k) r /= k;
  return r;
}

// real spherical harmonic orthonormal under the uniform probability measure
// (standard real Y_lm scaled by sqrt(4*pi))
double real_sph_harm(int l, int m, double x, double y, double z) {
  const int am = std::abs(m);
  const double ct = std::clamp(z, -1.0, 1.0);
  const double norm = std::sqrt((2.0 * l + 1.0) * factorial_ratio(l, am));
  const double p = legendre_assoc(l, am, ct);
  if (m == 0) return norm * p;
  const double phi = std::atan2(y, x);
  const double s = std::sqrt(2.0) * norm * p;
  return m > 0 ? s * std::cos(am * phi) : s * std::sin(am * phi);
}

}  // namespace

SpectralBasis analytic_spectrum(const ManifoldSpec& spec, int count) {
  if (count < 1) throw std::invalid_argument("analytic_spectrum: count must be >= 1");
  SpectralBasis basis;
  basis.spec_ = spec;
  struct Entry {
    double lambda;
    std::array<int, 3> mode;
  };
  std::vector<Entry> entries;
  switch (spec.kind) {
    case ManifoldKind::Circle: {
      entries.push_back({0.0, {0, 0, 0}});
      for (int m = 1; static_cast<int>(entries.size()) < count + 2; ++m) {
        entries.push_back({static_cast<double>(m) * m, {m, 1, 0}});  // cos
        entries.push_back({static_cast<double>(m) * m, {m, 2, 0}});  // sin
      }
      break;
    }
    case ManifoldKind::FlatTorus2d: {
      entries.push_back({0.0, {0, 0, 0}});
      const int R = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))) + 2;
      for (int k1 = 0; k1 <= R; ++k1) {
        for (int k2 = -R; k2 <= R; ++k2) {
          if (k1 == 0 && k2 <= 0) continue;  // half lattice, one representative per +-k pair
          const double lam = static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
          entries.push_back({lam, {k1, k2, 1}});  // cos(k1*th + k2*ph)
          entries.push_back({lam, {k1, k2, 2}});  // sin
        }
      }
      break;
    }
    case ManifoldKind::Sphere2d: {
      int total = 0;
      for (int l = 0; total < count + 4; ++l) {
        for (int m = -l; m <= l; ++m) {
          entries.push_back({static_cast<double>(l) * (l + 1), {l, m, 0}});
          ++total;
        }
      }
      break;
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.mode < b.mode;
  });
  if (static_cast<int>(entries.size()) < count)
    throw std::runtime_error("analytic_spectrum: internal enumeration too short");
  entries.resize(count);
  for (const auto& e : entries) {
    basis.eigenvalues_.push_back(e.lambda);
    basis.modes_.push_back(e.mode);
  }
  return basis;
}

double SpectralBasis::eigenfunction(int index, const double* p) const {
  if (index < 0 || index >= count()) throw std::invalid_argument("eigenfunction: index out of range");
  const auto& m = modes_[index];
  switch (spec_.kind) {
    case ManifoldKind::Circle: {
      if (m[1] == 0) return 1.0;
      const double th = std::atan2(p[1], p[0]);
      return m[1] == 1 ? std::sqrt(2.0) * std::cos(m[0] * th) : std::sqrt(2.0) * std::sin(m[0] * th);
    }
    case ManifoldKind::FlatTorus2d: {
      if (m[2] == 0) return 1.0;
      const double th = std::atan2(p[1], p[0]);
      const double ph = std::atan2(p[3], p[2]);
      const double arg = m[0] * th + m[1] * ph;
      return m[2] == 1 ? std::sqrt(2.0) * std::cos(arg) : std::sqrt(2.0) * std::sin(arg);
    }
    case ManifoldKind::Sphere2d:
      return real_sph_harm(m[0], m[1], p[0], p[1], p[2]);
  }
  return 0.0;
}

Tensor SpectralBasis::evaluate(const Tensor& points) const {
  Tensor out(count(), points.rows());
  std::vector<double> p(points.cols());
  for (int j = 0; j < points.rows(); ++j) {
    for (int d = 0; d < points.cols(); ++d) p[d] = points(j, d);
    for (int i = 0; i < count(); ++i) out(i, j) = eigenfunction(i, p.data());
  }
  return out;
}

// ---- MNN reference -------------------------------------------------------------

double mnn_frequency_response(const FilterBank& bank, int p, int q, double lambda) {
  double resp = 0.0;
  for (int k = 0; k < bank.order(); ++k) resp += bank.taps[k](p, q) * std::exp(-k * lambda);
  return resp;
}

namespace {

// coefficients (ch_in x modes) -> (ch_out x modes) through the bank's response
Tensor filter_coeffs(const FilterBank& bank, const std::vector<double>& lambda, const Tensor& coeffs) {
  const int out_ch = bank.out_dim(), in_ch = bank.in_dim();
  if (coeffs.rows() != in_ch)
    throw std::invalid_argument("mnn filter: coefficient channels " + std::to_string(coeffs.rows()) +
                                " do not match bank input " + std::to_string(in_ch));
  Tensor out(out_ch, coeffs.cols());
  for (int i = 0; i < coeffs.cols(); ++i) {
    for (int p = 0; p < out_ch; ++p) {
      double acc = 0.0;
      for (int q = 0; q < in_ch; ++q) acc += mnn_frequency_response(bank, p, q, lambda[i]) * coeffs(q, i);
      out(p, i) = acc;
    }
  }
  return out;
}

Tensor apply_act_plain(const Tensor& x, Nonlinearity act) {
  Tensor out(x.rows(), x.cols());
  for (int i = 0; i < x.size(); ++i)
    out.data()[i] = act == Nonlinearity::Relu ? std::max(0.0, x.data()[i]) : std::tanh(x.data()[i]);
  return out;
}

}  // namespace

Tensor mnn_reference(const std::vector<FilterBank>& banks, Nonlinearity act,
                     const SpectralBasis& basis, const Tensor& coeffs, const Tensor& eval_points,
                     const Tensor& ref_cloud) {
  if (banks.empty()) throw std::invalid_argument("mnn_reference: no layers");
  if (coeffs.cols() > basis.count())
    throw std::invalid_argument("mnn_reference: " + std::to_string(coeffs.cols()) +
                                " coefficients exceed the bandlimit " + std::to_string(basis.count()));
  // pad coefficients to the full tracked band
  Tensor c(coeffs.rows(), basis.count());
  for (int i = 0; i < coeffs.rows(); ++i)
    for (int j = 0; j < coeffs.cols(); ++j) c(i, j) = coeffs(i, j);

  const Tensor phi_ref = basis.evaluate(ref_cloud);  // modes x n_ref
  const int n_ref = ref_cloud.rows();
  for (size_t l = 0; l < banks.size(); ++l) {
    Tensor filtered = filter_coeffs(banks[l], basis.eigenvalues(), c);
    if (l + 1 < banks.size()) {
      // sigma on the reference cloud, then Monte Carlo projection back to the band
      Tensor vals = apply_act_plain(matmul(filtered, phi_ref), act);
      c = scale(matmul(vals, transpose(phi_ref)), 1.0 / n_ref);
    } else {
      Tensor phi_eval = basis.evaluate(eval_points);
      return apply_act_plain(matmul(filtered, phi_eval), act);
    }
  }
  throw std::logic_error("mnn_reference: unreachable");
}

Tensor spectral_gnn_on_graph(const std::vector<FilterBank>& banks, Nonlinearity act, const Graph& g,
                             double calib_scale, const Tensor& x) {
  if (banks.empty()) throw std::invalid_argument("spectral_gnn_on_graph: no layers");
  const int n = g.n();
  std::vector<double> evals;
  Tensor evecs;
  symmetric_eigen(dense_laplacian(g), evals, evecs);
  std::vector<double> lam(n);
  for (int i = 0; i < n; ++i) lam[i] = std::max(0.0, evals[i] * calib_scale);
  // eigenvectors under the empirical measure: (1/N) sum_j u_i(j)^2 = 1
  Tensor u = evecs.clone();
  {
    const double s = std::sqrt(static_cast<double>(n));
    for (int i = 0; i < u.size(); ++i) u.data()[i] *= s;
  }
  Tensor cur = x;
  for (size_t l = 0; l < banks.size(); ++l) {
    // coefficients under the empirical measure: (1/N) X U
    Tensor coef = scale(matmul(cur, u), 1.0 / n);
    Tensor filtered = filter_coeffs(banks[l], lam, coef);
    cur = apply_act_plain(matmul(filtered, transpose(u)), act);
  }
  return cur;
}

double spectral_calibration(const std::vector<double>& graph_evals, double analytic_first_nonzero) {
  if (graph_evals.size() < 2) throw std::invalid_argument("spectral_calibration: need >= 2 eigenvalues");
  const double lam2 = graph_evals[1];
  if (lam2 <= 0.0) throw std::runtime_error("spectral_calibration: first nonzero eigenvalue is <= 0");
  return analytic_first_nonzero / lam2;
}

// ---- MT reference ----------------------------------------------------------------

Tensor mt_reference(const MtParams& params, const Tensor& f_quad, const Tensor& quad_points,
                    const Tensor& f_eval, const Tensor& eval_points, std::optional<double> radius) {
  const int d = f_quad.rows();
  const int nq = f_quad.cols();
  const int ne = f_eval.cols();
  if (quad_points.rows() != nq || eval_points.rows() != ne)
    throw std::invalid_argument("mt_reference: point/value count mismatch");
  if (params.Q.cols() != d || params.K.cols() != d || params.V.cols() != d)
    throw std::invalid_argument("mt_reference: operator dims do not match signal channels");
  for (const Tensor* t : {&f_quad, &f_eval})
    if (!t->all_finite()) throw std::invalid_argument("mt_reference: non-finite signal values");
  const bool use_radius = radius.has_value() && std::isfinite(*radius);
  const double r2 = use_radius ? (*radius) * (*radius) : 0.0;
  const int amb = quad_points.cols();

  Tensor qf = matmul(params.Q, f_eval);   // dq x ne
  Tensor kf = matmul(params.K, f_quad);   // dk x nq
  Tensor vf = matmul(params.V, f_quad);   // dv x nq
  const int dv = vf.rows();
  Tensor out(dv, ne);
  std::vector<double> scores(nq);
  std::vector<char> inside(nq);
  for (int e = 0; e < ne; ++e) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < nq; ++j) {
      bool in = true;
      if (use_radius) {
        double d2 = 0.0;
        for (int a = 0; a < amb; ++a) {
          const double t = eval_points(e, a) - quad_points(j, a);
          d2 += t * t;
        }
        in = d2 < r2;
      }
      inside[j] = in;
      if (!in) continue;
      double s = 0.0;
      for (int t = 0; t < qf.rows(); ++t) s += qf(t, e) * kf(t, j);
      scores[j] = s;
      mx = std::max(mx, s);
    }
    if (!std::isfinite(mx))
      throw std::runtime_error("mt_reference: radius " + std::to_string(*radius) +
                               " excludes all quadrature points for eval point " + std::to_string(e));
    double z = 0.0;
    for (int j = 0; j < nq; ++j) {
      if (!inside[j]) continue;
      const double w = std::exp(scores[j] - mx);
      scores[j] = w;
      z += w;
    }
    for (int j = 0; j < nq; ++j) {
      if (!inside[j]) continue;
      const double a = scores[j] / z;
      for (int t = 0; t < dv; ++t) out(t, e) += a * vf(t, j);
    }
  }
  return out;
}

double induced_signal_distance(const Tensor& values_a, const Tensor& cloud_a,
                               const Tensor& values_b, const Tensor& cloud_b,
                               const Tensor& reference_quadrature) {
  if (cloud_a.rows() < 1 || cloud_b.rows() < 1)
    throw std::invalid_argument("induced_signal_distance: empty cloud");
  if (values_a.cols() != cloud_a.rows() || values_b.cols() != cloud_b.rows())
    throw std::invalid_argument("induced_signal_distance: value/cloud mismatch");
  if (values_a.rows() != values_b.rows())
    throw std::invalid_argument("induced_signal_distance: channel mismatch");
  const int amb = reference_quadrature.cols();
  auto nearest = [&](const Tensor& cloud, int q) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cloud.rows(); ++i) {
      double d2 = 0.0;
      for (int a = 0; a < amb; ++a) {
        const double t = reference_quadrature(q, a) - cloud(i, a);
        d2 += t * t;
      }
      if (d2 < best_d) {
        best_d = d2;
        best = i;
      }
    }
    return best;
  };
  const int ch = values_a.rows();
  double acc = 0.0;
  for (int q = 0; q < reference_quadrature.rows(); ++q) {
    const int ia = nearest(cloud_a, q);
    const int ib = nearest(cloud_b, q);
    double d2 = 0.0;
    for (int c = 0; c < ch; ++c) {
      const double t = values_a(c, ia) - values_b(c, ib);
      d2 += t * t;
    }
    acc += std::sqrt(d2);
  }
  return acc / reference_quadrature.rows();
}

// ---- convergence experiments -----------------------------------------------------

std::string task_name(ConvergenceTask t) {
  switch (t) {
    case ConvergenceTask::GtVsMt: return "gt_vs_mt";
    case ConvergenceTask::SparseGtVsRestrictedMt: return "sparse_gt_vs_restricted_mt";
    case ConvergenceTask::GnnVsMnn: return "gnn_vs_mnn";
    case ConvergenceTask::Spectral: return "spectral";
  }
  return "?";
}

ConvergenceTask task_from_name(const std::string& s) {
  if (s == "gt_vs_mt") return ConvergenceTask::GtVsMt;
  if (s == "sparse_gt_vs_restricted_mt") return ConvergenceTask::SparseGtVsRestrictedMt;
  if (s == "gnn_vs_mnn") return ConvergenceTask::GnnVsMnn;
  if (s == "spectral") return ConvergenceTask::Spectral;
  throw std::invalid_argument("unknown convergence task: " + s);
}

FrozenSignal frozen_bandlimited_signal(const ManifoldSpec& spec, int channels, int modes,
                                       uint64_t model_seed) {
  FrozenSignal sig;
  sig.basis = analytic_spectrum(spec, modes);
  RngStream rng(substream_seed(model_seed, "signal", static_cast<uint64_t>(spec.kind)));
  sig.coeffs = Tensor::randn(channels, modes, rng, 0.5);
  // rescale to measured Lipschitz constant <= 1 (ambient Euclidean metric)
  PointCloud probe = sample_manifold(spec, 4000, substream_seed(model_seed, "probe"));
  Tensor vals = matmul(sig.coeffs, sig.basis.evaluate(probe.points));
  RngStream pair_rng(substream_seed(model_seed, "pairs"));
  double worst = 0.0;
  for (int t = 0; t < 20000; ++t) {
    const int i = pair_rng.below_int(probe.n());
    const int j = pair_rng.below_int(probe.n());
    if (i == j) continue;
    double dv = 0.0, dx = 0.0;
    for (int c = 0; c < channels; ++c) {
      const double u = vals(c, i) - vals(c, j);
      dv += u * u;
    }
    for (int a = 0; a < probe.points.cols(); ++a) {
      const double u = probe.points(i, a) - probe.points(j, a);
      dx += u * u;
    }
    if (dx > 1e-24) worst = std::max(worst, std::sqrt(dv / dx));
  }
  if (worst > 0.0) sig.coeffs = scale(sig.coeffs, 1.0 / worst);
  return sig;
}

MtParams frozen_mt_params(int dim, uint64_t model_seed) {
  RngStream rng(substream_seed(model_seed, "mt_ops"));
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  MtParams p;
  p.Q = Tensor::randn(dim, dim, rng, s);
  p.K = Tensor::randn(dim, dim, rng, s);
  p.V = Tensor::randn(dim, dim, rng, s);
  return p;
}

Tensor eval_signal(const FrozenSignal& sig, const Tensor& points) {
  return matmul(sig.coeffs, sig.basis.evaluate(points));
}

namespace {

Tensor prefix_points(const PointCloud& cloud, int n) {
  Tensor out(n, cloud.points.cols());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < cloud.points.cols(); ++j) out(i, j) = cloud.points(i, j);
  return out;
}

double mean_column_l2(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (int j = 0; j < a.cols(); ++j) {
    double d2 = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
      const double t = a(i, j) - b(i, j);
      d2 += t * t;
    }
    acc += std::sqrt(d2);
  }
  return acc / a.cols();
}

KHopMask radius_mask(const Tensor& points, double radius) {
  const int n = points.rows();
  const double r2 = radius * radius;
  auto rows = std::make_shared<std::vector<std::vector<int>>>(n);
  for (int i = 0; i < n; ++i) {
    auto& row = (*rows)[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) {
        row.push_back(j);
        continue;
      }
      double d2 = 0.0;
      for (int a = 0; a < points.cols(); ++a) {
        const double t = points(i, a) - points(j, a);
        d2 += t * t;
      }
      if (d2 < r2) row.push_back(j);
    }
  }
  return KHopMask{n, std::move(rows)};
}

AttentionParams single_head_params(const MtParams& mt) {
  AttentionParams p;
  p.heads.push_back({mt.Q.clone(), mt.K.clone(), mt.V.clone()});
  p.out_proj = Tensor::identity(mt.V.rows());
  p.ff1 = Tensor::zeros(1, 1);  // unused by the bare attention call
  p.ff2 = Tensor::zeros(1, 1);
  return p;
}

std::vector<FilterBank> frozen_mnn_banks(int channels, int layers, int order, uint64_t model_seed) {
  RngStream rng(substream_seed(model_seed, "mnn_taps"));
  std::vector<FilterBank> banks;
  int in_ch = 1;
  for (int l = 0; l < layers; ++l) {
    FilterBank b;
    for (int k = 0; k < order; ++k) b.taps.push_back(Tensor::randn(channels, in_ch, rng, 0.4));
    banks.push_back(std::move(b));
    in_ch = channels;
  }
  return banks;
}

}  // namespace

ConvergenceResult run_convergence(const ConvergenceConfig& cfg, int threads) {
  if (cfg.n_grid.empty() || cfg.seeds < 1) throw std::invalid_argument("run_convergence: empty grid");
  for (size_t i = 1; i < cfg.n_grid.size(); ++i)
    if (cfg.n_grid[i] <= cfg.n_grid[i - 1])
      throw std::invalid_argument("run_convergence: n_grid must be ascending");
  const int max_n = cfg.n_grid.back();
  const std::string tname = task_name(cfg.task);

  // shared frozen objects
  FrozenSignal sig;
  MtParams mt;
  Tensor quad_pts, f_quad;
  std::vector<FilterBank> banks;
  Tensor mnn_coeffs;
  Tensor ref_cloud;
  SpectralBasis band_basis;
  std::vector<double> analytic;

  if (cfg.task == ConvergenceTask::GtVsMt || cfg.task == ConvergenceTask::SparseGtVsRestrictedMt) {
    sig = frozen_bandlimited_signal(cfg.spec, cfg.feature_dim, cfg.signal_modes, cfg.model_seed);
    mt = frozen_mt_params(cfg.feature_dim, cfg.model_seed);
    PointCloud quad = sample_manifold(cfg.spec, cfg.quadrature, substream_seed(cfg.model_seed, "quad"));
    quad_pts = quad.points;
    f_quad = eval_signal(sig, quad_pts);
  } else if (cfg.task == ConvergenceTask::GnnVsMnn) {
    band_basis = analytic_spectrum(cfg.spec, cfg.band);
    banks = frozen_mnn_banks(cfg.mnn_channels, cfg.mnn_layers, cfg.mnn_order, cfg.model_seed);
    RngStream rng(substream_seed(cfg.model_seed, "mnn_signal"));
    mnn_coeffs = Tensor(1, cfg.band);
    for (int i = 0; i < std::min(cfg.signal_modes, cfg.band); ++i) mnn_coeffs(0, i) = 0.7 * rng.normal();
    ref_cloud = sample_manifold(cfg.spec, cfg.ref_cloud, substream_seed(cfg.model_seed, "refcloud")).points;
  } else {
    analytic = analytic_spectrum(cfg.spec, cfg.spectral_count + 2).eigenvalues();
  }

  const int cells = cfg.seeds;
  std::vector<std::vector<double>> errors(cfg.seeds, std::vector<double>(cfg.n_grid.size(), 0.0));
  parallel_for(cells, threads, [&](int s) {
    PointCloud full = sample_manifold(cfg.spec, max_n, substream_seed(cfg.root_seed, "cloud", s));
    for (size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
      const int n = cfg.n_grid[ni];
      Tensor pts = prefix_points(full, n);
      switch (cfg.task) {
        case ConvergenceTask::GtVsMt: {
          Tensor fx = eval_signal(sig, pts);
          AttentionParams ap = single_head_params(mt);
          Tensor gt = dense_attention(ap, fx, /*scaled=*/false);
          Tensor ref = mt_reference(mt, f_quad, quad_pts, fx, pts);
          errors[s][ni] = mean_column_l2(gt, ref);
          break;
        }
        case ConvergenceTask::SparseGtVsRestrictedMt: {
          Tensor fx = eval_signal(sig, pts);
          AttentionParams ap = single_head_params(mt);
          KHopMask mask = radius_mask(pts, cfg.radius);
          Tensor gt = sparse_attention(ap, fx, mask, /*scaled=*/false);
          Tensor ref = mt_reference(mt, f_quad, quad_pts, fx, pts, cfg.radius);
          errors[s][ni] = mean_column_l2(gt, ref);
          break;
        }
        case ConvergenceTask::GnnVsMnn: {
          const double eps = std::pow(std::log(static_cast<double>(n)) / n, cfg.eps_exponent);
          Graph g = Graph::kernel_graph(pts, eps);
          auto evals = symmetric_eigenvalues(dense_laplacian(g));
          const double calib = spectral_calibration(evals, band_basis.eigenvalues()[1]);
          Tensor x = matmul(mnn_coeffs, band_basis.evaluate(pts));
          Tensor gnn = spectral_gnn_on_graph(banks, Nonlinearity::Relu, g, calib, x);
          Tensor ref = mnn_reference(banks, Nonlinearity::Relu, band_basis, mnn_coeffs, pts, ref_cloud);
          errors[s][ni] = mean_column_l2(gnn, ref);
          break;
        }
        case ConvergenceTask::Spectral: {
          const double eps = std::pow(std::log(static_cast<double>(n)) / n, cfg.eps_exponent);
          Graph g = Graph::kernel_graph(pts, eps);
          auto evals = symmetric_eigenvalues(dense_laplacian(g));
          const double calib = spectral_calibration(evals, analytic[1]);
          double acc = 0.0;
          for (int i = 1; i <= cfg.spectral_count; ++i)
            acc += std::fabs(calib * evals[i] - analytic[i]) / analytic[i];
          errors[s][ni] = acc / cfg.spectral_count;
          break;
        }
      }
    }
  });

  ConvergenceResult result;
  for (size_t ni = 0; ni < cfg.n_grid.size(); ++ni)
    for (int s = 0; s < cfg.seeds; ++s)
      result.rows.push_back({tname, cfg.n_grid[ni], s, errors[s][ni]});

  std::vector<double> log_nn, log_n, log_med;
  for (size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    std::vector<double> col(cfg.seeds);
    for (int s = 0; s < cfg.seeds; ++s) col[s] = errors[s][ni];
    const double med = median(col);
    const double n = cfg.n_grid[ni];
    log_nn.push_back(std::log(std::log(n) / n));
    log_n.push_back(std::log(n));
    log_med.push_back(std::log(std::max(med, 1e-300)));
    result.summary.push_back({tname, cfg.n_grid[ni], med, interquartile_range(col), 0.0});
  }
  const double slope_nn = fit_slope(log_nn, log_med);
  result.slope_vs_log_n = fit_slope(log_n, log_med);
  for (auto& s : result.summary) s.fit_slope = slope_nn;
  return result;
}

}  // namespace gtx
