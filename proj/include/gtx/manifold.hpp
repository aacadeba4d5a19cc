#pragma once

#include <functional>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gtx/attention.hpp"
#include "gtx/graph.hpp"
#include "gtx/pe.hpp"
#include "gtx/tensor.hpp"

namespace gtx {

enum class ManifoldKind { Circle, FlatTorus2d, Sphere2d };

struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Circle;
  int intrinsic_dim() const { return kind == ManifoldKind::Circle ? 1 : 2; }
  int ambient_dim() const {
    switch (kind) {
      case ManifoldKind::Circle: return 2;
      case ManifoldKind::FlatTorus2d: return 4;  // S^1 x S^1 in R^4
      case ManifoldKind::Sphere2d: return 3;
    }
    return 0;
  }
};

std::string manifold_name(ManifoldKind k);
ManifoldKind manifold_from_name(const std::string& s);

struct PointCloud {
  ManifoldSpec spec;
  Tensor points;  // n x ambient_dim
  uint64_t seed = 0;
  int n() const { return points.rows(); }
};

// Uniform i.i.d. samples; deterministic per seed with the prefix property:
// the first n points of a seed's cloud are shared by every larger cloud of
// the same seed.
PointCloud sample_manifold(const ManifoldSpec& spec, int n, uint64_t seed);

// max over points of the manifold-constraint residual (tests)
double constraint_residual(const PointCloud& cloud);

// Analytic Laplace-Beltrami eigenpairs, eigenfunctions orthonormal under the
// uniform probability measure.
class SpectralBasis {
 public:
  SpectralBasis() = default;
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  int count() const { return static_cast<int>(eigenvalues_.size()); }
  const ManifoldSpec& spec() const { return spec_; }
  double eigenfunction(int index, const double* point) const;
  // count x n matrix of eigenfunction values at the cloud points
  Tensor evaluate(const Tensor& points) const;

 private:
  friend SpectralBasis analytic_spectrum(const ManifoldSpec&, int);
  ManifoldSpec spec_;
  std::vector<double> eigenvalues_;
  // per-basis-function integer descriptor (mode indices), meaning depends on kind
  std::vector<std::array<int, 3>> modes_;
};

SpectralBasis analytic_spectrum(const ManifoldSpec& spec, int count);

// h(lambda) = sum_k taps[k](p,q) * exp(-k*lambda)
double mnn_frequency_response(const FilterBank& bank, int p, int q, double lambda);

// Spectral MNN reference: coefficients (channels x basis count) filtered per
// layer by the frequency response; the nonlinearity is applied pointwise on a
// dense reference cloud and projected back to the bandlimited space by Monte
// Carlo quadrature. Returns values at eval_points (channels x n_eval).
Tensor mnn_reference(const std::vector<FilterBank>& banks, Nonlinearity act,
                     const SpectralBasis& basis, const Tensor& coeffs, const Tensor& eval_points,
                     const Tensor& ref_cloud);

// Discrete counterpart used by the convergence experiments: the same
// frequency response applied through the eigendecomposition of the calibrated
// kernel-graph Laplacian (eigenvectors normalized under the empirical
// measure). x is channels x N sampled values.
Tensor spectral_gnn_on_graph(const std::vector<FilterBank>& banks, Nonlinearity act, const Graph& g,
                             double calib_scale, const Tensor& x);

// single scalar fitted to the first nonzero analytic eigenvalue
double spectral_calibration(const std::vector<double>& graph_evals, double analytic_first_nonzero);

struct MtParams {
  Tensor Q, K, V;  // d x d, single head (the limit object)
};

// Monte-Carlo approximation of the integral attention ratio at each eval
// point; unscaled scores. With `radius` set, contributions outside the
// Euclidean ball B_r(x) are excluded (an infinite radius is the dense case).
Tensor mt_reference(const MtParams& params, const Tensor& f_quad, const Tensor& quad_points,
                    const Tensor& f_eval, const Tensor& eval_points,
                    std::optional<double> radius = std::nullopt);

// L^{1,2} Monte-Carlo distance between two graph signals interpolated
// piecewise-constantly (nearest-neighbor Voronoi cells) over a reference
// quadrature cloud.
double induced_signal_distance(const Tensor& values_a, const Tensor& cloud_a,
                               const Tensor& values_b, const Tensor& cloud_b,
                               const Tensor& reference_quadrature);

// ---- convergence experiments ----------------------------------------------

enum class ConvergenceTask { GtVsMt, SparseGtVsRestrictedMt, GnnVsMnn, Spectral };

std::string task_name(ConvergenceTask t);
ConvergenceTask task_from_name(const std::string& s);

struct ConvergenceConfig {
  ConvergenceTask task = ConvergenceTask::GtVsMt;
  ManifoldSpec spec;
  std::vector<int> n_grid = {128, 256, 512, 1024, 2048};
  int seeds = 8;
  uint64_t root_seed = 0;
  uint64_t model_seed = 11;
  int quadrature = 16384;
  int ref_cloud = 50000;   // MNN band-projection cloud
  int band = 33;           // analytic modes tracked by the MNN reference
  double radius = 0.8;     // restricted attention ball
  int feature_dim = 4;     // GT/MT feature channels
  int signal_modes = 5;    // low-order bandlimited input
  int mnn_channels = 3;
  int mnn_layers = 2;
  int mnn_order = 3;
  // kernel bandwidth for these experiments: eps = (log N / N)^eps_exponent
  double eps_exponent = 2.0 / 3.0;
  int spectral_count = 3;  // compare lambda_2..lambda_{1+count}
};

struct CurveRow {
  std::string task;
  int n = 0;
  int seed = 0;
  double error = 0.0;
};

struct CurveSummary {
  std::string task;
  int n = 0;
  double median_error = 0.0;
  double iqr = 0.0;
  double fit_slope = 0.0;  // log(median) vs log(log N / N)
};

struct ConvergenceResult {
  std::vector<CurveRow> rows;
  std::vector<CurveSummary> summary;
  double slope_vs_log_n = 0.0;  // log(median) vs log N (negative = decays)
};

ConvergenceResult run_convergence(const ConvergenceConfig& cfg, int threads = 1);

// Frozen experiment inputs (exposed for tests): a bandlimited signal rescaled
// to measured Lipschitz constant <= 1, and the frozen attention operators.
struct FrozenSignal {
  SpectralBasis basis;
  Tensor coeffs;  // channels x modes
};
FrozenSignal frozen_bandlimited_signal(const ManifoldSpec& spec, int channels, int modes,
                                       uint64_t model_seed);
MtParams frozen_mt_params(int dim, uint64_t model_seed);
Tensor eval_signal(const FrozenSignal& sig, const Tensor& points);  // channels x n

}  // namespace gtx
