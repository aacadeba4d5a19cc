#include <doctest.h>

#include <cmath>

#include "gtx/linalg.hpp"
#include "gtx/manifold.hpp"

using namespace gtx;

TEST_CASE("manifold samplers") {
  SUBCASE("circle points satisfy the constraint") {
    PointCloud c = sample_manifold({ManifoldKind::Circle}, 4, 7);
    CHECK(constraint_residual(c) <= 1e-12);
  }
  SUBCASE("sphere sample mean is near the origin") {
    PointCloud c = sample_manifold({ManifoldKind::Sphere2d}, 1000, 7);
    double mean[3] = {0, 0, 0};
    for (int i = 0; i < 1000; ++i)
      for (int d = 0; d < 3; ++d) mean[d] += c.points(i, d);
    double norm = 0.0;
    for (int d = 0; d < 3; ++d) norm += (mean[d] / 1000) * (mean[d] / 1000);
    CHECK(std::sqrt(norm) < 0.1);
  }
  SUBCASE("identical seeds give bit-identical clouds with the prefix property") {
    PointCloud a = sample_manifold({ManifoldKind::FlatTorus2d}, 64, 5);
    PointCloud b = sample_manifold({ManifoldKind::FlatTorus2d}, 64, 5);
    PointCloud big = sample_manifold({ManifoldKind::FlatTorus2d}, 128, 5);
    for (int i = 0; i < a.points.size(); ++i) {
      CHECK(a.points.data()[i] == b.points.data()[i]);
      CHECK(a.points.data()[i] == big.points.data()[i]);
    }
  }
}

TEST_CASE("analytic spectra") {
  SUBCASE("circle eigenvalues") {
    SpectralBasis b = analytic_spectrum({ManifoldKind::Circle}, 5);
    const double expected[5] = {0, 1, 1, 4, 4};
    for (int i = 0; i < 5; ++i) CHECK(b.eigenvalues()[i] == expected[i]);
  }
  SUBCASE("sphere eigenvalues with multiplicity") {
    SpectralBasis b = analytic_spectrum({ManifoldKind::Sphere2d}, 9);
    const double expected[9] = {0, 2, 2, 2, 6, 6, 6, 6, 6};
    for (int i = 0; i < 9; ++i) CHECK(b.eigenvalues()[i] == expected[i]);
  }
  SUBCASE("torus eigenvalues") {
    SpectralBasis b = analytic_spectrum({ManifoldKind::FlatTorus2d}, 5);
    // lattice modes (0,1),(1,0) each contribute cos and sin at lambda 1
    const double expected[5] = {0, 1, 1, 1, 1};
    for (int i = 0; i < 5; ++i) CHECK(b.eigenvalues()[i] == expected[i]);
  }
  SUBCASE("eigenfunctions are orthonormal under Monte Carlo to 2%") {
    for (auto kind : {ManifoldKind::Circle, ManifoldKind::Sphere2d}) {
      SpectralBasis b = analytic_spectrum({kind}, 6);
      PointCloud mc = sample_manifold({kind}, 200000, 3);
      Tensor phi = b.evaluate(mc.points);  // 6 x n
      for (int i = 0; i < 6; ++i) {
        for (int j = i; j < 6; ++j) {
          double acc = 0.0;
          for (int s = 0; s < mc.n(); ++s) acc += phi(i, s) * phi(j, s);
          acc /= mc.n();
          CHECK(std::fabs(acc - (i == j ? 1.0 : 0.0)) < 0.02);
        }
      }
    }
  }
}

TEST_CASE("mnn reference") {
  const ManifoldSpec circle{ManifoldKind::Circle};
  SpectralBasis basis = analytic_spectrum(circle, 9);
  PointCloud ref = sample_manifold(circle, 20000, 11);
  PointCloud eval = sample_manifold(circle, 40, 13);

  SUBCASE("an h0-only filter has a flat frequency response") {
    FilterBank bank;
    bank.taps.push_back(Tensor::identity(1));
    bank.taps.push_back(Tensor::zeros(1, 1));
    CHECK(mnn_frequency_response(bank, 0, 0, 0.0) == 1.0);
    CHECK(mnn_frequency_response(bank, 0, 0, 7.3) == 1.0);
  }
  SUBCASE("a single eigenfunction is scaled by the response") {
    RngStream rng(71);
    FilterBank bank;
    for (int k = 0; k < 3; ++k) bank.taps.push_back(Tensor::randn(1, 1, rng, 0.4));
    Tensor coeffs = Tensor::zeros(1, 2);
    coeffs(0, 1) = 1.0;  // phi_1 (the first cos mode, lambda = 1)
    Tensor out = mnn_reference({bank}, Nonlinearity::Relu, basis, coeffs, eval.points, ref.points);
    const double h = mnn_frequency_response(bank, 0, 0, 1.0);
    for (int j = 0; j < eval.n(); ++j) {
      double p[2] = {eval.points(j, 0), eval.points(j, 1)};
      const double expected = std::max(0.0, h * basis.eigenfunction(1, p));
      CHECK(out(0, j) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
  SUBCASE("two-layer network matches a brute-force dense quadrature oracle") {
    RngStream rng(72);
    std::vector<FilterBank> banks(2);
    for (int k = 0; k < 3; ++k) banks[0].taps.push_back(Tensor::randn(2, 1, rng, 0.4));
    for (int k = 0; k < 3; ++k) banks[1].taps.push_back(Tensor::randn(2, 2, rng, 0.4));
    Tensor coeffs = Tensor::randn(1, 5, rng, 0.5);
    PointCloud dense_ref = sample_manifold(circle, 50000, 14);
    Tensor out = mnn_reference(banks, Nonlinearity::Relu, basis, coeffs, eval.points,
                               dense_ref.points);

    // oracle: carry VALUES on the dense cloud; filter via quadrature
    // projection each layer; evaluate the final layer at eval points
    Tensor phi_ref = basis.evaluate(dense_ref.points);
    Tensor phi_eval = basis.evaluate(eval.points);
    Tensor padded = Tensor::zeros(1, 9);
    for (int i = 0; i < 5; ++i) padded(0, i) = coeffs(0, i);
    Tensor vals = matmul(padded, phi_ref);  // values on the dense cloud
    Tensor out_oracle;
    for (int layer = 0; layer < 2; ++layer) {
      Tensor c = scale(matmul(vals, transpose(phi_ref)), 1.0 / dense_ref.n());
      Tensor fc(banks[layer].out_dim(), 9);
      for (int i = 0; i < 9; ++i)
        for (int p = 0; p < banks[layer].out_dim(); ++p) {
          double acc = 0.0;
          for (int q = 0; q < banks[layer].in_dim(); ++q)
            acc += mnn_frequency_response(banks[layer], p, q, basis.eigenvalues()[i]) * c(q, i);
          fc(p, i) = acc;
        }
      if (layer == 0) {
        vals = pointwise_nonlinearity(matmul(fc, phi_ref), Nonlinearity::Relu);
      } else {
        out_oracle = pointwise_nonlinearity(matmul(fc, phi_eval), Nonlinearity::Relu);
      }
    }
    double worst = 0.0;
    for (int i = 0; i < out.size(); ++i)
      worst = std::max(worst, std::fabs(out.data()[i] - out_oracle.data()[i]));
    CHECK(worst < 1e-3);
  }
  SUBCASE("coefficients beyond the bandlimit are rejected") {
    FilterBank bank;
    bank.taps.push_back(Tensor::identity(1));
    Tensor coeffs = Tensor::zeros(1, 99);
    CHECK_THROWS_WITH_AS(
        mnn_reference({bank}, Nonlinearity::Relu, basis, coeffs, eval.points, ref.points),
        doctest::Contains("bandlimit"), std::invalid_argument);
  }
}

TEST_CASE("mt reference") {
  const ManifoldSpec circle{ManifoldKind::Circle};
  FrozenSignal sig = frozen_bandlimited_signal(circle, 3, 5, 2);
  MtParams mt = frozen_mt_params(3, 2);
  PointCloud quad = sample_manifold(circle, 2048, 21);
  PointCloud eval = sample_manifold(circle, 24, 22);
  Tensor fq = eval_signal(sig, quad.points);
  Tensor fe = eval_signal(sig, eval.points);

  SUBCASE("constant signal collapses to V times the constant") {
    Tensor cf = Tensor::full(3, quad.n(), 0.7);
    Tensor ce = Tensor::full(3, eval.n(), 0.7);
    Tensor out = mt_reference(mt, cf, quad.points, ce, eval.points);
    Tensor expected = matmul(mt.V, Tensor::full(3, 1, 0.7));
    for (int j = 0; j < eval.n(); ++j)
      for (int i = 0; i < 3; ++i) CHECK(out(i, j) == doctest::Approx(expected(i, 0)).epsilon(1e-12));
  }
  SUBCASE("zero query weights give the plain average of V f") {
    MtParams zero = mt;
    zero.Q = Tensor::zeros(3, 3);
    Tensor out = mt_reference(zero, fq, quad.points, fe, eval.points);
    Tensor vf = matmul(mt.V, fq);
    for (int i = 0; i < 3; ++i) {
      double mean = 0.0;
      for (int j = 0; j < quad.n(); ++j) mean += vf(i, j);
      mean /= quad.n();
      for (int j = 0; j < eval.n(); ++j) CHECK(out(i, j) == doctest::Approx(mean).epsilon(1e-10));
    }
  }
  SUBCASE("an infinite radius is exactly the dense case") {
    Tensor a = mt_reference(mt, fq, quad.points, fe, eval.points);
    Tensor b = mt_reference(mt, fq, quad.points, fe, eval.points,
                            std::numeric_limits<double>::infinity());
    for (int i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
  }
  SUBCASE("an over-tight radius reports the offending eval point") {
    CHECK_THROWS_WITH_AS(mt_reference(mt, fq, quad.points, fe, eval.points, 1e-9),
                         doctest::Contains("eval point"), std::runtime_error);
  }
  SUBCASE("quadrature refinement is subdominant to the GT-MT gap at N=512") {
    PointCloud nodes = sample_manifold(circle, 512, 23);
    Tensor fx = eval_signal(sig, nodes.points);
    PointCloud quad_small = sample_manifold(circle, 4096, 24);
    PointCloud quad_large = sample_manifold(circle, 16384, 24);
    Tensor small = mt_reference(mt, eval_signal(sig, quad_small.points), quad_small.points, fx,
                                nodes.points);
    Tensor large = mt_reference(mt, eval_signal(sig, quad_large.points), quad_large.points, fx,
                                nodes.points);
    AttentionParams ap;
    ap.heads.push_back({mt.Q.clone(), mt.K.clone(), mt.V.clone()});
    ap.out_proj = Tensor::identity(3);
    ap.ff1 = Tensor::zeros(1, 1);
    ap.ff2 = Tensor::zeros(1, 1);
    Tensor gt = dense_attention(ap, fx, /*scaled=*/false);
    auto mean_l2 = [](const Tensor& a, const Tensor& b) {
      double acc = 0.0;
      for (int j = 0; j < a.cols(); ++j) {
        double d2 = 0.0;
        for (int i = 0; i < a.rows(); ++i) d2 += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
        acc += std::sqrt(d2);
      }
      return acc / a.cols();
    };
    const double refinement = mean_l2(small, large);
    const double gap = mean_l2(gt, large);
    CHECK(refinement < gap);
  }
}

TEST_CASE("induced signal distance") {
  const ManifoldSpec circle{ManifoldKind::Circle};
  PointCloud a = sample_manifold(circle, 60, 31);
  PointCloud quad = sample_manifold(circle, 4000, 32);
  RngStream rng(33);
  Tensor va = Tensor::randn(2, 60, rng);
  SUBCASE("identical inputs have distance zero") {
    CHECK(induced_signal_distance(va, a.points, va, a.points, quad.points) == 0.0);
  }
  SUBCASE("a constant shift has distance equal to its norm") {
    Tensor vb = va.clone();
    for (int j = 0; j < 60; ++j) {
      vb(0, j) += 3.0;
      vb(1, j) -= 4.0;
    }
    CHECK(induced_signal_distance(va, a.points, vb, a.points, quad.points) ==
          doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("sampling a smooth function is bounded by lipschitz times cell radius") {
    // f(theta) = (cos theta, sin theta): 1-Lipschitz in the ambient metric
    PointCloud b = sample_manifold(circle, 200, 34);
    auto values_of = [](const PointCloud& c) {
      Tensor v(2, c.n());
      for (int j = 0; j < c.n(); ++j) {
        v(0, j) = c.points(j, 0);
        v(1, j) = c.points(j, 1);
      }
      return v;
    };
    Tensor vA = values_of(a), vB = values_of(b);
    // max Voronoi radius: distance from each quadrature point to its nearest
    // cloud point, maximized over both clouds
    auto max_radius = [&](const PointCloud& c) {
      double worst = 0.0;
      for (int q = 0; q < quad.n(); ++q) {
        double best = 1e300;
        for (int i = 0; i < c.n(); ++i) {
          double d2 = 0.0;
          for (int d = 0; d < 2; ++d) {
            const double t = quad.points(q, d) - c.points(i, d);
            d2 += t * t;
          }
          best = std::min(best, d2);
        }
        worst = std::max(worst, std::sqrt(best));
      }
      return worst;
    };
    const double dist = induced_signal_distance(vA, a.points, vB, b.points, quad.points);
    CHECK(dist <= 1.0 * (max_radius(a) + max_radius(b)));
  }
}

TEST_CASE("convergence curves") {
  SUBCASE("a zero value operator gives zero error everywhere") {
    ConvergenceConfig cc;
    cc.task = ConvergenceTask::GtVsMt;
    cc.n_grid = {32, 64};
    cc.seeds = 2;
    cc.quadrature = 256;
    cc.model_seed = 17;
    // zero V: both outputs are identically zero
    // (frozen params are seeded; instead verify through the public run by
    // checking the rows are finite and the schema holds, then the zero-V
    // property directly on the reference)
    auto result = run_convergence(cc, 1);
    CHECK(result.rows.size() == 4);
    for (const auto& r : result.rows) {
      CHECK(std::isfinite(r.error));
      CHECK(r.task == "gt_vs_mt");
    }
    MtParams zero = frozen_mt_params(3, 2);
    zero.V = Tensor::zeros(3, 3);
    const ManifoldSpec circle{ManifoldKind::Circle};
    FrozenSignal sig = frozen_bandlimited_signal(circle, 3, 5, 2);
    PointCloud quad = sample_manifold(circle, 512, 1);
    PointCloud nodes = sample_manifold(circle, 32, 2);
    Tensor ref = mt_reference(zero, eval_signal(sig, quad.points), quad.points,
                              eval_signal(sig, nodes.points), nodes.points);
    AttentionParams ap;
    ap.heads.push_back({zero.Q.clone(), zero.K.clone(), zero.V.clone()});
    ap.out_proj = Tensor::identity(3);
    ap.ff1 = Tensor::zeros(1, 1);
    ap.ff2 = Tensor::zeros(1, 1);
    Tensor gt = dense_attention(ap, eval_signal(sig, nodes.points), false);
    for (int i = 0; i < ref.size(); ++i) {
      CHECK(ref.data()[i] == 0.0);
      CHECK(gt.data()[i] == 0.0);
    }
  }
  SUBCASE("kernel-graph calibration example at N=512") {
    // default bandwidth rule, first nonzero analytic eigenvalue within 15%
    // after calibration (the degenerate partner carries the split error)
    const ManifoldSpec circle{ManifoldKind::Circle};
    PointCloud c = sample_manifold(circle, 512, 40);
    Graph g = Graph::kernel_graph(c.points, Graph::default_bandwidth(512, 1));
    auto evals = symmetric_eigenvalues(dense_laplacian(g));
    const double s = spectral_calibration(evals, 1.0);
    CHECK(s * evals[1] == doctest::Approx(1.0));  // fitted exactly
    CHECK(std::fabs(s * evals[2] - 1.0) < 0.15);
  }
  SUBCASE("mnn local lipschitz constant is stable across pair samples") {
    const ManifoldSpec circle{ManifoldKind::Circle};
    SpectralBasis basis = analytic_spectrum(circle, 9);
    RngStream rng(41);
    std::vector<FilterBank> banks(2);
    for (int k = 0; k < 3; ++k) banks[0].taps.push_back(Tensor::randn(2, 1, rng, 0.4));
    for (int k = 0; k < 3; ++k) banks[1].taps.push_back(Tensor::randn(2, 2, rng, 0.4));
    Tensor coeffs = Tensor::randn(1, 5, rng, 0.5);
    PointCloud ref = sample_manifold(circle, 20000, 42);
    // nearby pairs: points and small angular offsets
    auto estimate = [&](uint64_t seed) {
      RngStream prng(seed);
      double worst = 0.0;
      Tensor pts(40, 2);
      for (int i = 0; i < 20; ++i) {
        const double th = prng.uniform(0.0, 6.283185307179586);
        const double dth = 0.02 + 0.08 * prng.uniform();
        pts(2 * i, 0) = std::cos(th);
        pts(2 * i, 1) = std::sin(th);
        pts(2 * i + 1, 0) = std::cos(th + dth);
        pts(2 * i + 1, 1) = std::sin(th + dth);
      }
      Tensor out = mnn_reference(banks, Nonlinearity::Relu, basis, coeffs, pts, ref.points);
      for (int i = 0; i < 20; ++i) {
        double dv = 0.0, dx = 0.0;
        for (int c2 = 0; c2 < out.rows(); ++c2) {
          const double t = out(c2, 2 * i) - out(c2, 2 * i + 1);
          dv += t * t;
        }
        for (int d = 0; d < 2; ++d) {
          const double t = pts(2 * i, d) - pts(2 * i + 1, d);
          dx += t * t;
        }
        worst = std::max(worst, std::sqrt(dv / dx));
      }
      return worst;
    };
    const double c1 = estimate(1), c2 = estimate(2), c3 = estimate(3);
    const double cmax = std::max({c1, c2, c3}), cmin = std::min({c1, c2, c3});
    CHECK(cmax <= 3.0 * cmin);  // all estimates within a +-50% band of each other
  }
}
