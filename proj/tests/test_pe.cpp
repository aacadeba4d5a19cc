#include <doctest.h>

#include <cmath>

#include "gtx/linalg.hpp"
#include "gtx/pe.hpp"

using namespace gtx;

namespace {

Graph path3() { return Graph::from_undirected(3, {{0, 1, 1.0}, {1, 2, 1.0}}); }

Graph random_graph(int n, double p, RngStream& rng) {
  std::vector<Edge> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) pairs.push_back({i, j, 0.5 + rng.uniform()});
  return Graph::from_undirected(n, pairs);
}

}  // namespace

TEST_CASE("graph_conv basics") {
  SUBCASE("order one ignores the graph") {
    RngStream rng(41);
    FilterBank bank;
    bank.taps.push_back(Tensor::randn(2, 2, rng));
    Graph g = path3();
    Tensor z = Tensor::randn(2, 3, rng);
    Tensor out = graph_conv(bank, g, z);
    Tensor expected = matmul(bank.taps[0], z);
    for (int i = 0; i < out.size(); ++i) CHECK(out.data()[i] == expected.data()[i]);
  }
  SUBCASE("H0=0, H1=I on the path reproduces the laplacian") {
    FilterBank bank;
    bank.taps.push_back(Tensor::zeros(3, 3));
    bank.taps.push_back(Tensor::identity(3));
    Graph g = path3();
    Tensor out = graph_conv(bank, g, Tensor::identity(3));
    Tensor l = dense_laplacian(g);
    for (int i = 0; i < 9; ++i) CHECK(out.data()[i] == doctest::Approx(l.data()[i]).epsilon(1e-14));
  }
  SUBCASE("random bank matches explicitly powered laplacians") {
    RngStream rng(42);
    Graph g = random_graph(8, 0.4, rng);
    const int K = 4, din = 3, dout = 2;
    FilterBank bank;
    for (int k = 0; k < K; ++k) bank.taps.push_back(Tensor::randn(dout, din, rng));
    Tensor z = Tensor::randn(din, 8, rng);
    Tensor out = graph_conv(bank, g, z);
    // dense oracle with materialized L^k
    Tensor l = dense_laplacian(g);
    Tensor lk = Tensor::identity(8);
    Tensor expected = Tensor::zeros(dout, 8);
    for (int k = 0; k < K; ++k) {
      expected = add(expected, matmul(bank.taps[k], matmul(z, lk)));
      lk = matmul(lk, l);
    }
    for (int i = 0; i < out.size(); ++i)
      CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-10));
  }
  SUBCASE("dimension mismatch is a contract error") {
    FilterBank bank;
    bank.taps.push_back(Tensor::identity(2));
    CHECK_THROWS_AS(graph_conv(bank, path3(), Tensor::zeros(3, 3)), std::invalid_argument);
  }
}

TEST_CASE("gnn_forward") {
  SUBCASE("all-negative preactivations die under relu") {
    PEParams p;
    PELayer layer;
    layer.act = Nonlinearity::Relu;
    layer.bank.taps.push_back(Tensor::full(2, 2, -1.0));
    p.layers.push_back(layer);
    Graph g = path3();
    Tensor z = Tensor::ones(2, 3);
    Tensor out = gnn_forward(p, g, z);
    for (int i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0);
  }
  SUBCASE("relu on nonnegative outputs equals the raw convolution") {
    RngStream rng(43);
    PEParams p;
    PELayer layer;
    layer.act = Nonlinearity::Relu;
    Tensor tap = Tensor::randn(2, 2, rng);
    for (int i = 0; i < tap.size(); ++i) tap.data()[i] = std::fabs(tap.data()[i]);
    layer.bank.taps.push_back(tap);
    p.layers.push_back(layer);
    Graph g = path3();
    Tensor z = Tensor::ones(2, 3);
    Tensor conv = graph_conv(p.layers[0].bank, g, z);
    Tensor out = gnn_forward(p, g, z);
    for (int i = 0; i < out.size(); ++i) CHECK(out.data()[i] == conv.data()[i]);
  }
  SUBCASE("two-layer network is exactly permutation equivariant") {
    RngStream rng(44);
    Graph g = random_graph(10, 0.35, rng);
    PEConfig pc;
    pc.layers = 2;
    pc.order = 3;
    pc.hidden = 4;
    pc.out_dim = 3;
    RngStream init(45);
    PEParams p = init_pe_params(pc, init);
    // widen the first layer for a 2-channel input signal
    for (auto& tap : p.layers[0].bank.taps) tap = Tensor::randn(4, 2, init, 0.4);
    Tensor z = Tensor::randn(2, 10, rng);
    Tensor out = gnn_forward(p, g, z);
    std::vector<int> perm(10);
    for (int i = 0; i < 10; ++i) perm[i] = i;
    rng.shuffle(perm);
    Tensor out_p = gnn_forward(p, permute_graph(g, perm), permute_cols(z, perm));
    Tensor expected = permute_cols(out, perm);
    // float accumulation order differs under relabeling; agreement is to
    // within 1e-10 relative
    for (int i = 0; i < out_p.size(); ++i) {
      const double tol = 1e-10 * std::max(1.0, std::fabs(expected.data()[i]));
      CHECK(std::fabs(out_p.data()[i] - expected.data()[i]) <= tol);
    }
  }
}

TEST_CASE("rpearl") {
  SUBCASE("zero filter banks give a zero encoding") {
    PEParams p;
    PELayer layer;
    layer.bank.taps.push_back(Tensor::zeros(3, 1));
    layer.bank.taps.push_back(Tensor::zeros(3, 1));
    p.layers.push_back(layer);
    Graph g = path3();
    Tensor out = rpearl(p, g, 4, 9);
    CHECK(out.rows() == 3);  // node-major: N x D
    CHECK(out.cols() == 3);
    for (int i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0);
  }
  SUBCASE("single branch reproduces the forward on the drawn IDs") {
    RngStream init(46);
    PEConfig pc;
    pc.layers = 1;
    pc.order = 2;
    pc.out_dim = 3;
    pc.hidden = 3;
    PEParams p = init_pe_params(pc, init);
    Graph g = path3();
    const uint64_t seed = 31;
    Tensor got = rpearl(p, g, 1, seed);
    auto ids = rpearl_draw_ids(3, 1, seed);
    Tensor expected = transpose(gnn_forward(p, g, ids[0]));
    for (int i = 0; i < got.size(); ++i) CHECK(got.data()[i] == expected.data()[i]);
  }
  SUBCASE("averaging shrinks cross-node variance on a vertex-transitive graph") {
    // complete graph K5: all nodes equivalent, deviation across nodes is
    // pure sampling noise and must shrink with M
    std::vector<Edge> pairs;
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) pairs.push_back({i, j, 1.0});
    Graph k5 = Graph::from_undirected(5, pairs);
    RngStream init(47);
    PEConfig pc;
    pc.layers = 1;
    pc.order = 2;
    pc.out_dim = 4;
    pc.hidden = 4;
    PEParams p = init_pe_params(pc, init);
    auto node_spread = [&](int m_samples, uint64_t seed) {
      Tensor enc = rpearl(p, k5, m_samples, seed);  // 5 x 4
      double spread = 0.0;
      for (int d = 0; d < enc.cols(); ++d) {
        double mu = 0.0;
        for (int i = 0; i < 5; ++i) mu += enc(i, d);
        mu /= 5;
        double var = 0.0;
        for (int i = 0; i < 5; ++i) var += (enc(i, d) - mu) * (enc(i, d) - mu);
        spread += std::sqrt(var / 5);
      }
      return spread;
    };
    int shrunk = 0;
    std::vector<double> small, large;
    for (uint64_t s = 0; s < 10; ++s) {
      small.push_back(node_spread(4, 100 + s));
      large.push_back(node_spread(64, 100 + s));
    }
    CHECK(median(small) > median(large));
    (void)shrunk;
  }
  SUBCASE("conditional permutation equivariance with permuted realizations") {
    RngStream rng(48);
    Graph g = random_graph(9, 0.4, rng);
    RngStream init(49);
    PEConfig pc;
    pc.layers = 2;
    pc.order = 3;
    pc.hidden = 4;
    pc.out_dim = 4;
    PEParams p = init_pe_params(pc, init);
    auto ids = rpearl_draw_ids(9, 3, 77);
    Tensor out = rpearl_with_ids(p, g, ids);
    std::vector<int> perm(9);
    for (int i = 0; i < 9; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<Tensor> ids_p;
    for (const auto& z : ids) ids_p.push_back(permute_cols(z, perm));
    Tensor out_p = rpearl_with_ids(p, permute_graph(g, perm), ids_p);
    // node-major output: row perm[i] of the permuted run equals row i
    double worst = 0.0;
    for (int i = 0; i < 9; ++i)
      for (int d = 0; d < 4; ++d) worst = std::max(worst, std::fabs(out_p(perm[i], d) - out(i, d)));
    CHECK(worst <= 1e-10);
  }
  SUBCASE("filter gradients pass the finite-difference check") {
    RngStream init(50);
    PEConfig pc;
    pc.layers = 1;
    pc.order = 2;
    pc.out_dim = 2;
    pc.hidden = 2;
    pc.act = Nonlinearity::Tanh;
    PEParams p = init_pe_params(pc, init);
    Graph g = path3();
    RngStream rng(51);
    Tensor w = Tensor::randn(3, 2, rng);
    const double err = finite_diff_check(
        [&](Tape&, Tensor x) {
          PEParams local = p;
          local.layers[0].bank.taps[1] = x;
          return sum(hadamard(rpearl(local, g, 2, 5), w));
        },
        p.layers[0].bank.taps[1].clone(), 1e-6);
    CHECK(err < 1e-4);
  }
}
