#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "gtx/graph.hpp"
#include "gtx/linalg.hpp"
#include "gtx/rng.hpp"

using namespace gtx;

namespace {

Graph random_graph(int n, double edge_prob, RngStream& rng) {
  std::vector<Edge> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < edge_prob) pairs.push_back({i, j, 0.5 + rng.uniform()});
  return Graph::from_undirected(n, pairs);
}

}  // namespace

TEST_CASE("laplacian definition on a path") {
  Graph g = Graph::from_undirected(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  Tensor l = dense_laplacian(g);
  const double expected[3][3] = {{1, -1, 0}, {-1, 2, -1}, {0, -1, 1}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(l(i, j) == expected[i][j]);
}

TEST_CASE("empty graph has a zero laplacian") {
  Graph g = Graph::from_undirected(4, {});
  Tensor l = dense_laplacian(g);
  for (int i = 0; i < 16; ++i) CHECK(l.data()[i] == 0.0);
}

TEST_CASE("laplacian rows sum to zero and spectrum is nonnegative") {
  RngStream rng(21);
  Graph g = random_graph(10, 0.4, rng);
  Tensor l = dense_laplacian(g);
  for (int i = 0; i < 10; ++i) {
    double rs = 0.0;
    for (int j = 0; j < 10; ++j) rs += l(i, j);
    CHECK(std::fabs(rs) <= 1e-10);
  }
  auto evals = symmetric_eigenvalues(l);
  CHECK(evals.front() >= -1e-10);
}

TEST_CASE("builder validation") {
  CHECK_THROWS_WITH_AS(Graph::from_symmetric_edges(3, {{0, 1, 1.0}, {1, 0, 2.0}}),
                       doctest::Contains("asymmetric"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(Graph::from_symmetric_edges(3, {{0, 1, 1.0}}), doctest::Contains("(0,1)"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(Graph::from_undirected(3, {{0, 1, -1.0}}), doctest::Contains("negative"),
                       std::invalid_argument);
  CHECK_THROWS_AS(Graph::from_undirected(3, {{1, 1, 1.0}}), std::invalid_argument);
}

TEST_CASE("laplacian commutes with permutation exactly") {
  RngStream rng(22);
  Graph g = random_graph(12, 0.3, rng);
  std::vector<int> perm(12);
  for (int i = 0; i < 12; ++i) perm[i] = i;
  rng.shuffle(perm);
  Tensor l = dense_laplacian(g);
  Tensor lp = dense_laplacian(permute_graph(g, perm));
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) CHECK(lp(perm[i], perm[j]) == l(i, j));
}

TEST_CASE("kernel graph weights") {
  SUBCASE("two points: stored weight recovers the raw gaussian kernel") {
    const double eps = 0.3;
    Tensor pts = Tensor::from({{0.0, 0.0}, {0.7, 0.0}});
    Graph g = Graph::kernel_graph(pts, eps);
    const double raw = std::exp(-0.49 / (4.0 * eps));
    // densities: d = 1 + raw for both points; stored = raw/(d*d*eps)
    const double dens = 1.0 + raw;
    const double stored = g.adjacency().row_vals(0)[0];
    CHECK(stored == doctest::Approx(raw / (dens * dens * eps)).epsilon(1e-14));
  }
  SUBCASE("four points on the circle match a scalar recomputation") {
    const double eps = 0.5;
    Tensor pts(4, 2);
    for (int i = 0; i < 4; ++i) {
      pts(i, 0) = std::cos(i * M_PI / 2.0);
      pts(i, 1) = std::sin(i * M_PI / 2.0);
    }
    Graph g = Graph::kernel_graph(pts, eps);
    // independent recomputation of the density-normalized kernel
    double K[4][4], dens[4] = {0, 0, 0, 0};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double dx = pts(i, 0) - pts(j, 0), dy = pts(i, 1) - pts(j, 1);
        K[i][j] = std::exp(-(dx * dx + dy * dy) / (4.0 * eps));
        dens[i] += K[i][j];
      }
    }
    Tensor a = dense_adjacency(g);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        if (i == j) continue;
        CHECK(a(i, j) == doctest::Approx(K[i][j] / (dens[i] * dens[j] * eps)).epsilon(1e-13));
      }
  }
  SUBCASE("kernel laplacian is positive semidefinite on random clouds") {
    RngStream rng(23);
    for (int t = 0; t < 3; ++t) {
      Tensor pts = Tensor::randn(24, 3, rng);
      Graph g = Graph::kernel_graph(pts, 0.2 + 0.3 * rng.uniform());
      auto evals = symmetric_eigenvalues(dense_laplacian(g));
      CHECK(evals.front() >= -1e-8);
    }
  }
  SUBCASE("epsilon must be positive, duplicates allowed") {
    Tensor pts = Tensor::from({{0.0, 0.0}, {0.0, 0.0}});
    CHECK_THROWS_AS(Graph::kernel_graph(pts, 0.0), std::invalid_argument);
    Graph g = Graph::kernel_graph(pts, 0.5);  // distance zero: weight = kernel at 0
    CHECK(g.adjacency().row_vals(0)[0] > 0.0);
  }
}

TEST_CASE("k-hop masks") {
  // path 0-1-2-3-4
  Graph path = Graph::from_undirected(5, {{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 4, 1}});
  SUBCASE("hop-1 around the middle node") {
    KHopMask m = k_hop_mask(path, 1);
    CHECK(m.row(2) == std::vector<int>{1, 2, 3});
  }
  SUBCASE("hop-2 around an endpoint") {
    KHopMask m = k_hop_mask(path, 2);
    CHECK(m.row(0) == std::vector<int>{0, 1, 2});
  }
  SUBCASE("hop-2 equals the boolean (A+I)^2 support") {
    RngStream rng(24);
    Graph g = random_graph(20, 0.15, rng);
    KHopMask m = k_hop_mask(g, 2);
    Tensor a = dense_adjacency(g);
    // boolean matrix power oracle
    std::vector<std::vector<bool>> ai(20, std::vector<bool>(20, false));
    for (int i = 0; i < 20; ++i) {
      ai[i][i] = true;
      for (int j = 0; j < 20; ++j)
        if (a(i, j) != 0.0) ai[i][j] = true;
    }
    for (int i = 0; i < 20; ++i) {
      std::set<int> reach;
      for (int k = 0; k < 20; ++k)
        if (ai[i][k])
          for (int j = 0; j < 20; ++j)
            if (ai[k][j]) reach.insert(j);
      CHECK(m.row(i) == std::vector<int>(reach.begin(), reach.end()));
    }
  }
  SUBCASE("isolated nodes keep themselves") {
    Graph g = Graph::from_undirected(3, {{0, 1, 1.0}});
    KHopMask m = k_hop_mask(g, 3);
    CHECK(m.row(2) == std::vector<int>{2});
  }
  SUBCASE("a diameter-wide mask covers every node") {
    RngStream rng(25);
    Graph g = random_graph(12, 0.35, rng);
    if (is_connected(g)) {
      KHopMask m = k_hop_mask(g, diameter(g));
      for (int i = 0; i < 12; ++i) CHECK(static_cast<int>(m.row(i).size()) == 12);
    }
  }
}

TEST_CASE("random expander edges") {
  SUBCASE("n=4 degree=3 forces the complete graph") {
    EdgeSet e = random_expander_edges(4, 3, 9);
    CHECK(e.size() == 6);
  }
  SUBCASE("degree-regular and simple") {
    EdgeSet e = random_expander_edges(10, 3, 1);
    std::vector<int> deg(10, 0);
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : e) {
      CHECK(a != b);
      CHECK(seen.emplace(std::min(a, b), std::max(a, b)).second);
      deg[a]++;
      deg[b]++;
    }
    for (int d : deg) CHECK(d == 3);
  }
  SUBCASE("different seeds give different edge sets") {
    int differing = 0;
    for (int t = 0; t < 20; ++t) {
      EdgeSet a = random_expander_edges(16, 3, 100 + t);
      EdgeSet b = random_expander_edges(16, 3, 200 + t);
      if (a != b) ++differing;
    }
    CHECK(differing >= 19);
  }
  SUBCASE("infeasible inputs are rejected") {
    CHECK_THROWS_AS(random_expander_edges(5, 3, 0), std::invalid_argument);  // odd n*degree
    CHECK_THROWS_AS(random_expander_edges(3, 3, 0), std::invalid_argument);  // degree >= n
  }
}

TEST_CASE("subsample graph") {
  SUBCASE("fraction one is the identity") {
    RngStream rng(26);
    Graph g = random_graph(8, 0.4, rng);
    auto [sub, kept] = subsample_graph(g, 1.0, 5);
    CHECK(sub.n() == 8);
    for (int i = 0; i < 8; ++i) CHECK(kept[i] == i);
    Tensor a = dense_adjacency(g), as = dense_adjacency(sub);
    for (int i = 0; i < 64; ++i) CHECK(a.data()[i] == as.data()[i]);
  }
  SUBCASE("half of a complete graph is complete") {
    std::vector<Edge> pairs;
    for (int i = 0; i < 10; ++i)
      for (int j = i + 1; j < 10; ++j) pairs.push_back({i, j, 1.0});
    Graph k10 = Graph::from_undirected(10, pairs);
    auto [sub, kept] = subsample_graph(k10, 0.5, 3);
    CHECK(sub.n() == 5);
    CHECK(sub.num_edges() == 10);
  }
  SUBCASE("edges of the subgraph exist in the parent") {
    RngStream rng(27);
    Graph g = random_graph(20, 0.3, rng);
    auto [sub, kept] = subsample_graph(g, 0.3, 11);
    CHECK(sub.n() == 6);  // ceil(0.3 * 20)
    Tensor a = dense_adjacency(g);
    Tensor as = dense_adjacency(sub);
    for (int i = 0; i < sub.n(); ++i)
      for (int j = 0; j < sub.n(); ++j)
        if (as(i, j) != 0.0) CHECK(a(kept[i], kept[j]) == as(i, j));
    auto [sub2, kept2] = subsample_graph(g, 0.3, 11);
    CHECK(kept == kept2);
  }
  SUBCASE("fraction out of range") {
    RngStream rng(28);
    Graph g = random_graph(6, 0.5, rng);
    CHECK_THROWS_AS(subsample_graph(g, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(subsample_graph(g, 1.5, 1), std::invalid_argument);
  }
}

TEST_CASE("edge list serialization round trip") {
  RngStream rng(29);
  Graph g = random_graph(9, 0.4, rng);
  Tensor coords = Tensor::randn(9, 3, rng);
  g.set_coords(coords.clone());
  std::stringstream ss;
  g.save(ss);
  Graph h = Graph::load(ss);
  CHECK(h.n() == g.n());
  CHECK(h.num_edges() == g.num_edges());
  Tensor a = dense_adjacency(g), b = dense_adjacency(h);
  for (int i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
  REQUIRE(h.has_coords());
  for (int i = 0; i < coords.size(); ++i) CHECK(h.coords().data()[i] == coords.data()[i]);
}

TEST_CASE("sparse right-multiplication matches the dense product") {
  RngStream rng(30);
  Graph g = random_graph(8, 0.4, rng);
  Tensor x = Tensor::randn(3, 8, rng);
  Tensor sparse = spmm_right_laplacian(x, g);
  Tensor dense = matmul(x, dense_laplacian(g));
  for (int i = 0; i < sparse.size(); ++i)
    CHECK(sparse.data()[i] == doctest::Approx(dense.data()[i]).epsilon(1e-12));
}
