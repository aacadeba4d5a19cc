#include <doctest.h>

#include <cmath>
#include <limits>

#include "gtx/terrain.hpp"

using namespace gtx;

TEST_CASE("dem parsing") {
  SUBCASE("a flat 2x2 grid") {
    ElevationGrid g = parse_dem("2 2 1.0\n0 0\n0 0\n");
    CHECK(g.nrows == 2);
    CHECK(g.ncols == 2);
    CHECK(g.at(1, 1) == 0.0);
  }
  SUBCASE("short rows are parse errors with a line number") {
    CHECK_THROWS_WITH_AS(parse_dem("2 2 1.0\n0 0\n0\n"), doctest::Contains("line 3"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_dem("2 2 1.0\n0 0\n"), doctest::Contains("line 3"),
                         std::runtime_error);
  }
  SUBCASE("the hill fixture round-trips bit-exactly") {
    ElevationGrid g = make_hill_dem(17, 23, 0.5, 4, 99);
    ElevationGrid h = parse_dem(dem_to_text(g));
    CHECK(h.nrows == g.nrows);
    CHECK(h.ncols == g.ncols);
    CHECK(h.cell_size == g.cell_size);
    for (size_t i = 0; i < g.elevations.size(); ++i) CHECK(h.elevations[i] == g.elevations[i]);
  }
}

TEST_CASE("downsampling") {
  ElevationGrid g = make_hill_dem(20, 20, 1.0, 3, 5);
  SUBCASE("stride one is the identity") {
    ElevationGrid d = downsample_grid(g, 1);
    CHECK(d.nrows == 20);
    for (size_t i = 0; i < g.elevations.size(); ++i) CHECK(d.elevations[i] == g.elevations[i]);
  }
  SUBCASE("shape arithmetic") {
    ElevationGrid big = make_hill_dem(250, 250, 1.0, 3, 6);
    ElevationGrid d = downsample_grid(big, 5);
    CHECK(d.nrows == 50);
    CHECK(d.ncols == 50);
    CHECK(d.cell_size == 5.0);
  }
  SUBCASE("two stride-2 passes equal one stride-4 pass on divisible dims") {
    const ElevationGrid a = downsample_grid(downsample_grid(g, 2), 2);
    const ElevationGrid b = downsample_grid(g, 4);
    CHECK(a.nrows == b.nrows);
    CHECK(a.ncols == b.ncols);
    for (size_t i = 0; i < a.elevations.size(); ++i) CHECK(a.elevations[i] == b.elevations[i]);
  }
  SUBCASE("degenerate strides are rejected") {
    CHECK_THROWS_AS(downsample_grid(g, 20), std::invalid_argument);
  }
}

TEST_CASE("8-neighbor grid graph") {
  SUBCASE("2x2 flat grid geometry") {
    ElevationGrid g = parse_dem("2 2 1.0\n0 0\n0 0\n");
    Graph gr = grid_graph_8nn(g);
    CHECK(gr.n() == 4);
    CHECK(gr.num_edges() == 6);
    // axis edges weigh 1, diagonals sqrt(2)
    int axis = 0, diag = 0;
    for (int i = 0; i < 4; ++i) {
      auto vals = gr.adjacency().row_vals(i);
      for (double w : vals) {
        if (std::fabs(w - 1.0) < 1e-12) ++axis;
        if (std::fabs(w - std::sqrt(2.0)) < 1e-12) ++diag;
      }
    }
    CHECK(axis == 8);   // 4 undirected axis edges
    CHECK(diag == 4);   // 2 undirected diagonals
  }
  SUBCASE("3x3 degrees") {
    ElevationGrid g = make_hill_dem(3, 3, 1.0, 2, 3);
    Graph gr = grid_graph_8nn(g);
    CHECK(gr.neighbors(gr.n() / 2).size() == 8);  // center
    CHECK(gr.neighbors(0).size() == 3);           // corner
    CHECK(gr.n() == 9);
  }
  SUBCASE("edge weights equal recomputed 3-D distances") {
    ElevationGrid g = make_hill_dem(6, 7, 1.3, 3, 4);
    Graph gr = grid_graph_8nn(g);
    for (int i = 0; i < gr.n(); ++i) {
      auto cols = gr.neighbors(i);
      auto vals = gr.adjacency().row_vals(i);
      for (size_t k = 0; k < cols.size(); ++k) {
        double d2 = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double t = gr.coords()(i, c) - gr.coords()(cols[k], c);
          d2 += t * t;
        }
        CHECK(std::fabs(vals[k] - std::sqrt(d2)) <= 1e-12);
      }
    }
  }
}

namespace {

// Bellman-Ford oracle
std::vector<double> bellman_ford(const Graph& g, int src) {
  std::vector<double> dist(g.n(), std::numeric_limits<double>::infinity());
  dist[src] = 0.0;
  for (int it = 0; it < g.n(); ++it) {
    bool changed = false;
    for (int u = 0; u < g.n(); ++u) {
      if (!std::isfinite(dist[u])) continue;
      auto cols = g.neighbors(u);
      auto vals = g.adjacency().row_vals(u);
      for (size_t k = 0; k < cols.size(); ++k) {
        if (dist[u] + vals[k] < dist[cols[k]]) {
          dist[cols[k]] = dist[u] + vals[k];
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return dist;
}

}  // namespace

TEST_CASE("dijkstra") {
  SUBCASE("path graph distances") {
    Graph g = Graph::from_undirected(3, {{0, 1, 1.0}, {1, 2, 2.0}});
    auto d = dijkstra_spd(g, 0);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 1.0);
    CHECK(d[2] == 3.0);
  }
  SUBCASE("unreachable nodes are infinite") {
    Graph g = Graph::from_undirected(3, {{0, 1, 1.0}});
    auto d = dijkstra_spd(g, 0);
    CHECK(!std::isfinite(d[2]));
  }
  SUBCASE("matches Bellman-Ford exactly on random graphs") {
    RngStream rng(91);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Edge> pairs;
      const int n = 50;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (rng.uniform() < 0.08) pairs.push_back({i, j, 0.1 + 2.0 * rng.uniform()});
      Graph g = Graph::from_undirected(n, pairs);
      const int src = rng.below_int(n);
      auto a = dijkstra_spd(g, src);
      auto b = bellman_ford(g, src);
      for (int i = 0; i < n; ++i) {
        if (std::isfinite(a[i]))
          CHECK(a[i] == b[i]);
        else
          CHECK(!std::isfinite(b[i]));
      }
    }
  }
  SUBCASE("triangle inequality on sampled triples") {
    ElevationGrid dem = make_hill_dem(10, 10, 1.0, 3, 12);
    Graph g = grid_graph_8nn(dem);
    RngStream rng(92);
    std::vector<std::vector<double>> dist;
    for (int s = 0; s < 10; ++s) dist.push_back(dijkstra_spd(g, s));
    for (int t = 0; t < 200; ++t) {
      const int a = rng.below_int(10), b = rng.below_int(10);
      const int c = rng.below_int(g.n());
      CHECK(dist[a][c] <= dist[a][b] + dist[b][c] + 1e-9);
    }
  }
}

TEST_CASE("pair sampling") {
  SUBCASE("a tiny path yields exact labels without self pairs") {
    Graph g = Graph::from_undirected(3, {{0, 1, 1.0}, {1, 2, 2.0}});
    Tensor coords = Tensor::zeros(3, 3);
    g.set_coords(coords.clone());
    PairSet pairs = sample_pairs(g, 1, 2, PairStrategy::Uniform, 3);
    CHECK(pairs.size() == 2);
    for (const auto& p : pairs) {
      CHECK(p.src != p.dst);
      CHECK(p.spd > 0.0);
    }
  }
  SUBCASE("max-height strategy starts from the peak") {
    ElevationGrid dem = make_hill_dem(15, 15, 1.0, 1, 8);
    Graph g = grid_graph_8nn(dem);
    PairSet pairs = sample_pairs(g, 1, 5, PairStrategy::MaxHeightSources, 4);
    int peak = 0;
    for (int i = 1; i < g.n(); ++i)
      if (g.coords()(i, 2) > g.coords()(peak, 2)) peak = i;
    for (const auto& p : pairs) CHECK(p.src == peak);
  }
  SUBCASE("all SPDs dominate the straight-line distance") {
    ElevationGrid dem = make_hill_dem(12, 12, 1.0, 4, 9);
    Graph g = grid_graph_8nn(dem);
    PairSet pairs = sample_pairs(g, 6, 10, PairStrategy::Uniform, 5);
    for (const auto& p : pairs) {
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double t = g.coords()(p.src, c) - g.coords()(p.dst, c);
        d2 += t * t;
      }
      CHECK(p.spd >= std::sqrt(d2) - 1e-9);
    }
  }
  SUBCASE("disconnected pairs are dropped and counted") {
    Graph g = Graph::from_undirected(4, {{0, 1, 1.0}});
    g.set_coords(Tensor::zeros(4, 3));
    int dropped = -1;
    PairSet pairs = sample_pairs(g, 4, 3, PairStrategy::Uniform, 6, &dropped);
    CHECK(dropped > 0);
    for (const auto& p : pairs) CHECK(std::isfinite(p.spd));
  }
}

TEST_CASE("spd evaluation") {
  SUBCASE("zero embeddings predict zero, so MAE is the mean SPD") {
    Graph g = Graph::from_undirected(3, {{0, 1, 1.0}, {1, 2, 2.0}});
    g.set_coords(Tensor::zeros(3, 3));
    ModelConfig cfg;
    cfg.mode = Mode::MlpBaseline;
    cfg.layers = 1;
    cfg.d_model = 4;
    cfg.d_in = 3;
    cfg.use_pe = false;
    cfg.head = {TaskHead::Kind::Embed, 2};
    ModelParams params = init_model_params(cfg, 1);
    // zero head makes every embedding zero
    params.w_head = Tensor::zeros(2, 4);
    PairSet pairs = {{0, 1, 1.0}, {0, 2, 3.0}, {1, 2, 2.0}};
    SpdMetrics m = evaluate_spd_model(cfg, params, g, pairs, 0);
    CHECK(m.mae == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("the euclidean baseline is exact on a straight flat line") {
    ElevationGrid dem = parse_dem("2 3 1.0\n0 0 0\n0 0 0\n");
    Graph g = grid_graph_8nn(dem);
    // pairs along the first row: the 8-neighbor path equals the straight line
    PairSet pairs = {{0, 1, 1.0}, {0, 2, 2.0}};
    SpdMetrics m = euclidean_baseline(g, pairs);
    CHECK(m.mae == doctest::Approx(0.0).epsilon(1e-12));
  }
}
