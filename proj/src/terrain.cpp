#include "gtx/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "gtx/rng.hpp"
#include "gtx/util.hpp"

namespace gtx {

ElevationGrid parse_dem(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("dem parse error at line 1: empty file");
  ElevationGrid grid;
  {
    std::istringstream hs(line);
    if (!(hs >> grid.nrows >> grid.ncols >> grid.cell_size))
      throw std::runtime_error("dem parse error at line 1: expected 'nrows ncols cell_size'");
  }
  if (grid.nrows < 2 || grid.ncols < 2)
    throw std::runtime_error("dem parse error at line 1: grid must be at least 2x2");
  if (grid.cell_size <= 0.0) throw std::runtime_error("dem parse error at line 1: cell_size <= 0");
  grid.elevations.resize(static_cast<size_t>(grid.nrows) * grid.ncols);
  for (int i = 0; i < grid.nrows; ++i) {
    if (!std::getline(is, line))
      throw std::runtime_error("dem parse error at line " + std::to_string(i + 2) +
                               ": missing elevation row");
    std::istringstream rs(line);
    for (int j = 0; j < grid.ncols; ++j) {
      if (!(rs >> grid.at(i, j)))
        throw std::runtime_error("dem parse error at line " + std::to_string(i + 2) + ": expected " +
                                 std::to_string(grid.ncols) + " values");
      if (!std::isfinite(grid.at(i, j)))
        throw std::runtime_error("dem parse error at line " + std::to_string(i + 2) +
                                 ": non-finite elevation");
    }
    double extra;
    if (rs >> extra)
      throw std::runtime_error("dem parse error at line " + std::to_string(i + 2) +
                               ": too many values");
  }
  return grid;
}

std::string dem_to_text(const ElevationGrid& grid) {
  std::ostringstream os;
  os.precision(17);
  os << grid.nrows << " " << grid.ncols << " " << grid.cell_size << "\n";
  for (int i = 0; i < grid.nrows; ++i) {
    for (int j = 0; j < grid.ncols; ++j) os << (j ? " " : "") << grid.at(i, j);
    os << "\n";
  }
  return os.str();
}

ElevationGrid load_dem(const std::string& path) { return parse_dem(read_text_file(path)); }

void save_dem(const std::string& path, const ElevationGrid& grid) {
  write_text_file(path, dem_to_text(grid));
}

ElevationGrid make_hill_dem(int nrows, int ncols, double cell_size, int hills, uint64_t seed) {
  ElevationGrid grid;
  grid.nrows = nrows;
  grid.ncols = ncols;
  grid.cell_size = cell_size;
  grid.elevations.assign(static_cast<size_t>(nrows) * ncols, 0.0);
  RngStream rng(substream_seed(seed, "hills"));
  struct Hill {
    double ci, cj, amp, width;
  };
  std::vector<Hill> hs;
  const double extent = cell_size * std::max(nrows, ncols);
  for (int h = 0; h < hills; ++h) {
    hs.push_back({rng.uniform(0.15, 0.85) * nrows * cell_size,
                  rng.uniform(0.15, 0.85) * ncols * cell_size,
                  rng.uniform(0.25, 0.65) * extent, rng.uniform(0.08, 0.22) * extent});
  }
  for (int i = 0; i < nrows; ++i) {
    for (int j = 0; j < ncols; ++j) {
      const double y = i * cell_size, x = j * cell_size;
      double z = 0.0;
      for (const auto& h : hs) {
        const double d2 = (y - h.ci) * (y - h.ci) + (x - h.cj) * (x - h.cj);
        z += h.amp * std::exp(-d2 / (2.0 * h.width * h.width));
      }
      grid.at(i, j) = z;
    }
  }
  return grid;
}

ElevationGrid downsample_grid(const ElevationGrid& grid, int stride) {
  if (stride < 1) throw std::invalid_argument("downsample_grid: stride must be >= 1");
  ElevationGrid out;
  out.nrows = (grid.nrows + stride - 1) / stride;
  out.ncols = (grid.ncols + stride - 1) / stride;
  if (out.nrows < 2 || out.ncols < 2)
    throw std::invalid_argument("downsample_grid: stride " + std::to_string(stride) +
                                " degenerates the grid to " + std::to_string(out.nrows) + "x" +
                                std::to_string(out.ncols));
  out.cell_size = grid.cell_size * stride;
  out.elevations.resize(static_cast<size_t>(out.nrows) * out.ncols);
  for (int i = 0; i < out.nrows; ++i)
    for (int j = 0; j < out.ncols; ++j) out.at(i, j) = grid.at(i * stride, j * stride);
  return out;
}

Graph grid_graph_8nn(const ElevationGrid& grid) {
  const int R = grid.nrows, C = grid.ncols;
  Tensor coords(R * C, 3);
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      const int v = grid.node(i, j);
      coords(v, 0) = j * grid.cell_size;
      coords(v, 1) = i * grid.cell_size;
      coords(v, 2) = grid.at(i, j);
    }
  }
  std::vector<Edge> pairs;
  const int di[4] = {0, 1, 1, 1};
  const int dj[4] = {1, -1, 0, 1};  // E, SW, S, SE cover each undirected pair once
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      for (int k = 0; k < 4; ++k) {
        const int ni = i + di[k], nj = j + dj[k];
        if (ni < 0 || ni >= R || nj < 0 || nj >= C) continue;
        const int a = grid.node(i, j), b = grid.node(ni, nj);
        double w = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double t = coords(a, c) - coords(b, c);
          w += t * t;
        }
        pairs.push_back({a, b, std::sqrt(w)});
      }
    }
  }
  Graph g = Graph::from_undirected(R * C, pairs);
  g.set_coords(std::move(coords));
  return g;
}

std::vector<double> dijkstra_spd(const Graph& g, int source) {
  if (source < 0 || source >= g.n()) throw std::invalid_argument("dijkstra_spd: bad source");
  for (double w : g.adjacency().vals)
    if (w < 0.0) throw std::invalid_argument("dijkstra_spd: negative edge weight");
  std::vector<double> dist(g.n(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
  dist[source] = 0.0;
  heap.push({0.0, source});
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    auto cols = g.neighbors(u);
    auto vals = g.adjacency().row_vals(u);
    for (size_t k = 0; k < cols.size(); ++k) {
      const double nd = d + vals[k];
      if (nd < dist[cols[k]]) {
        dist[cols[k]] = nd;
        heap.push({nd, cols[k]});
      }
    }
  }
  return dist;
}

PairSet sample_pairs(const Graph& g, int n_sources, int n_targets_per_source,
                     PairStrategy strategy, uint64_t seed, int* dropped_count) {
  if (n_sources < 1 || n_targets_per_source < 1)
    throw std::invalid_argument("sample_pairs: counts must be >= 1");
  if (n_sources > g.n()) throw std::invalid_argument("sample_pairs: more sources than nodes");
  RngStream rng(substream_seed(seed, "pairs"));
  std::vector<int> sources;
  if (strategy == PairStrategy::MaxHeightSources) {
    if (!g.has_coords()) throw std::invalid_argument("sample_pairs: max-height needs coords");
    std::vector<int> order(g.n());
    for (int i = 0; i < g.n(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return g.coords()(a, 2) > g.coords()(b, 2);
    });
    sources.assign(order.begin(), order.begin() + n_sources);
  } else {
    sources = rng.sample_without_replacement(g.n(), n_sources);
  }
  PairSet pairs;
  int dropped = 0;
  for (int src : sources) {
    auto dist = dijkstra_spd(g, src);
    const int want = std::min(n_targets_per_source, g.n() - 1);
    auto candidates = rng.sample_without_replacement(g.n(), std::min(g.n(), want + 1));
    std::vector<int> targets;
    for (int t : candidates)
      if (t != src && static_cast<int>(targets.size()) < want) targets.push_back(t);
    for (int t : targets) {
      if (!std::isfinite(dist[t])) {
        ++dropped;
        continue;
      }
      pairs.push_back({src, t, dist[t]});
    }
  }
  // deterministic output ordering
  std::stable_sort(pairs.begin(), pairs.end(), [](const SpdPair& a, const SpdPair& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  if (dropped_count) *dropped_count = dropped;
  return pairs;
}

Tensor terrain_features(const Graph& g) {
  if (!g.has_coords()) throw std::invalid_argument("terrain_features: graph has no coords");
  const Tensor& c = g.coords();
  Tensor f(3, g.n());
  for (int d = 0; d < 3; ++d) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < g.n(); ++i) {
      lo = std::min(lo, c(i, d));
      hi = std::max(hi, c(i, d));
    }
    const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    for (int i = 0; i < g.n(); ++i) f(d, i) = (c(i, d) - lo) / span;
  }
  return f;
}

namespace {

SpdMetrics metrics_from_predictions(const std::vector<double>& pred, const PairSet& pairs) {
  SpdMetrics m;
  int rel_count = 0;
  for (size_t p = 0; p < pairs.size(); ++p) {
    const double err = std::fabs(pred[p] - pairs[p].spd);
    m.mae += err;
    m.rmse += err * err;
    if (pairs[p].spd > 0.0) {
      m.relative_error += err / pairs[p].spd;
      ++rel_count;
    }
  }
  m.mae /= pairs.size();
  m.rmse = std::sqrt(m.rmse / pairs.size());
  if (rel_count > 0) m.relative_error /= rel_count;
  return m;
}

}  // namespace

SpdMetrics evaluate_spd_model(const ModelConfig& cfg, const ModelParams& params, const Graph& g,
                              const PairSet& pairs, uint64_t pe_seed) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_spd_model: empty pair set");
  ForwardOpts opts;
  KHopMask mask = build_model_mask(cfg, g, pe_seed);
  if (cfg.mode == Mode::SparseGT) opts.mask = &mask;
  opts.pe_seed = pe_seed;
  Tensor emb = model_forward(cfg, params, g, terrain_features(g), opts);
  std::vector<double> pred(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) {
    double l1 = 0.0;
    for (int c = 0; c < emb.rows(); ++c) l1 += std::fabs(emb(c, pairs[p].src) - emb(c, pairs[p].dst));
    pred[p] = l1;
  }
  return metrics_from_predictions(pred, pairs);
}

SpdMetrics euclidean_baseline(const Graph& g, const PairSet& pairs) {
  if (!g.has_coords()) throw std::invalid_argument("euclidean_baseline: graph has no coords");
  std::vector<double> pred(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) {
    double d2 = 0.0;
    for (int c = 0; c < g.coords().cols(); ++c) {
      const double t = g.coords()(pairs[p].src, c) - g.coords()(pairs[p].dst, c);
      d2 += t * t;
    }
    pred[p] = std::sqrt(d2);
  }
  return metrics_from_predictions(pred, pairs);
}

}  // namespace gtx
