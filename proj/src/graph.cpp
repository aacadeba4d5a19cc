#include "gtx/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gtx/rng.hpp"

namespace gtx {

namespace {

std::shared_ptr<const Csr> build_csr(int n, const std::vector<Edge>& both_dirs) {
  auto csr = std::make_shared<Csr>();
  csr->n = n;
  csr->offsets.assign(n + 1, 0);
  for (const auto& e : both_dirs) csr->offsets[e.i + 1]++;
  for (int i = 0; i < n; ++i) csr->offsets[i + 1] += csr->offsets[i];
  csr->cols.resize(both_dirs.size());
  csr->vals.resize(both_dirs.size());
  std::vector<int> cursor(csr->offsets.begin(), csr->offsets.end() - 1);
  // entries are appended in (i, j)-sorted order by the callers
  for (const auto& e : both_dirs) {
    const int p = cursor[e.i]++;
    csr->cols[p] = e.j;
    csr->vals[p] = e.w;
  }
  return csr;
}

std::shared_ptr<const Csr> laplacian_of(const Csr& adj) {
  auto lap = std::make_shared<Csr>();
  lap->n = adj.n;
  lap->offsets.assign(adj.n + 1, 0);
  // row i holds the off-diagonal entries −w plus the diagonal degree
  for (int i = 0; i < adj.n; ++i)
    lap->offsets[i + 1] = lap->offsets[i] + (adj.offsets[i + 1] - adj.offsets[i]) + 1;
  lap->cols.resize(lap->offsets.back());
  lap->vals.resize(lap->offsets.back());
  std::vector<double> row_weights;
  for (int i = 0; i < adj.n; ++i) {
    int p = lap->offsets[i];
    bool diag_done = false;
    auto cols = adj.row_cols(i);
    auto vals = adj.row_vals(i);
    // degree summed over value-sorted weights: the diagonal is then invariant
    // under node relabeling (same multiset -> same rounding)
    row_weights.assign(vals.begin(), vals.end());
    std::sort(row_weights.begin(), row_weights.end());
    double deg = 0.0;
    for (double w : row_weights) deg += w;
    for (size_t k = 0; k < cols.size(); ++k) {
      if (!diag_done && cols[k] > i) {
        lap->cols[p] = i;
        lap->vals[p] = deg;
        ++p;
        diag_done = true;
      }
      lap->cols[p] = cols[k];
      lap->vals[p] = -vals[k];
      ++p;
    }
    if (!diag_done) {
      lap->cols[p] = i;
      lap->vals[p] = deg;
      ++p;
    }
  }
  return lap;
}

}  // namespace

Graph Graph::from_symmetric_edges(int n, const std::vector<Edge>& entries) {
  if (n < 0) throw std::invalid_argument("graph: negative node count");
  std::map<std::pair<int, int>, double> seen;
  for (const auto& e : entries) {
    if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n)
      throw std::invalid_argument("graph: edge index out of range: (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ") with n=" + std::to_string(n));
    if (e.i == e.j)
      throw std::invalid_argument("graph: self-loop at node " + std::to_string(e.i) +
                                  " (self-attention is handled by masks)");
    if (e.w < 0.0)
      throw std::invalid_argument("graph: negative weight " + std::to_string(e.w) + " on edge (" +
                                  std::to_string(e.i) + "," + std::to_string(e.j) + ")");
    auto [it, inserted] = seen.emplace(std::make_pair(e.i, e.j), e.w);
    if (!inserted)
      throw std::invalid_argument("graph: duplicate entry for edge (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ")");
  }
  for (const auto& [key, w] : seen) {
    auto rev = seen.find({key.second, key.first});
    if (rev == seen.end() || std::fabs(rev->second - w) > 1e-12)
      throw std::invalid_argument("graph: asymmetric input, offending pair (" +
                                  std::to_string(key.first) + "," + std::to_string(key.second) +
                                  ")");
  }
  std::vector<Edge> both;
  both.reserve(seen.size());
  for (const auto& [key, w] : seen) both.push_back({key.first, key.second, w});
  Graph g;
  g.adj_ = build_csr(n, both);
  g.lap_ = laplacian_of(*g.adj_);
  return g;
}

Graph Graph::from_undirected(int n, const std::vector<Edge>& pairs) {
  std::vector<Edge> entries;
  entries.reserve(pairs.size() * 2);
  for (const auto& e : pairs) {
    entries.push_back(e);
    entries.push_back({e.j, e.i, e.w});
  }
  return from_symmetric_edges(n, entries);
}

Graph Graph::kernel_graph(const Tensor& points, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("kernel_graph: epsilon must be > 0");
  const int n = points.rows();
  if (n < 2) throw std::invalid_argument("kernel_graph: need at least 2 points");
  const int dim = points.cols();
  // raw kernel including the self term (it belongs to the density estimate)
  std::vector<double> K(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    K[static_cast<size_t>(i) * n + i] = 1.0;
    for (int j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double t = points(i, d) - points(j, d);
        d2 += t * t;
      }
      const double w = std::exp(-d2 / (4.0 * epsilon));
      K[static_cast<size_t>(i) * n + j] = w;
      K[static_cast<size_t>(j) * n + i] = w;
    }
  }
  std::vector<double> dens(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += K[static_cast<size_t>(i) * n + j];
    dens[i] = s;
  }
  // stored weight: k̃(x,y)/ε so the Laplacian is (D̃ − W̃)/ε
  auto csr = std::make_shared<Csr>();
  csr->n = n;
  csr->offsets.assign(n + 1, 0);
  for (int i = 0; i <= n; ++i) csr->offsets[i] = i * (n - 1);
  csr->cols.resize(static_cast<size_t>(n) * (n - 1));
  csr->vals.resize(static_cast<size_t>(n) * (n - 1));
  size_t p = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      csr->cols[p] = j;
      csr->vals[p] = K[static_cast<size_t>(i) * n + j] / (dens[i] * dens[j] * epsilon);
      ++p;
    }
  }
  Graph g;
  g.adj_ = csr;
  g.lap_ = laplacian_of(*csr);
  Tensor c = points.clone();
  g.coords_ = std::move(c);
  return g;
}

double Graph::default_bandwidth(int n, int intrinsic_dim) {
  if (n < 2 || intrinsic_dim < 1) throw std::invalid_argument("default_bandwidth: bad arguments");
  return std::pow(std::log(static_cast<double>(n)) / n, 2.0 / (intrinsic_dim + 6.0));
}

int Graph::num_edges() const {
  if (!adj_) return 0;
  return static_cast<int>(adj_->cols.size() / 2);
}

void Graph::set_coords(Tensor c) {
  if (c.rows() != n()) throw std::invalid_argument("set_coords: row count != node count");
  coords_ = std::move(c);
}

void Graph::save(std::ostream& os) const {
  os.precision(17);
  os << n() << " " << num_edges() << "\n";
  for (int i = 0; i < n(); ++i) {
    auto cols = adj_->row_cols(i);
    auto vals = adj_->row_vals(i);
    for (size_t k = 0; k < cols.size(); ++k)
      if (cols[k] > i) os << i << " " << cols[k] << " " << vals[k] << "\n";
  }
  if (coords_) {
    os << "coords " << coords_->cols() << "\n";
    for (int i = 0; i < coords_->rows(); ++i) {
      for (int j = 0; j < coords_->cols(); ++j) os << (j ? " " : "") << (*coords_)(i, j);
      os << "\n";
    }
  }
}

Graph Graph::load(std::istream& is) {
  int n = 0, m = 0;
  if (!(is >> n >> m)) throw std::runtime_error("graph load: bad header");
  std::vector<Edge> pairs;
  pairs.reserve(m);
  for (int k = 0; k < m; ++k) {
    Edge e;
    if (!(is >> e.i >> e.j >> e.w))
      throw std::runtime_error("graph load: truncated edge list at edge " + std::to_string(k));
    pairs.push_back(e);
  }
  Graph g = from_undirected(n, pairs);
  std::string word;
  if (is >> word) {
    if (word != "coords") throw std::runtime_error("graph load: expected 'coords', got '" + word + "'");
    int dim = 0;
    if (!(is >> dim)) throw std::runtime_error("graph load: bad coords header");
    Tensor c(n, dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dim; ++j)
        if (!(is >> c(i, j))) throw std::runtime_error("graph load: truncated coords");
    g.coords_ = std::move(c);
  }
  return g;
}

void Graph::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  save(os);
}

Graph Graph::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return load(is);
}

long KHopMask::total_entries() const {
  long t = 0;
  for (const auto& r : *rows) t += static_cast<long>(r.size());
  return t;
}

namespace {

KHopMask mask_from_adjacency(int n, const std::vector<std::vector<int>>& nbrs, int k) {
  auto rows = std::make_shared<std::vector<std::vector<int>>>(n);
  std::vector<int> dist(n);
  std::deque<int> queue;
  for (int s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[s] = 0;
    queue.clear();
    queue.push_back(s);
    auto& row = (*rows)[s];
    row.push_back(s);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      if (dist[u] == k) continue;
      for (int v : nbrs[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          row.push_back(v);
          queue.push_back(v);
        }
      }
    }
    std::sort(row.begin(), row.end());
  }
  KHopMask m;
  m.n = n;
  m.rows = std::move(rows);
  return m;
}

}  // namespace

KHopMask k_hop_mask(const Graph& g, int k) {
  if (k < 1) throw std::invalid_argument("k_hop_mask: k must be >= 1");
  std::vector<std::vector<int>> nbrs(g.n());
  for (int i = 0; i < g.n(); ++i) {
    auto cols = g.neighbors(i);
    nbrs[i].assign(cols.begin(), cols.end());  // CSR rows are already ascending
  }
  return mask_from_adjacency(g.n(), nbrs, k);
}

KHopMask k_hop_mask_with_extra(const Graph& g, int k, const EdgeSet& extra) {
  if (k < 1) throw std::invalid_argument("k_hop_mask: k must be >= 1");
  std::vector<std::set<int>> sets(g.n());
  for (int i = 0; i < g.n(); ++i)
    for (int j : g.neighbors(i)) sets[i].insert(j);
  for (const auto& [a, b] : extra) {
    if (a < 0 || a >= g.n() || b < 0 || b >= g.n() || a == b)
      throw std::invalid_argument("k_hop_mask_with_extra: bad extra edge");
    sets[a].insert(b);
    sets[b].insert(a);
  }
  std::vector<std::vector<int>> nbrs(g.n());
  for (int i = 0; i < g.n(); ++i) nbrs[i].assign(sets[i].begin(), sets[i].end());
  return mask_from_adjacency(g.n(), nbrs, k);
}

KHopMask full_mask(int n) {
  auto rows = std::make_shared<std::vector<std::vector<int>>>(n);
  for (int i = 0; i < n; ++i) {
    (*rows)[i].resize(n);
    for (int j = 0; j < n; ++j) (*rows)[i][j] = j;
  }
  return KHopMask{n, std::move(rows)};
}

KHopMask self_mask(int n) {
  auto rows = std::make_shared<std::vector<std::vector<int>>>(n);
  for (int i = 0; i < n; ++i) (*rows)[i] = {i};
  return KHopMask{n, std::move(rows)};
}

BoolMat mask_to_dense(const KHopMask& m) {
  BoolMat b(m.n, m.n, false);
  for (int i = 0; i < m.n; ++i)
    for (int j : m.row(i)) b.set(i, j, true);
  return b;
}

EdgeSet random_expander_edges(int n, int degree, uint64_t seed) {
  if (degree >= n) throw std::invalid_argument("random_expander_edges: degree must be < n");
  if ((static_cast<long>(n) * degree) % 2 != 0)
    throw std::invalid_argument("random_expander_edges: n*degree must be even");
  RngStream rng(substream_seed(seed, "expander", static_cast<uint64_t>(n), static_cast<uint64_t>(degree)));
  for (int attempt = 0; attempt < 100; ++attempt) {
    // configuration model: pair up degree stubs per node, reject on
    // self-loops or multi-edges
    std::vector<int> stubs;
    stubs.reserve(static_cast<size_t>(n) * degree);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < degree; ++d) stubs.push_back(i);
    rng.shuffle(stubs);
    std::set<std::pair<int, int>> edges;
    bool ok = true;
    for (size_t p = 0; p + 1 < stubs.size(); p += 2) {
      int a = stubs[p], b = stubs[p + 1];
      if (a == b) {
        ok = false;
        break;
      }
      if (a > b) std::swap(a, b);
      if (!edges.emplace(a, b).second) {
        ok = false;
        break;
      }
    }
    if (ok) return EdgeSet(edges.begin(), edges.end());
  }
  throw std::runtime_error("random_expander_edges: retries exhausted after 100 attempts");
}

std::pair<Graph, std::vector<int>> subsample_graph(const Graph& g, double fraction, uint64_t seed) {
  if (fraction <= 0.0 || fraction > 1.0)
    throw std::invalid_argument("subsample_graph: fraction must be in (0, 1]");
  const int keep_n = static_cast<int>(std::ceil(fraction * g.n()));
  if (keep_n < 2) throw std::invalid_argument("subsample_graph: fraction*n must be >= 2");
  RngStream rng(substream_seed(seed, "sampling", static_cast<uint64_t>(g.n())));
  std::vector<int> kept = rng.sample_without_replacement(g.n(), keep_n);
  std::vector<int> inv(g.n(), -1);
  for (int i = 0; i < keep_n; ++i) inv[kept[i]] = i;
  std::vector<Edge> pairs;
  for (int i = 0; i < g.n(); ++i) {
    if (inv[i] < 0) continue;
    auto cols = g.neighbors(i);
    auto vals = g.adjacency().row_vals(i);
    for (size_t k = 0; k < cols.size(); ++k)
      if (cols[k] > i && inv[cols[k]] >= 0) pairs.push_back({inv[i], inv[cols[k]], vals[k]});
  }
  Graph sub = Graph::from_undirected(keep_n, pairs);
  if (g.has_coords()) {
    Tensor c(keep_n, g.coords().cols());
    for (int i = 0; i < keep_n; ++i)
      for (int j = 0; j < c.cols(); ++j) c(i, j) = g.coords()(kept[i], j);
    sub.set_coords(std::move(c));
  }
  return {std::move(sub), std::move(kept)};
}

namespace {

// BFS distances in hops from s; -1 = unreachable
std::vector<int> bfs_hops(const Graph& g, int s) {
  std::vector<int> dist(g.n(), -1);
  std::deque<int> q;
  dist[s] = 0;
  q.push_back(s);
  while (!q.empty()) {
    const int u = q.front();
    q.pop_front();
    for (int v : g.neighbors(u)) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
    }
  }
  return dist;
}

}  // namespace

Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != g.n())
    throw std::invalid_argument("permute_graph: perm size mismatch");
  std::vector<Edge> pairs;
  for (int i = 0; i < g.n(); ++i) {
    auto cols = g.neighbors(i);
    auto vals = g.adjacency().row_vals(i);
    for (size_t k = 0; k < cols.size(); ++k)
      if (cols[k] > i) pairs.push_back({perm[i], perm[cols[k]], vals[k]});
  }
  Graph out = Graph::from_undirected(g.n(), pairs);
  if (g.has_coords()) {
    Tensor c(g.n(), g.coords().cols());
    for (int i = 0; i < g.n(); ++i)
      for (int j = 0; j < c.cols(); ++j) c(perm[i], j) = g.coords()(i, j);
    out.set_coords(std::move(c));
  }
  return out;
}

int diameter(const Graph& g) {
  int diam = 0;
  for (int s = 0; s < g.n(); ++s) {
    auto dist = bfs_hops(g, s);
    for (int d : dist) {
      if (d < 0) return -1;
      diam = std::max(diam, d);
    }
  }
  return diam;
}

bool is_connected(const Graph& g) {
  if (g.n() == 0) return true;
  auto dist = bfs_hops(g, 0);
  for (int d : dist)
    if (d < 0) return false;
  return true;
}

namespace {

Tensor spmm_right(const Tensor& x, std::shared_ptr<const Csr> m, const char* name) {
  if (x.cols() != m->n)
    throw std::invalid_argument(std::string(name) + ": x is " + x.shape_str() + " but matrix is " +
                                std::to_string(m->n) + "x" + std::to_string(m->n));
  const int d = x.rows(), n = m->n;
  Tensor out(d, n);
  // y[:, j] += x[:, i] * M(i, j); M symmetric
  for (int i = 0; i < n; ++i) {
    auto cols = m->row_cols(i);
    auto vals = m->row_vals(i);
    for (size_t k = 0; k < cols.size(); ++k) {
      const int j = cols[k];
      const double w = vals[k];
      for (int r = 0; r < d; ++r) out(r, j) += x(r, i) * w;
    }
  }
  if (!x.requires_grad()) return out;
  Tape* tape = x.tape();
  const int xnode = x.node();
  const int node = tape->record({xnode}, [xnode, m, d, n](const Tensor& g, Tape::Grads& grads) {
    // d/dx (x M) = g M^T = g M (symmetric)
    Tensor dx(d, n);
    for (int i = 0; i < n; ++i) {
      auto cols = m->row_cols(i);
      auto vals = m->row_vals(i);
      for (size_t k = 0; k < cols.size(); ++k) {
        const int j = cols[k];
        const double w = vals[k];
        for (int r = 0; r < d; ++r) dx(r, j) += g(r, i) * w;
      }
    }
    accumulate_grad(grads, xnode, dx);
  });
  return tape->adopt(std::move(out), node);
}

}  // namespace

Tensor spmm_right_laplacian(const Tensor& x, const Graph& g) {
  return spmm_right(x, g.laplacian_ptr(), "spmm_right_laplacian");
}

Tensor spmm_right_adjacency(const Tensor& x, const Graph& g) {
  return spmm_right(x, g.adjacency_ptr(), "spmm_right_adjacency");
}

}  // namespace gtx
