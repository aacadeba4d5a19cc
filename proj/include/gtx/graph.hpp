#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gtx/tensor.hpp"

namespace gtx {

struct Edge {
  int i = 0, j = 0;
  double w = 1.0;
};

struct Csr {
  int n = 0;
  std::vector<int> offsets;  // n+1
  std::vector<int> cols;
  std::vector<double> vals;
  std::span<const int> row_cols(int i) const {
    return {cols.data() + offsets[i], static_cast<size_t>(offsets[i + 1] - offsets[i])};
  }
  std::span<const double> row_vals(int i) const {
    return {vals.data() + offsets[i], static_cast<size_t>(offsets[i + 1] - offsets[i])};
  }
};

// Immutable weighted undirected graph in CSR form with a cached Laplacian
// L = diag(A·1) − A. No self-loops are stored; weights are nonnegative.
// Safe to share across threads after construction.
class Graph {
 public:
  Graph() = default;

  // Build from a directed entry list that must be symmetric: for every
  // (i, j, w) the matching (j, i, w) must be present within 1e-12.
  static Graph from_symmetric_edges(int n, const std::vector<Edge>& entries);

  // Convenience builder: one entry per undirected pair.
  static Graph from_undirected(int n, const std::vector<Edge>& pairs);

  // Dense kernel graph on a point cloud (points: N x dim). Raw kernel
  // k(x,y) = exp(−‖x−y‖²/(4ε)), density-normalized k̃ = k/(d(x)d(y)) with
  // d(x) = Σ_y k(x,y) (self term included). Stored edge weights are k̃/ε so
  // that the cached Laplacian equals (D̃ − W̃)/ε.
  static Graph kernel_graph(const Tensor& points, double epsilon);

  // Default bandwidth ε = (log N / N)^(2/(d+6)) for intrinsic dimension d.
  static double default_bandwidth(int n, int intrinsic_dim);

  int n() const { return adj_ ? adj_->n : 0; }
  int num_edges() const;  // undirected count
  const Csr& adjacency() const { return *adj_; }
  const Csr& laplacian() const { return *lap_; }
  std::shared_ptr<const Csr> adjacency_ptr() const { return adj_; }
  std::shared_ptr<const Csr> laplacian_ptr() const { return lap_; }

  std::span<const int> neighbors(int i) const { return adj_->row_cols(i); }

  bool has_coords() const { return coords_.has_value(); }
  const Tensor& coords() const { return *coords_; }  // n x dim
  void set_coords(Tensor c);

  // plain-text edge list: header "n m", then "i j w" per undirected edge,
  // optional trailing block "coords dim" with one line per node
  void save(std::ostream& os) const;
  static Graph load(std::istream& is);
  void save_file(const std::string& path) const;
  static Graph load_file(const std::string& path);

 private:
  std::shared_ptr<const Csr> adj_;
  std::shared_ptr<const Csr> lap_;
  std::optional<Tensor> coords_;
};

// Per-node attendable sets: sorted ascending, always containing the node
// itself. Shared row storage so AD closures can capture masks cheaply.
struct KHopMask {
  int n = 0;
  std::shared_ptr<const std::vector<std::vector<int>>> rows;
  const std::vector<int>& row(int i) const { return (*rows)[i]; }
  long total_entries() const;
};

// Nodes reachable in <= k unweighted hops (BFS, ascending neighbor order),
// plus the node itself.
KHopMask k_hop_mask(const Graph& g, int k);

using EdgeSet = std::vector<std::pair<int, int>>;

// Mask over the union of g's edges and `extra` (hop expansion runs on the
// augmented adjacency).
KHopMask k_hop_mask_with_extra(const Graph& g, int k, const EdgeSet& extra);

KHopMask full_mask(int n);
KHopMask self_mask(int n);

// Boolean NxN view of a mask (test oracles, dense reference paths).
BoolMat mask_to_dense(const KHopMask& m);

// Random degree-regular simple graph via the configuration model with
// rejection; deterministic per seed. Throws after 100 rejected attempts.
EdgeSet random_expander_edges(int n, int degree, uint64_t seed);

// Induced subgraph on ceil(fraction*n) uniformly sampled nodes (without
// replacement); returns the kept original indices (ascending). Coords are
// sliced; feature slicing is the caller's job via the index map.
std::pair<Graph, std::vector<int>> subsample_graph(const Graph& g, double fraction, uint64_t seed);

// Relabel nodes: node i of g becomes node perm[i].
Graph permute_graph(const Graph& g, const std::vector<int>& perm);

// Graph diameter in hops (max BFS eccentricity); -1 if disconnected.
int diameter(const Graph& g);

bool is_connected(const Graph& g);

// y = x · L (x is D x N); differentiable in x. L is symmetric so the
// backward pass reuses the same product.
Tensor spmm_right_laplacian(const Tensor& x, const Graph& g);

// y = x · A (adjacency version)
Tensor spmm_right_adjacency(const Tensor& x, const Graph& g);

}  // namespace gtx
