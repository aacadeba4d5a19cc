#pragma once

#include <string>
#include <vector>

#include "gtx/graph.hpp"
#include "gtx/train.hpp"

namespace gtx {

struct ElevationGrid {
  int nrows = 0, ncols = 0;
  double cell_size = 1.0;
  std::vector<double> elevations;  // row-major
  double at(int i, int j) const { return elevations[static_cast<size_t>(i) * ncols + j]; }
  double& at(int i, int j) { return elevations[static_cast<size_t>(i) * ncols + j]; }
  int node(int i, int j) const { return i * ncols + j; }
  int n() const { return nrows * ncols; }
};

// ASCII format: line 1 "nrows ncols cell_size", then nrows lines of ncols
// elevations.
ElevationGrid load_dem(const std::string& path);
void save_dem(const std::string& path, const ElevationGrid& grid);
ElevationGrid parse_dem(const std::string& text);
std::string dem_to_text(const ElevationGrid& grid);

// Deterministic multi-Gaussian-hill fixture terrain.
ElevationGrid make_hill_dem(int nrows, int ncols, double cell_size, int hills, uint64_t seed);

// keeps cells (i*r, j*r); cell_size scales by r
ElevationGrid downsample_grid(const ElevationGrid& grid, int stride);

// Nodes are cells with 3-D coords (x = j*cell, y = i*cell, z = elevation);
// edges to the 8 lattice neighbors, weighted by 3-D Euclidean length.
Graph grid_graph_8nn(const ElevationGrid& grid);

// Exact single-source shortest-path distances; unreachable = +inf.
std::vector<double> dijkstra_spd(const Graph& g, int source);

enum class PairStrategy { Uniform, MaxHeightSources };

// Sampled (source, target) pairs with exact Dijkstra labels; disconnected
// pairs are dropped (count reported through dropped_count when non-null).
PairSet sample_pairs(const Graph& g, int n_sources, int n_targets_per_source,
                     PairStrategy strategy, uint64_t seed, int* dropped_count = nullptr);

// Node features for the SPD model: 3-D coordinates normalized to [0,1]^3.
Tensor terrain_features(const Graph& g);

struct SpdMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double relative_error = 0.0;  // mean |pred-spd|/spd over pairs with spd > 0
};

SpdMetrics evaluate_spd_model(const ModelConfig& cfg, const ModelParams& params, const Graph& g,
                              const PairSet& pairs, uint64_t pe_seed);

// straight-line 3-D distance baseline
SpdMetrics euclidean_baseline(const Graph& g, const PairSet& pairs);

}  // namespace gtx
