#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gtx/attention.hpp"
#include "gtx/graph.hpp"
#include "gtx/tensor.hpp"

namespace gtx {

// ---- losses -------------------------------------------------------------------

// Mean negative log-softmax of the true class over the (optionally masked)
// nodes; logits are classes x N.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<int>* node_mask = nullptr);

struct SpdPair {
  int src = 0, dst = 0;
  double spd = 0.0;
};
using PairSet = std::vector<SpdPair>;

// Mean over pairs of (||phi_i - phi_j||_1 - spd)^2; the l1 subgradient at
// ties is 0.
Tensor spd_metric_loss(const Tensor& embeddings, const PairSet& pairs);

// ---- optimizer ------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamState {
  std::vector<Tensor> m, v;
  long t = 0;
};

// Standard Adam with bias correction; decoupled weight decay. Aborts with the
// parameter's name on a non-finite gradient. Missing (empty) grads are
// treated as zero.
void adam_step(const std::vector<std::pair<std::string, Tensor*>>& params,
               const std::vector<Tensor>& grads, AdamState& state, const AdamConfig& cfg);

// ---- datasets -------------------------------------------------------------------

struct NodeDataset {
  Graph g;
  Tensor features;  // d_in x N
  std::vector<int> labels;
  int num_classes = 2;
  std::vector<int> train_idx, val_idx, test_idx;  // disjoint, sorted
};

struct GraphSlice {
  Graph g;
  Tensor features;
  std::vector<int> labels;
};

// induced subgraph with features/labels sliced through the kept-index map
GraphSlice induce_slice(const NodeDataset& data, const std::vector<int>& nodes);

// 45/10/45 split (or custom fractions), deterministic per seed
void split_nodes(int n, uint64_t seed, std::vector<int>& train, std::vector<int>& val,
                 std::vector<int>& test, double train_frac = 0.45, double val_frac = 0.10);

// 2-community geometric graph on the sphere with homophilic labels
// (hemispheres); features are the coordinates plus Gaussian noise and a few
// pure-noise channels.
struct CommunityParams {
  int n = 4000;
  double radius = 0.15;        // ambient connection radius
  double feature_noise = 0.5;
  int noise_dims = 2;
  uint64_t seed = 0;
};
NodeDataset make_community_dataset(const CommunityParams& p);

// Heterophilic variant: labels depend on the 2-hop neighborhood (mean of a
// hidden i.i.d. channel over N^{<=2}(i) plus a standardized neighborhood-size
// term), so masks and structural encodings matter; node features carry only
// the hidden channel, a weak leak of the label, and noise.
struct HeterophilicParams {
  int n = 2500;
  double radius = 0.15;
  double leak_flip = 0.4;       // probability the leak channel is wrong
  double structural_weight = 0.75;
  int noise_dims = 2;
  uint64_t seed = 0;
};
NodeDataset make_heterophilic_dataset(const HeterophilicParams& p);

// ---- training --------------------------------------------------------------------

struct TrainConfig {
  AdamConfig adam;
  int max_epochs = 200;
  int patience = 30;  // early stop on the validation metric
  uint64_t seed = 0;
  std::optional<double> norm_budget;  // spectral clamp of Q,K,V after steps
};

struct RunRecord {
  std::vector<double> train_loss;
  std::vector<double> val_metric;
  double test_metric = 0.0;
  double wallclock_s = 0.0;
  double seconds_per_epoch = 0.0;
  std::string config_echo;
  uint64_t seed = 0;
  int epochs_run = 0;
  bool diverged = false;
};

std::string run_record_to_log(const RunRecord& r);

struct TrainResult {
  ModelParams params;  // best-validation snapshot
  RunRecord record;
};

// Full-graph training of a node classifier with early stopping on validation
// accuracy. Deterministic per (config, seed).
TrainResult train_classifier(const ModelConfig& cfg, const GraphSlice& train, const GraphSlice& val,
                             const TrainConfig& tc);

// SPD metric-learning variant: embeddings trained against pair distances,
// validation metric is MAE (lower is better).
TrainResult train_spd(const ModelConfig& cfg, const Graph& g, const Tensor& features,
                      const PairSet& train_pairs, const PairSet& val_pairs, const TrainConfig& tc);

double classification_accuracy(const ModelConfig& cfg, const ModelParams& params,
                               const GraphSlice& slice, uint64_t pe_seed);

// k-hop mask for a model config (expander-edge union when configured)
KHopMask build_model_mask(const ModelConfig& cfg, const Graph& g, uint64_t seed);

// ---- experiment harnesses -----------------------------------------------------------

struct GridSpec {
  std::vector<double> alphas_train{0.25, 1.0};
  std::vector<double> alphas_test{1.0};
  int seeds = 5;
  uint64_t root_seed = 0;
};

struct GridCell {
  std::string model;
  double alpha_train = 1.0, alpha_test = 1.0;
  int seed = 0;
  double metric = 0.0;
  double wallclock_s = 0.0;
  double seconds_per_epoch = 0.0;
  bool failed = false;
  std::string error;
};

// Train on induced subsamples of the train/val splits at alpha_train,
// evaluate on the induced subsample of the test split at alpha_test; one cell
// per (model, alpha_train, alpha_test, seed). A failed cell is recorded, not
// fatal.
std::vector<GridCell> transferability_grid(
    const std::vector<std::pair<std::string, ModelConfig>>& models, const NodeDataset& data,
    const GridSpec& grid, const TrainConfig& tc, int threads = 1);

struct AblationRow {
  std::string variant;
  double metric = 0.0;          // median test accuracy over seeds
  std::string pct_vs_baseline;  // "--" for the baseline row
};

// Known variants: no_pe, rpearl, mask, mask+rpearl, mask+re, mask+rpearl+re.
ModelConfig ablation_variant_config(const ModelConfig& base, const std::string& variant);
std::string ablation_display_name(const std::string& variant);
std::string format_pct_vs_baseline(double metric, double baseline);

std::vector<AblationRow> ablation_run(const ModelConfig& base, const std::vector<std::string>& variants,
                                      const NodeDataset& data, double alpha, int seeds,
                                      const TrainConfig& tc, int threads = 1);

}  // namespace gtx
