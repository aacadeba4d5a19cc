#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gtx/graph.hpp"
#include "gtx/pe.hpp"
#include "gtx/tensor.hpp"

namespace gtx {

// One transformer layer's parameters. Heads share d_head; feedforward is the
// conventional two-matrix block restored around the attention (the analysis
// omits it, trained models use it).
struct HeadParams {
  Tensor q, k, v;  // each d_head x d_model
};

struct AttentionParams {
  std::vector<HeadParams> heads;
  Tensor out_proj;  // d_model x heads*d_head
  Tensor ff1, ff2;  // d_ff x d_model, d_model x d_ff
  Nonlinearity ff_act = Nonlinearity::Relu;
};

// Instrumentation hook: implied attention-weight row sums and minimum weight,
// aggregated over heads/rows of one forward call.
struct AttnStats {
  double max_row_sum_dev = 0.0;  // max |row sum - 1| over softmax rows
  double min_weight = 1.0;
};

struct DropoutCtx {
  double hidden = 0.0;
  double attn = 0.0;
  RngStream* rng = nullptr;
  bool training = false;
};

// Multi-head scaled dot-product attention over all node pairs:
// per head, scores = (Q_h x)^T (K_h x) / sqrt(d_head) (unscaled when
// scaled=false), row-softmax over attended-to nodes, output V_h x A^T;
// heads concatenated then projected by out_proj.
Tensor dense_attention(const AttentionParams& p, const Tensor& x, bool scaled = true,
                       const DropoutCtx* drop = nullptr, AttnStats* stats = nullptr);

// Identical semantics restricted per row to the mask entries; cost is
// proportional to the total mask size and the dense score matrix is never
// materialized.
Tensor sparse_attention(const AttentionParams& p, const Tensor& x, const KHopMask& mask,
                        bool scaled = true, const DropoutCtx* drop = nullptr,
                        AttnStats* stats = nullptr);

// Fused masked attention primitive on already-projected q, k, v (d x N each).
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const KHopMask& mask,
                        double scale_factor, double attn_dropout = 0.0, RngStream* rng = nullptr,
                        bool training = false, AttnStats* stats = nullptr);

// Pre-norm residual transformer layer:
//   h = x + Attn(LN(x)); out = h + FFN(LN(h))
Tensor gt_layer(const AttentionParams& p, const Tensor& x, const KHopMask* mask, bool scaled = true,
                const DropoutCtx* drop = nullptr, AttnStats* stats = nullptr);

enum class Mode { DenseGT, SparseGT, GnnBaseline, MlpBaseline };

struct TaskHead {
  enum class Kind { Classify, Embed };
  Kind kind = Kind::Classify;
  int dim = 2;  // num_classes or embedding dim
};

struct ModelConfig {
  Mode mode = Mode::SparseGT;
  int layers = 2;
  int heads = 2;
  int d_model = 32;
  int d_ff = 64;
  int hops = 2;  // sparse mode
  int d_in = 0;  // input feature dim
  bool use_pe = true;
  PEConfig pe;
  double dropout = 0.0;
  double attn_dropout = 0.0;
  TaskHead head;
  bool unscaled_scores = false;       // unscaled scores for the convergence runs
  int expander_degree = 0;            // >0: union random expander edges into the mask
  std::optional<double> norm_budget;  // spectral clamp for Q,K,V after steps

  int d_head() const { return d_model / heads; }
  void validate() const;
};

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& s);

struct ModelParams {
  Tensor w_in;                            // d_model x d_in
  Tensor w_pe;                            // d_model x pe.out_dim
  PEParams pe;
  std::vector<AttentionParams> gt_layers;
  std::vector<FilterBank> gnn_layers;
  Nonlinearity gnn_act = Nonlinearity::Relu;
  std::vector<Tensor> mlp_layers;
  Tensor w_head;                          // head.dim x d_model

  // declaration order; names are stable and used in diagnostics + checkpoints
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  void bind_all(Tape& tape);
  void unbind_all();
  ModelParams clone() const;
  long num_scalars() const;
};

ModelParams init_model_params(const ModelConfig& cfg, uint64_t seed);

struct ForwardOpts {
  const KHopMask* mask = nullptr;               // required for SparseGT
  DropoutCtx drop;                              // training dropout
  const std::vector<Tensor>* pe_ids = nullptr;  // conditional-equivariance hook
  uint64_t pe_seed = 0;                         // used when pe_ids is null
  AttnStats* stats = nullptr;
};

// Positional encodings (when configured) are projected and added to the
// projected node features; layers applied per mode; the task head emits
// logits (classes x N) or embeddings (dim x N).
Tensor model_forward(const ModelConfig& cfg, const ModelParams& params, const Graph& g,
                     const Tensor& features, const ForwardOpts& opts = {});

// Power-iteration estimate of the largest singular value (50 iterations).
double spectral_norm(const Tensor& m, int iters = 50);

// Clamp spectral norms of all Q, K, V matrices to <= budget (in place).
void clamp_qkv_norms(ModelParams& params, double budget);
double max_qkv_norm(const ModelParams& params);

// Flat binary checkpoint: magic "GTTX1", length-prefixed manifest (config
// echo), then raw little-endian f64 arrays in declaration order.
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params);
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path);

std::string model_config_to_text(const ModelConfig& cfg);
ModelConfig model_config_from_text(const std::string& text);

}  // namespace gtx
