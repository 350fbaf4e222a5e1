#pragma once

// The differentiable tracker network: graph-conv backbone, L transformer
// layers (memory self-attention -> hybrid-scale cross-attention ->
// contextual-point self-attention), a voting head and the five-term loss.

#include <array>
#include <cstdint>
#include <vector>

#include "hvtrack/autograd.hpp"
#include "hvtrack/dataset.hpp"
#include "hvtrack/geometry.hpp"
#include "hvtrack/memory_bank.hpp"
#include "hvtrack/model_config.hpp"
#include "hvtrack/params.hpp"

namespace hvt {

// ---- point utilities -------------------------------------------------------

// Deterministic farthest point sampling: starts at index 0, picks the first
// index attaining the max distance (duplicate points get distance 0, so
// duplicates are only revisited once everything else is exhausted).
std::vector<std::size_t> farthest_point_sample(const Tensor& pts, std::size_t count);

// k nearest refs for every query, ascending distance, ties by index.
// Returned flattened: queries.rows * k entries.
std::vector<std::size_t> knn_indices(const Tensor& queries, const Tensor& refs,
                                     std::size_t k);

// ---- shared attention block ------------------------------------------------

struct MhaOut {
  ag::Var out;       // q_rows x width
  Tensor attn_mean;  // q_rows x kv_rows, head-averaged map (row-stochastic)
};

// Scaled dot-product attention with `heads` heads over the given width.
MhaOut multi_head_attention(const ag::Var& q, const ag::Var& k, const ag::Var& v,
                            std::size_t heads);

// ---- module outputs ----------------------------------------------------------

struct FeatureMapT {
  Tensor coords;  // n x 3, canonical frame
  ag::Var feats;  // n x c
};

struct AttentionBundle {
  Tensor attn_base;   // n x (k*n), row-stochastic
  Tensor attn_expan;  // n x (k*n/8), row-stochastic
};

struct RpmOut {
  ag::Var features;  // (k*n) x c template features
  Tensor coords;     // (k*n) x 3 stored coordinates
};

struct PredictionT {
  Box7 box_local;     // size copied from the template, never regressed
  Tensor mask;        // n x 1 probabilities
  Tensor targetness;  // n x 1 probabilities
  ObservationAngle alpha;
  Vec3 coarse_center;
  // graph handles for the loss
  ag::Var mask_var;
  ag::Var targetness_var;
  ag::Var alpha_var;          // 1 x 2, unit norm
  ag::Var coarse_center_var;  // 1 x 3
  ag::Var center_var;         // 1 x 3
  ag::Var yaw_var;            // 1 x 1
};

struct ForwardResult {
  PredictionT pred;
  Tensor seed_coords;                     // n x 3 backbone seed coordinates
  std::vector<Tensor> layer_inputs;       // L tensors n x c (memory payload)
  std::vector<ag::Var> layer_inputs_var;  // live handles (flow-through study)
  std::vector<AttentionBundle> bundles;   // per layer
};

// ---- forward passes ----------------------------------------------------------

// Farthest-point seeds + edge-feature max-pool graph conv: n_in points in,
// n seeds with c channels out.
FeatureMapT backbone_forward(const Tensor& points, const ParamStore& p,
                             const ModelConfig& cfg);

// Template features from the three banks for one layer. Throws on empty memory.
RpmOut rpm_forward(const MemoryState& mem, std::size_t layer, const ParamStore& p,
                   const ModelConfig& cfg, Rng& rng, bool train);

// Hybrid-scale cross-attention from the search features to the template.
std::pair<ag::Var, AttentionBundle> bea_forward(const FeatureMapT& x, const RpmOut& mem,
                                                const ParamStore& p, const ModelConfig& cfg,
                                                std::size_t layer, Rng& rng, bool train);

// Importance-guided contextual-point self-attention.
ag::Var cpa_forward(const ag::Var& xhat, const Tensor& coords, const AttentionBundle& bundle,
                    const ParamStore& p, const ModelConfig& cfg, std::size_t layer,
                    Rng& rng, bool train);

// Derives the per-point importance used by cpa_forward from the bundle:
// attention received per point (column-normalized maps averaged over keys).
std::vector<double> cpa_importance(const AttentionBundle& bundle);

// Exposed for the grouping hand-trace: stable descending sort by importance,
// contiguous groups of cfg.group_sizes, ties broken by original index.
std::vector<std::size_t> cpa_grouping_order(const std::vector<double>& importance);

// The contextual points cpa_forward attends over: points sorted by
// importance, partitioned into the configured groups and compressed to each
// group's cluster budget. Returns xhat itself when use_cpa is off.
ag::Var cpa_context(const ag::Var& xhat, const AttentionBundle& bundle,
                    const ParamStore& p, const ModelConfig& cfg, std::size_t layer);

// Per-point voting head; box size is copied from template_size.
PredictionT rpn_forward(const ag::Var& feats, const Tensor& coords,
                        const std::array<double, 3>& template_size, const ParamStore& p,
                        const ModelConfig& cfg);

// Full pass: backbone, L transformer layers, voting head. dropout_seed only
// matters in train mode; eval mode is deterministic.
ForwardResult hvtrack_forward(const Tensor& points, const MemoryState& mem,
                              const ParamStore& p, const ModelConfig& cfg,
                              const std::array<double, 3>& template_size,
                              std::uint64_t dropout_seed, bool train);

// ---- loss ---------------------------------------------------------------------

struct LossBreakdown {
  double l_cc = 0, l_mask = 0, l_alpha = 0, l_rm = 0, l_box = 0;
  double total = 0;
  ag::Var total_var;
};

LossBreakdown compute_loss(const ForwardResult& fwd, const SearchSample& sample,
                           const ModelConfig& cfg);

}  // namespace hvt
