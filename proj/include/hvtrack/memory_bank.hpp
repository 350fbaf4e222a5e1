#pragma once

// The tracker's template: rolling FIFO banks of per-layer features, predicted
// foreground masks and observation angles, plus the canonical coordinates of
// the stored points (consumed by the positional embeddings). All three banks
// always share one fill count and entry order (oldest first).

#include <cstddef>
#include <vector>

#include "hvtrack/autograd.hpp"
#include "hvtrack/model_config.hpp"
#include "hvtrack/tensor.hpp"

namespace hvt {

struct MemoryEntry {
  std::vector<Tensor> layer_feats;  // one n x c tensor per transformer layer
  Tensor mask;                      // n x 1 in [0,1]
  Tensor alpha;                     // 1 x 2, unit norm
  Tensor coords;                    // n x 3 canonical coordinates
  // live graph handles, only populated when detach_memory is disabled
  std::vector<ag::Var> layer_feats_var;
  ag::Var mask_var;
  ag::Var alpha_var;
};

class MemoryState {
 public:
  std::size_t fill() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

  // FIFO: evicts the oldest entry once capacity is exceeded
  void push(MemoryEntry entry, std::size_t capacity);

  void check(const ModelConfig& cfg) const;  // shape / norm invariants

 private:
  std::vector<MemoryEntry> entries_;
};

// Concatenated per-layer views over the fill (k entries -> k*n rows).
struct MemoryViews {
  ag::Var layer_feats;  // kn x c
  ag::Var masks;        // kn x 1
  ag::Var angles;       // kn x 2 (per-entry alpha repeated n times)
  Tensor coords;        // kn x 3
};

// When use_om is false the angle channel is zeroed (shape preserved).
MemoryViews memory_views(const MemoryState& mem, std::size_t layer,
                         const ModelConfig& cfg);

}  // namespace hvt
