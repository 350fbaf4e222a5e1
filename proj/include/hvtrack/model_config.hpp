#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hvt {

// Every knob of the network and loss in one place. The shipped defaults are
// the full-size configuration (n = c = 128, two transformer layers, four
// heads, memory 2 in training / 6 at test time).
struct ModelConfig {
  std::size_t n = 128;       // points kept by the backbone
  std::size_t c = 128;       // feature channels
  std::size_t layers = 2;    // stacked transformer layers
  std::size_t heads = 4;
  std::size_t k_train = 2;   // memory size while training
  std::size_t k_test = 6;    // memory size at inference
  std::vector<std::size_t> group_sizes{32, 64, 32};        // importance groups
  std::vector<std::size_t> contextual_counts{4, 32, 16};   // cluster budgets
  std::size_t n_in = 1024;   // sampled search-area points
  std::size_t backbone_knn = 16;
  std::size_t ffn_hidden = 0;  // 0 -> 2*c
  double dropout_rate = 0.1;
  double gamma_cc = 10.0;
  double gamma_mask = 0.2;
  double gamma_alpha = 1.0;
  double gamma_rm = 1.0;
  double gamma_box = 1.0;
  bool use_om = true;   // observation-angle memory channel
  bool use_bea = true;  // hybrid-scale cross-attention (false: vanilla CA)
  bool use_cpa = true;  // contextual-point self-attention (false: vanilla SA)
  bool detach_memory = true;  // stop gradients at the memory banks
  double vertical_enlarge = -1.0;  // crop height margin; <0 mirrors the w/l offset
  double synth_offset = 2.0;       // search enlargement for Synthetic tracklets
  std::uint64_t init_seed = 1;     // weight initialization seed

  std::size_t head_dim() const { return c / heads; }
  std::size_t groups() const { return group_sizes.size(); }
  std::size_t contextual_total() const;
  std::size_t ffn_dim() const { return ffn_hidden ? ffn_hidden : 2 * c; }
  // expansion-branch key count for a memory fill k
  std::size_t expansion_size(std::size_t fill) const { return fill * n / 8; }
  // cluster budget for descending-importance group g: the least important
  // group takes contextual_counts[0], so budgets pair up in reverse
  std::size_t budget_for_group(std::size_t g) const {
    return contextual_counts[contextual_counts.size() - 1 - g];
  }
};

void validate(const ModelConfig& cfg);  // throws std::invalid_argument

// plain "key = value" text; unknown keys are rejected
ModelConfig model_config_from_text(const std::string& text);
std::string to_text(const ModelConfig& cfg);
ModelConfig load_model_config(const std::string& path);
void save_model_config(const ModelConfig& cfg, const std::string& path);

// Fields that determine parameter shapes and wiring must match between a
// checkpoint and the requesting config; runtime fields (k_test, dropout,
// loss weights, crop margins) may differ. Throws with the offending field.
void check_structural_match(const ModelConfig& saved, const ModelConfig& requested);

}  // namespace hvt
