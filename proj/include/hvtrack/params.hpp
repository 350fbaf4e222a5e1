#pragma once

// Named parameter store and the checkpoint container. Parameters are
// autograd leaves; registration order is fixed by init_params so training
// and serialization are deterministic.

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hvtrack/autograd.hpp"
#include "hvtrack/model_config.hpp"

namespace hvt {

class ParamStore {
 public:
  ag::Var add(const std::string& name, Tensor init);
  const ag::Var& get(const std::string& name) const;  // throws on missing
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::pair<std::string, ag::Var>>& items() const { return items_; }
  std::vector<std::pair<std::string, ag::Var>>& items() { return items_; }
  std::size_t total_elements() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, ag::Var>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// All network weights for a config, Xavier-uniform from cfg.init_seed.
ParamStore init_params(const ModelConfig& cfg);

// Binary checkpoint: magic, version, config text echo, named f64 tensors.
// load_checkpoint refuses mismatched structural configs (see
// check_structural_match); save->load round-trips values bit-exactly.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParamStore& params);
std::pair<ModelConfig, ParamStore> load_checkpoint(const std::string& path);
// variant that validates against a requested config (runtime fields of
// `requested` win, e.g. k_test sweeps)
std::pair<ModelConfig, ParamStore> load_checkpoint(const std::string& path,
                                                   const ModelConfig& requested);

}  // namespace hvt
