#pragma once

// Adam optimizer and the teacher-forced sequence training loop.

#include <cstdint>
#include <string>
#include <vector>

#include "hvtrack/dataset.hpp"
#include "hvtrack/params.hpp"

namespace hvt {

class Adam {
 public:
  Adam(ParamStore& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();  // consumes accumulated gradients, then zeroes them

 private:
  ParamStore& params_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

struct TrainConfig {
  double lr = 0.001;
  int steps = 500;
  int batch_size = 1;
  int seq_len = 8;       // frames per training sequence
  std::uint64_t seed = 1;
  std::string loss_log_path;  // optional "step total l_cc l_mask l_alpha l_rm l_box" log
};

TrainConfig train_config_from_text(const std::string& text);
std::string to_text(const TrainConfig& cfg);

struct TrainResult {
  double initial_loss = 0;
  double final_loss = 0;
  int steps_run = 0;
};

// Windows of seq_len frames with random starts; the reference box for each
// crop is the previous ground-truth box (teacher forcing) while the banks
// hold the model's own predictions with capacity k_train. Aborts on a
// non-finite loss.
TrainResult train(ParamStore& params, const ModelConfig& cfg,
                  const std::vector<Tracklet>& tracklets, const TrainConfig& tc,
                  int interval);

}  // namespace hvt
