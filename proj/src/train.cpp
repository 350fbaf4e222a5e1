#include "hvtrack/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hvtrack/network.hpp"
#include "hvtrack/tracker.hpp"

namespace hvt {

Adam::Adam(ParamStore& params, double lr, double beta1, double beta2, double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [name, var] : params.items()) {
    m_.emplace_back(var.val().rows, var.val().cols);
    v_.emplace_back(var.val().rows, var.val().cols);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  std::size_t i = 0;
  for (auto& [name, var] : params_.items()) {
    Tensor& value = var.leaf_value();
    var.node()->ensure_grad();
    const Tensor& g = var.grad();
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < value.numel(); ++j) {
      m.v[j] = beta1_ * m.v[j] + (1.0 - beta1_) * g.v[j];
      v.v[j] = beta2_ * v.v[j] + (1.0 - beta2_) * g.v[j] * g.v[j];
      const double mh = m.v[j] / bc1;
      const double vh = v.v[j] / bc2;
      value.v[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
    ++i;
  }
  params_.zero_grads();
}

TrainConfig train_config_from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key, eq, val;
    if (!(ls >> key)) continue;
    if (!(ls >> eq >> val) || eq != "=")
      throw std::invalid_argument("train config: expected 'key = value', got '" + line + "'");
    if (key == "lr") cfg.lr = std::stod(val);
    else if (key == "steps") cfg.steps = std::stoi(val);
    else if (key == "batch_size") cfg.batch_size = std::stoi(val);
    else if (key == "seq_len") cfg.seq_len = std::stoi(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else throw std::invalid_argument("train config: unknown key '" + key + "'");
  }
  if (cfg.lr <= 0 || cfg.steps < 1 || cfg.batch_size < 1 || cfg.seq_len < 1)
    throw std::invalid_argument("train config: lr, steps, batch_size, seq_len must be positive");
  return cfg;
}

std::string to_text(const TrainConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "lr = " << cfg.lr << '\n'
      << "steps = " << cfg.steps << '\n'
      << "batch_size = " << cfg.batch_size << '\n'
      << "seq_len = " << cfg.seq_len << '\n'
      << "seed = " << cfg.seed << '\n';
  return out.str();
}

namespace {

// loss over one teacher-forced window; returns the number of scored frames
std::size_t window_loss(const Tracklet& t, std::size_t start, int seq_len,
                        ParamStore& params, const ModelConfig& cfg, double offset,
                        std::uint64_t seed, std::vector<ag::Var>& losses,
                        LossBreakdown* first_terms) {
  const double voff = vertical_offset_for(offset, cfg);
  const Vec3& sensor = t.sensor_origin;
  const std::size_t end = std::min(t.frames.size(), start + std::size_t(seq_len));

  TrackerState state =
      init_track(t.frames[start], sensor, params, cfg, offset, mix_seed(seed, 0), true);

  std::size_t scored = 0;
  for (std::size_t i = start; i < end; ++i) {
    // crop around the previous ground-truth box (frame 0 around its own)
    const Box7& ref = t.frames[i == start ? i : i - 1].gt_box;
    const auto sample =
        make_search_sample(t.frames[i].cloud, ref, offset, voff, cfg.n_in,
                           mix_seed(seed, 100 + i), t.frames[i].gt_box, sensor);
    if (!sample) continue;  // empty crop: nothing to learn from this frame

    ForwardResult fwd = hvtrack_forward(sample->points, state.memory, params, cfg,
                                        state.template_size, mix_seed(seed, 200 + i), true);
    LossBreakdown lb = compute_loss(fwd, *sample, cfg);
    if (first_terms && losses.empty()) *first_terms = lb;
    losses.push_back(lb.total_var);
    ++scored;

    // banks store the model's own predictions
    MemoryEntry e;
    e.layer_feats = fwd.layer_inputs;
    e.mask = fwd.pred.mask;
    const double nrm = std::hypot(fwd.pred.alpha.sin_a, fwd.pred.alpha.cos_a);
    e.alpha = nrm < 1e-9 ? Tensor(1, 2, {0.0, 1.0})
                         : Tensor(1, 2, {fwd.pred.alpha.sin_a / nrm,
                                         fwd.pred.alpha.cos_a / nrm});
    e.coords = fwd.seed_coords;
    if (!cfg.detach_memory) {
      e.layer_feats_var = fwd.layer_inputs_var;
      e.mask_var = fwd.pred.mask_var;
      e.alpha_var = fwd.pred.alpha_var;
    }
    state.memory.push(std::move(e), cfg.k_train);
  }
  return scored;
}

}  // namespace

TrainResult train(ParamStore& params, const ModelConfig& cfg,
                  const std::vector<Tracklet>& tracklets, const TrainConfig& tc,
                  int interval) {
  if (tracklets.empty()) throw std::invalid_argument("train: no tracklets");
  Rng rng(tc.seed);
  Adam opt(params, tc.lr);

  std::ofstream log;
  if (!tc.loss_log_path.empty()) {
    log.open(tc.loss_log_path);
    if (!log) throw std::runtime_error("cannot write loss log: " + tc.loss_log_path);
    log.precision(10);
    log << "# step total l_cc l_mask l_alpha l_rm l_box\n";
  }

  TrainResult result;
  params.zero_grads();
  for (int step_i = 0; step_i < tc.steps; ++step_i) {
    std::vector<ag::Var> losses;
    LossBreakdown terms{};
    for (int b = 0; b < tc.batch_size; ++b) {
      // random tracklet and window start; retry bounded times on empty inits
      for (int attempt = 0; attempt < 16; ++attempt) {
        const Tracklet& t = tracklets[rng.index(tracklets.size())];
        const std::size_t max_start =
            t.frames.size() > std::size_t(tc.seq_len) ? t.frames.size() - tc.seq_len : 0;
        const std::size_t start = max_start ? rng.index(max_start + 1) : 0;
        try {
          if (window_loss(t, start, tc.seq_len, params, cfg,
                          search_offset_for(t.category, interval, cfg),
                          rng.next_u64(), losses, b == 0 ? &terms : nullptr))
            break;
        } catch (const std::runtime_error&) {
          // empty first-frame crop: resample a window
        }
      }
    }
    if (losses.empty()) throw std::runtime_error("train: no usable training windows");

    ag::Var total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i) total = ag::add(total, losses[i]);
    total = ag::scale(total, 1.0 / double(losses.size()));

    const double loss_value = total.val().v[0];
    if (!std::isfinite(loss_value))
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step_i) +
                               " (l_cc=" + std::to_string(terms.l_cc) +
                               ", l_box=" + std::to_string(terms.l_box) + ")");
    if (step_i == 0) result.initial_loss = loss_value;
    result.final_loss = loss_value;

    ag::backward(total);
    opt.step();
    ++result.steps_run;

    if (log.is_open())
      log << step_i << ' ' << loss_value << ' ' << terms.l_cc << ' ' << terms.l_mask << ' '
          << terms.l_alpha << ' ' << terms.l_rm << ' ' << terms.l_box << '\n';
  }
  return result;
}

}  // namespace hvt
