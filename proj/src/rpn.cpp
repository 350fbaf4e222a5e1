#include <algorithm>
#include <stdexcept>

#include "hvtrack/network.hpp"

namespace hvt {

namespace {

ag::Var linear(const ag::Var& x, const ParamStore& p, const std::string& prefix) {
  return ag::add_rowvec(ag::matmul(x, p.get(prefix + "_w")), p.get(prefix + "_b"));
}

// weighted column mean: sum_i w_i x_i / sum_i w_i
ag::Var weighted_mean(const ag::Var& x, const ag::Var& w) {
  return ag::div_by_scalar(ag::col_sum(ag::mul_colvec(x, w)), ag::sum_all(w));
}

}  // namespace

PredictionT rpn_forward(const ag::Var& feats, const Tensor& coords,
                        const std::array<double, 3>& template_size, const ParamStore& p,
                        const ModelConfig& cfg) {
  const std::size_t n = feats.rows();
  if (coords.rows != n || coords.cols != 3)
    throw std::invalid_argument("rpn_forward: coords shape mismatch");

  ag::Var trunk = ag::relu(linear(feats, p, "rpn.trunk"));

  ag::Var mask = ag::sigmoid(linear(trunk, p, "rpn.mask"));
  ag::Var targetness = ag::sigmoid(linear(trunk, p, "rpn.target"));
  // per-point offsets vote for the center relative to the point itself
  ag::Var votes = ag::add(linear(trunk, p, "rpn.center"), ag::constant(coords));
  ag::Var yaw_votes = linear(trunk, p, "rpn.yaw");
  ag::Var alpha_votes = linear(trunk, p, "rpn.alpha");

  // all-zero weights fall back to an unweighted mean
  double wsum = 0;
  for (double v : targetness.val().v) wsum += v;
  ag::Var w_full =
      wsum > 1e-12 ? targetness : ag::constant(Tensor::full(n, 1, 1.0));

  ag::Var coarse = weighted_mean(votes, w_full);

  // final pose: votes gated to points with targetness at or above the median
  std::vector<double> t_sorted = targetness.val().v;
  std::nth_element(t_sorted.begin(), t_sorted.begin() + std::ptrdiff_t(t_sorted.size() / 2),
                   t_sorted.end());
  const double median = t_sorted[t_sorted.size() / 2];
  Tensor gate(n, 1);
  double gate_mass = 0;
  for (std::size_t i = 0; i < n; ++i) {
    gate.at(i, 0) = targetness.val().at(i, 0) >= median ? 1.0 : 0.0;
    gate_mass += gate.at(i, 0) * targetness.val().at(i, 0);
  }
  ag::Var w_gated = gate_mass > 1e-12 ? ag::mul(w_full, ag::constant(std::move(gate)))
                                      : w_full;

  ag::Var center = weighted_mean(votes, w_gated);
  ag::Var yaw = weighted_mean(yaw_votes, w_gated);
  ag::Var alpha = ag::l2_normalize_rows(weighted_mean(alpha_votes, w_full));

  PredictionT out;
  out.mask = mask.val();
  out.targetness = targetness.val();
  out.alpha = {alpha.val().at(0, 0), alpha.val().at(0, 1)};
  out.coarse_center = {coarse.val().at(0, 0), coarse.val().at(0, 1), coarse.val().at(0, 2)};
  out.box_local = Box7(center.val().at(0, 0), center.val().at(0, 1), center.val().at(0, 2),
                       template_size[0], template_size[1], template_size[2],
                       wrap_angle(yaw.val().at(0, 0)));
  out.mask_var = mask;
  out.targetness_var = targetness;
  out.alpha_var = alpha;
  out.coarse_center_var = coarse;
  out.center_var = center;
  out.yaw_var = yaw;
  (void)cfg;
  return out;
}

}  // namespace hvt
