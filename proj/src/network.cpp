#include <cmath>

#include "hvtrack/network.hpp"

namespace hvt {

ForwardResult hvtrack_forward(const Tensor& points, const MemoryState& mem,
                              const ParamStore& p, const ModelConfig& cfg,
                              const std::array<double, 3>& template_size,
                              std::uint64_t dropout_seed, bool train) {
  if (mem.empty()) throw std::runtime_error("hvtrack_forward: memory not initialized");
  Rng rng(dropout_seed);

  FeatureMapT fm = backbone_forward(points, p, cfg);
  ForwardResult res;
  res.seed_coords = fm.coords;

  ag::Var x = fm.feats;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    // the layer input is what the feature memory bank stores
    res.layer_inputs.push_back(x.val());
    res.layer_inputs_var.push_back(x);

    RpmOut mem_feats = rpm_forward(mem, l, p, cfg, rng, train);
    auto [xhat, bundle] = bea_forward({fm.coords, x}, mem_feats, p, cfg, l, rng, train);
    x = cpa_forward(xhat, fm.coords, bundle, p, cfg, l, rng, train);
    res.bundles.push_back(std::move(bundle));
  }

  res.pred = rpn_forward(x, fm.coords, template_size, p, cfg);
  return res;
}

LossBreakdown compute_loss(const ForwardResult& fwd, const SearchSample& sample,
                           const ModelConfig& cfg) {
  const PredictionT& pred = fwd.pred;
  const std::size_t n = pred.mask_var.rows();

  // mask/targetness targets live on the backbone seeds
  PointCloud seed_pts;
  seed_pts.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    seed_pts.points.push_back({fwd.seed_coords.at(i, 0), fwd.seed_coords.at(i, 1),
                               fwd.seed_coords.at(i, 2)});
  const auto seed_fg = foreground_mask(seed_pts, sample.gt_box_local);
  Tensor fg(n, 1);
  for (std::size_t i = 0; i < n; ++i) fg.at(i, 0) = double(seed_fg[i]);

  const Box7& gt = sample.gt_box_local;
  Tensor gt_center(1, 3, {gt.cx, gt.cy, gt.cz});
  Tensor gt_alpha(1, 2, {sample.gt_alpha.sin_a, sample.gt_alpha.cos_a});

  ag::Var l_cc = ag::mse_mean(pred.coarse_center_var, gt_center);
  ag::Var l_mask = ag::bce_mean(pred.mask_var, fg);
  ag::Var l_alpha = ag::huber_mean(pred.alpha_var, gt_alpha, 1.0);
  ag::Var l_rm = ag::bce_mean(pred.targetness_var, fg);

  // box residual: center delta and wrapped yaw delta against zero
  ag::Var box_res = ag::concat_cols(
      {ag::sub(pred.center_var, ag::constant(gt_center)),
       ag::wrap_angle(ag::sub(pred.yaw_var, ag::constant(Tensor::full(1, 1, gt.yaw))))});
  ag::Var l_box = ag::huber_mean(box_res, Tensor::zeros(1, 4), 1.0);

  ag::Var total = ag::add(
      ag::add(ag::scale(l_cc, cfg.gamma_cc), ag::scale(l_mask, cfg.gamma_mask)),
      ag::add(ag::scale(l_alpha, cfg.gamma_alpha),
              ag::add(ag::scale(l_rm, cfg.gamma_rm), ag::scale(l_box, cfg.gamma_box))));

  LossBreakdown out;
  out.l_cc = l_cc.val().v[0];
  out.l_mask = l_mask.val().v[0];
  out.l_alpha = l_alpha.val().v[0];
  out.l_rm = l_rm.val().v[0];
  out.l_box = l_box.val().v[0];
  out.total = total.val().v[0];
  out.total_var = total;
  return out;
}

}  // namespace hvt
