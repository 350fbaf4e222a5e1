#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hvtrack/kernels.hpp"
#include "hvtrack/network.hpp"

namespace hvt {

namespace {

ag::Var linear(const ag::Var& x, const ParamStore& p, const std::string& prefix) {
  return ag::add_rowvec(ag::matmul(x, p.get(prefix + "_w")), p.get(prefix + "_b"));
}

ag::Var layer_norm_p(const ag::Var& x, const ParamStore& p, const std::string& prefix) {
  return ag::layer_norm(x, p.get(prefix + "_g"), p.get(prefix + "_b"));
}

// residual feed-forward block shared by the three attention modules:
// y = x + Dropout(FFN(LN(x))), FFN(h) = relu(h W1 + b1) W2 + b2
ag::Var ffn_block(const ag::Var& x, const ParamStore& p, const std::string& module,
                  const ModelConfig& cfg, Rng& rng, bool train) {
  ag::Var h = layer_norm_p(x, p, module + ".ffn_ln");
  h = ag::relu(linear(h, p, module + ".ffn1"));
  h = linear(h, p, module + ".ffn2");
  return ag::add(x, ag::dropout(h, cfg.dropout_rate, rng, train));
}

}  // namespace

MhaOut multi_head_attention(const ag::Var& q, const ag::Var& k, const ag::Var& v,
                            std::size_t heads) {
  const std::size_t width = q.cols();
  if (k.cols() != width || v.cols() != width)
    throw std::invalid_argument("multi_head_attention: q/k/v width mismatch");
  if (heads == 0 || width % heads != 0)
    throw std::invalid_argument("multi_head_attention: heads must divide width");
  const std::size_t dh = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(dh));

  std::vector<ag::Var> outs;
  Tensor attn_mean(q.rows(), k.rows());
  for (std::size_t h = 0; h < heads; ++h) {
    ag::Var qh = ag::slice_cols(q, h * dh, (h + 1) * dh);
    ag::Var kh = ag::slice_cols(k, h * dh, (h + 1) * dh);
    ag::Var vh = ag::slice_cols(v, h * dh, (h + 1) * dh);
    ag::Var attn = ag::softmax_rows(ag::scale(ag::matmul(qh, kh, false, true), inv_sqrt));
    outs.push_back(ag::matmul(attn, vh));
    kernels::active().axpy(attn_mean.numel(), 1.0 / double(heads), attn.val().data(),
                           attn_mean.data());
  }
  return {outs.size() == 1 ? outs[0] : ag::concat_cols(outs), std::move(attn_mean)};
}

// --------------------------------------------------------------------- RPM

RpmOut rpm_forward(const MemoryState& mem, std::size_t layer, const ParamStore& p,
                   const ModelConfig& cfg, Rng& rng, bool train) {
  const MemoryViews views = memory_views(mem, layer, cfg);
  const std::string m = "layer" + std::to_string(layer) + ".rpm";

  // project [LM | MM | repeat(OM)] from kn x (c+3) back to kn x c
  ag::Var t = ag::concat_cols({views.layer_feats, views.masks, views.angles});
  t = linear(t, p, m + ".proj");

  ag::Var t_norm = layer_norm_p(t, p, m + ".ln_in");
  ag::Var pe = linear(ag::constant(views.coords), p, "pe.template");
  ag::Var q = layer_norm_p(ag::add(ag::matmul(t_norm, p.get(m + ".wq")), pe), p, m + ".ln_q");
  ag::Var k = ag::matmul(t_norm, p.get(m + ".wk"));
  ag::Var v = ag::matmul(t_norm, p.get(m + ".wv"));

  MhaOut mha = multi_head_attention(q, k, v, cfg.heads);
  ag::Var att = linear(mha.out, p, m + ".wo");
  ag::Var star = ag::add(t, ag::dropout(att, cfg.dropout_rate, rng, train));
  return {ffn_block(star, p, m, cfg, rng, train), views.coords};
}

// --------------------------------------------------------------------- BEA

std::pair<ag::Var, AttentionBundle> bea_forward(const FeatureMapT& x, const RpmOut& mem,
                                                const ParamStore& p, const ModelConfig& cfg,
                                                std::size_t layer, Rng& rng, bool train) {
  const std::string m = "layer" + std::to_string(layer) + ".bea";
  const std::size_t kn = mem.features.rows();
  if (kn % 8 != 0) throw std::invalid_argument("bea_forward: template size must divide by 8");
  const std::size_t cb = cfg.use_bea ? cfg.c / 2 : cfg.c;
  const std::size_t branch_heads = cfg.use_bea ? cfg.heads / 2 : cfg.heads;

  ag::Var pe_s = linear(ag::constant(x.coords), p, "pe.search");
  ag::Var x_norm = layer_norm_p(x.feats, p, m + ".ln_x");
  ag::Var mem_norm = layer_norm_p(mem.features, p, m + ".ln_mem");

  // base branch: plain cross-attention over the full template
  ag::Var qb = layer_norm_p(ag::add(ag::matmul(x_norm, p.get(m + ".base_wq")),
                                    ag::slice_cols(pe_s, 0, cb)),
                            p, m + ".ln_q_base");
  ag::Var kb = ag::matmul(mem_norm, p.get(m + ".base_wk"));
  ag::Var vb = ag::matmul(mem_norm, p.get(m + ".base_wv"));
  MhaOut base = multi_head_attention(qb, kb, vb, branch_heads);

  AttentionBundle bundle;
  bundle.attn_base = base.attn_mean;
  ag::Var att_cat;

  if (cfg.use_bea) {
    // expansion branch: template downsampled to kn/8 seeds, each aggregating
    // its 8 nearest template points through an edge conv for a wider
    // receptive field
    const std::size_t exp_n = kn / 8;
    const auto seeds = farthest_point_sample(mem.coords, exp_n);
    Tensor seed_coords(exp_n, 3);
    for (std::size_t i = 0; i < exp_n; ++i)
      for (std::size_t d = 0; d < 3; ++d) seed_coords.at(i, d) = mem.coords.at(seeds[i], d);
    const auto nbrs = knn_indices(seed_coords, mem.coords, 8);

    std::vector<std::size_t> seed_rep(exp_n * 8);
    for (std::size_t i = 0; i < exp_n; ++i)
      for (std::size_t j = 0; j < 8; ++j) seed_rep[i * 8 + j] = seeds[i];
    ag::Var f_seed = ag::gather_rows(mem.features, seed_rep);
    ag::Var f_nbr = ag::gather_rows(mem.features, nbrs);
    ag::Var edge = ag::concat_cols({ag::sub(f_nbr, f_seed), f_seed});
    ag::Var agg = ag::relu(linear(edge, p, m + ".edge"));
    ag::Var mem_expan = ag::group_maxpool_rows(agg, 8);  // kn/8 x c

    ag::Var expan_norm = layer_norm_p(mem_expan, p, m + ".ln_expan");
    ag::Var qe = layer_norm_p(ag::add(ag::matmul(x_norm, p.get(m + ".expan_wq")),
                                      ag::slice_cols(pe_s, cb, 2 * cb)),
                              p, m + ".ln_q_expan");
    ag::Var ke = ag::matmul(expan_norm, p.get(m + ".expan_wk"));
    ag::Var ve = ag::matmul(expan_norm, p.get(m + ".expan_wv"));
    MhaOut expan = multi_head_attention(qe, ke, ve, branch_heads);

    bundle.attn_expan = expan.attn_mean;
    att_cat = ag::concat_cols({base.out, expan.out});
  } else {
    // vanilla cross-attention: all heads on the base branch; the expansion
    // map is the base map pooled to kn/8 key columns (8 at a time) and
    // rescaled so rows stay normalized
    const std::size_t exp_n = kn / 8;
    Tensor pooled(bundle.attn_base.rows, exp_n);
    for (std::size_t r = 0; r < pooled.rows; ++r)
      for (std::size_t g = 0; g < exp_n; ++g) {
        double acc = 0;
        for (std::size_t j = 0; j < 8; ++j) acc += bundle.attn_base.at(r, g * 8 + j);
        pooled.at(r, g) = acc;  // mean * 8 == row-preserving sum
      }
    bundle.attn_expan = std::move(pooled);
    att_cat = base.out;
  }

  ag::Var o = linear(att_cat, p, m + ".wo");
  ag::Var star = ag::add(x.feats, ag::dropout(o, cfg.dropout_rate, rng, train));
  return {ffn_block(star, p, m, cfg, rng, train), std::move(bundle)};
}

// --------------------------------------------------------------------- CPA

std::vector<double> cpa_importance(const AttentionBundle& bundle) {
  // share of attention each search point receives: normalize every key
  // column over the queries, then average the columns. Uniform maps yield
  // uniform importance.
  auto received = [](const Tensor& attn, std::vector<double>& acc) {
    if (!attn.numel()) return;
    std::vector<double> col_sum(attn.cols, 0.0);
    for (std::size_t r = 0; r < attn.rows; ++r)
      for (std::size_t c = 0; c < attn.cols; ++c) col_sum[c] += attn.at(r, c);
    for (std::size_t r = 0; r < attn.rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < attn.cols; ++c)
        if (col_sum[c] > 0.0) s += attn.at(r, c) / col_sum[c];
      acc[r] += s / double(attn.cols);
    }
  };
  std::vector<double> imp(bundle.attn_base.rows, 0.0);
  received(bundle.attn_base, imp);
  received(bundle.attn_expan, imp);
  return imp;
}

std::vector<std::size_t> cpa_grouping_order(const std::vector<double>& importance) {
  std::vector<std::size_t> order(importance.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return importance[a] > importance[b];
  });
  return order;
}

ag::Var cpa_context(const ag::Var& xhat, const AttentionBundle& bundle,
                    const ParamStore& p, const ModelConfig& cfg, std::size_t layer) {
  if (!cfg.use_cpa) return xhat;  // vanilla self-attention: keys/values straight from x
  const std::string m = "layer" + std::to_string(layer) + ".cpa";
  const auto importance = cpa_importance(bundle);
  const auto order = cpa_grouping_order(importance);
  ag::Var sorted = ag::gather_rows(xhat, order);

  // contiguous importance groups, each compressed to its cluster budget by a
  // learned combination over the member axis
  std::vector<ag::Var> parts;
  std::size_t off = 0;
  for (std::size_t g = 0; g < cfg.groups(); ++g) {
    const std::size_t size = cfg.group_sizes[g];
    ag::Var grp = ag::slice_rows(sorted, off, off + size);
    parts.push_back(
        ag::cluster_aggregate(grp, p.get(m + ".group" + std::to_string(g) + "_w")));
    off += size;
  }
  return parts.size() == 1 ? parts[0] : ag::concat_rows(parts);
}

ag::Var cpa_forward(const ag::Var& xhat, const Tensor& coords, const AttentionBundle& bundle,
                    const ParamStore& p, const ModelConfig& cfg, std::size_t layer,
                    Rng& rng, bool train) {
  const std::string m = "layer" + std::to_string(layer) + ".cpa";
  if (xhat.rows() != cfg.n) throw std::invalid_argument("cpa_forward: expected n rows");

  ag::Var ctx = cpa_context(xhat, bundle, p, cfg, layer);

  ag::Var pe_s = linear(ag::constant(coords), p, "pe.search");
  ag::Var q = layer_norm_p(
      ag::add(ag::matmul(layer_norm_p(xhat, p, m + ".ln_x"), p.get(m + ".wq")), pe_s),
      p, m + ".ln_q");
  ag::Var ctx_norm = layer_norm_p(ctx, p, m + ".ln_ctx");
  ag::Var k = ag::matmul(ctx_norm, p.get(m + ".wk"));
  ag::Var v = ag::matmul(ctx_norm, p.get(m + ".wv"));

  MhaOut mha = multi_head_attention(q, k, v, cfg.heads);
  ag::Var o = linear(mha.out, p, m + ".wo");
  ag::Var star = ag::add(xhat, ag::dropout(o, cfg.dropout_rate, rng, train));
  return ffn_block(star, p, m, cfg, rng, train);
}

}  // namespace hvt
