#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "hvtrack/kernels.hpp"
#include "hvtrack/network.hpp"

namespace hvt {

std::vector<std::size_t> farthest_point_sample(const Tensor& pts, std::size_t count) {
  const std::size_t m = pts.rows;
  if (pts.cols != 3) throw std::invalid_argument("farthest_point_sample: points must be m x 3");
  if (count == 0 || count > m)
    throw std::invalid_argument("farthest_point_sample: count out of range");
  const auto& k = kernels::active();

  std::vector<std::size_t> picked;
  picked.reserve(count);
  std::vector<double> mind(m, 1e30);
  std::size_t cur = 0;
  picked.push_back(cur);
  std::vector<double> drow(m);
  while (picked.size() < count) {
    k.pairwise_sqdist(1, m, pts.data() + cur * 3, pts.data(), drow.data());
    k.min_update(m, drow.data(), mind.data());
    cur = k.argmax(m, mind.data());
    picked.push_back(cur);
    mind[cur] = -1.0;  // never re-picked while any untouched point remains
  }
  return picked;
}

std::vector<std::size_t> knn_indices(const Tensor& queries, const Tensor& refs,
                                     std::size_t k) {
  if (queries.cols != 3 || refs.cols != 3)
    throw std::invalid_argument("knn_indices: points must be m x 3");
  if (k == 0 || k > refs.rows) throw std::invalid_argument("knn_indices: k out of range");
  const auto& kt = kernels::active();

  std::vector<std::size_t> out;
  out.reserve(queries.rows * k);
  std::vector<double> drow(refs.rows);
  std::vector<std::uint32_t> idx(refs.rows);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    kt.pairwise_sqdist(1, refs.rows, queries.data() + q * 3, refs.data(), drow.data());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + std::ptrdiff_t(k), idx.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (drow[a] != drow[b]) return drow[a] < drow[b];
                        return a < b;
                      });
    for (std::size_t i = 0; i < k; ++i) out.push_back(idx[i]);
  }
  return out;
}

namespace {

ag::Var linear(const ag::Var& x, const ParamStore& p, const std::string& prefix) {
  return ag::add_rowvec(ag::matmul(x, p.get(prefix + "_w")), p.get(prefix + "_b"));
}

}  // namespace

FeatureMapT backbone_forward(const Tensor& points, const ParamStore& p,
                             const ModelConfig& cfg) {
  if (points.rows != cfg.n_in || points.cols != 3)
    throw std::invalid_argument("backbone_forward: expected n_in x 3 points");

  const auto seeds = farthest_point_sample(points, cfg.n);
  Tensor seed_coords(cfg.n, 3);
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t d = 0; d < 3; ++d) seed_coords.at(i, d) = points.at(seeds[i], d);

  const auto nbrs = knn_indices(seed_coords, points, cfg.backbone_knn);

  // edge feature per (seed, neighbor): [p_j - p_i, p_i]
  const std::size_t rows = cfg.n * cfg.backbone_knn;
  Tensor edges(rows, 6);
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t j = 0; j < cfg.backbone_knn; ++j) {
      const std::size_t r = i * cfg.backbone_knn + j;
      const std::size_t nb = nbrs[r];
      for (std::size_t d = 0; d < 3; ++d) {
        edges.at(r, d) = points.at(nb, d) - seed_coords.at(i, d);
        edges.at(r, 3 + d) = seed_coords.at(i, d);
      }
    }

  ag::Var h = ag::relu(linear(ag::constant(std::move(edges)), p, "backbone.edge"));
  ag::Var pooled = ag::group_maxpool_rows(h, cfg.backbone_knn);  // n x c
  ag::Var feats = ag::relu(linear(pooled, p, "backbone.point"));
  return {std::move(seed_coords), std::move(feats)};
}

}  // namespace hvt
