#include "hvtrack/memory_bank.hpp"

#include <cmath>
#include <stdexcept>

namespace hvt {

void MemoryState::push(MemoryEntry entry, std::size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("memory capacity must be >= 1");
  entries_.push_back(std::move(entry));
  while (entries_.size() > capacity) entries_.erase(entries_.begin());
}

void MemoryState::check(const ModelConfig& cfg) const {
  for (const auto& e : entries_) {
    if (e.layer_feats.size() != cfg.layers)
      throw std::logic_error("memory entry: wrong layer count");
    for (const auto& f : e.layer_feats)
      if (f.rows != cfg.n || f.cols != cfg.c)
        throw std::logic_error("memory entry: bad layer feature shape");
    if (e.mask.rows != cfg.n || e.mask.cols != 1)
      throw std::logic_error("memory entry: bad mask shape");
    for (double m : e.mask.v)
      if (m < 0.0 || m > 1.0) throw std::logic_error("memory entry: mask outside [0,1]");
    if (e.alpha.rows != 1 || e.alpha.cols != 2)
      throw std::logic_error("memory entry: bad alpha shape");
    const double nrm = std::hypot(e.alpha.v[0], e.alpha.v[1]);
    if (std::abs(nrm - 1.0) > 1e-5)
      throw std::logic_error("memory entry: alpha not unit length");
    if (e.coords.rows != cfg.n || e.coords.cols != 3)
      throw std::logic_error("memory entry: bad coordinate shape");
  }
}

MemoryViews memory_views(const MemoryState& mem, std::size_t layer,
                         const ModelConfig& cfg) {
  if (mem.empty()) throw std::runtime_error("memory is empty; initialize the tracker first");
  if (layer >= cfg.layers) throw std::out_of_range("memory_views: layer index");

  const std::size_t k = mem.fill();
  const std::size_t n = cfg.n;

  std::vector<ag::Var> feats, masks, angles;
  Tensor coords(k * n, 3);
  for (std::size_t e = 0; e < k; ++e) {
    const MemoryEntry& entry = mem.entries()[e];
    const bool live = !cfg.detach_memory && entry.layer_feats_var.size() == cfg.layers &&
                      entry.layer_feats_var[layer].defined();
    feats.push_back(live ? entry.layer_feats_var[layer]
                         : ag::constant(entry.layer_feats[layer]));
    masks.push_back(live && entry.mask_var.defined() ? entry.mask_var
                                                     : ag::constant(entry.mask));

    // each entry's alpha repeated for its n points
    if (cfg.use_om) {
      ag::Var alpha = live && entry.alpha_var.defined() ? entry.alpha_var
                                                        : ag::constant(entry.alpha);
      angles.push_back(ag::gather_rows(alpha, std::vector<std::size_t>(n, 0)));
    } else {
      angles.push_back(ag::constant(Tensor::zeros(n, 2)));
    }
    for (std::size_t i = 0; i < n; ++i) {
      coords.at(e * n + i, 0) = entry.coords.at(i, 0);
      coords.at(e * n + i, 1) = entry.coords.at(i, 1);
      coords.at(e * n + i, 2) = entry.coords.at(i, 2);
    }
  }
  return {ag::concat_rows(feats), ag::concat_rows(masks), ag::concat_rows(angles),
          std::move(coords)};
}

}  // namespace hvt
