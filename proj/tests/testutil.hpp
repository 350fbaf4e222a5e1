#pragma once

// Shared test helpers: random tensors and a central-difference gradient
// checker that any module test can point at a list of parameter Vars.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hvtrack/autograd.hpp"
#include "hvtrack/memory_bank.hpp"
#include "hvtrack/model_config.hpp"
#include "hvtrack/rng.hpp"
#include "hvtrack/tensor.hpp"

namespace hvt::testutil {

// toy sizes from the gradient-suite contract: n=16, c=8, h=2, k=1
inline ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.n = 16;
  cfg.c = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.k_train = 1;
  cfg.k_test = 2;
  cfg.group_sizes = {8, 8};
  cfg.contextual_counts = {2, 4};
  cfg.n_in = 32;
  cfg.backbone_knn = 4;
  cfg.ffn_hidden = 16;
  cfg.dropout_rate = 0.0;
  validate(cfg);
  return cfg;
}

inline MemoryEntry random_memory_entry(const ModelConfig& cfg, Rng& rng) {
  MemoryEntry e;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Tensor f(cfg.n, cfg.c);
    for (auto& v : f.v) v = rng.uniform(-1, 1);
    e.layer_feats.push_back(std::move(f));
  }
  e.mask = Tensor(cfg.n, 1);
  for (auto& v : e.mask.v) v = rng.uniform(0.0, 1.0);
  const double a = rng.uniform(-3.14, 3.14);
  e.alpha = Tensor(1, 2, {std::sin(a), std::cos(a)});
  e.coords = Tensor(cfg.n, 3);
  for (auto& v : e.coords.v) v = rng.uniform(-2, 2);
  return e;
}

inline Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng,
                            double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (auto& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i]" of the worst element
};

// loss_fn must rebuild the graph from the parameters' current values and
// return a scalar Var. Central differences, step scaled per element.
inline GradCheckResult grad_check(std::vector<ag::Var> params,
                                  const std::function<ag::Var()>& loss_fn,
                                  double eps = 1e-6) {
  // analytic pass
  for (auto& p : params) p.zero_grad();
  ag::Var loss = loss_fn();
  ag::backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    p.node()->ensure_grad();
    analytic.push_back(p.grad());
  }

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = params[pi].leaf_value();
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double orig = value.v[i];
      const double step = eps * std::max(1.0, std::abs(orig));
      value.v[i] = orig + step;
      const double fp = loss_fn().val().v[0];
      value.v[i] = orig - step;
      const double fm = loss_fn().val().v[0];
      value.v[i] = orig;
      const double fd = (fp - fm) / (2.0 * step);
      const double an = analytic[pi].v[i];
      const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = "param " + std::to_string(pi) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace hvt::testutil
