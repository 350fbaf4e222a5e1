#include "hvtrack/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hvtrack/rng.hpp"

namespace hvt {

ag::Var ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  ag::Var v = ag::param(std::move(init));
  index_[name] = items_.size();
  items_.emplace_back(name, v);
  return v;
}

const ag::Var& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown parameter: " + name);
  return items_[it->second].second;
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, v] : items_) n += v.val().numel();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& [name, v] : items_) v.zero_grad();
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(rows + cols));
  Tensor t(rows, cols);
  for (auto& v : t.v) v = rng.uniform(-bound, bound);
  return t;
}

void add_linear(ParamStore& p, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  p.add(prefix + "_w", xavier(in, out, rng));
  p.add(prefix + "_b", Tensor::zeros(1, out));
}

void add_layer_norm(ParamStore& p, const std::string& prefix, std::size_t dim) {
  p.add(prefix + "_g", Tensor::full(1, dim, 1.0));
  p.add(prefix + "_b", Tensor::zeros(1, dim));
}

void add_ffn(ParamStore& p, const std::string& prefix, std::size_t c, std::size_t hidden,
             Rng& rng) {
  add_layer_norm(p, prefix + ".ffn_ln", c);
  add_linear(p, prefix + ".ffn1", c, hidden, rng);
  add_linear(p, prefix + ".ffn2", hidden, c, rng);
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.init_seed);
  ParamStore p;
  const std::size_t c = cfg.c;
  const std::size_t f = cfg.ffn_dim();
  // half the channels per branch in hybrid mode, all of them in vanilla CA
  const std::size_t cb = cfg.use_bea ? c / 2 : c;

  add_linear(p, "backbone.edge", 6, c, rng);
  add_linear(p, "backbone.point", c, c, rng);

  add_linear(p, "pe.template", 3, c, rng);
  add_linear(p, "pe.search", 3, c, rng);

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string lp = "layer" + std::to_string(l) + ".";

    add_linear(p, lp + "rpm.proj", c + 3, c, rng);
    add_layer_norm(p, lp + "rpm.ln_in", c);
    p.add(lp + "rpm.wq", xavier(c, c, rng));
    p.add(lp + "rpm.wk", xavier(c, c, rng));
    p.add(lp + "rpm.wv", xavier(c, c, rng));
    add_layer_norm(p, lp + "rpm.ln_q", c);
    add_linear(p, lp + "rpm.wo", c, c, rng);
    add_ffn(p, lp + "rpm", c, f, rng);

    add_layer_norm(p, lp + "bea.ln_x", c);
    add_layer_norm(p, lp + "bea.ln_mem", c);
    p.add(lp + "bea.base_wq", xavier(c, cb, rng));
    p.add(lp + "bea.base_wk", xavier(c, cb, rng));
    p.add(lp + "bea.base_wv", xavier(c, cb, rng));
    add_layer_norm(p, lp + "bea.ln_q_base", cb);
    if (cfg.use_bea) {
      add_linear(p, lp + "bea.edge", 2 * c, c, rng);
      add_layer_norm(p, lp + "bea.ln_expan", c);
      p.add(lp + "bea.expan_wq", xavier(c, cb, rng));
      p.add(lp + "bea.expan_wk", xavier(c, cb, rng));
      p.add(lp + "bea.expan_wv", xavier(c, cb, rng));
      add_layer_norm(p, lp + "bea.ln_q_expan", cb);
    }
    add_linear(p, lp + "bea.wo", c, c, rng);
    add_ffn(p, lp + "bea", c, f, rng);

    add_layer_norm(p, lp + "cpa.ln_x", c);
    p.add(lp + "cpa.wq", xavier(c, c, rng));
    add_layer_norm(p, lp + "cpa.ln_q", c);
    add_layer_norm(p, lp + "cpa.ln_ctx", c);
    p.add(lp + "cpa.wk", xavier(c, c, rng));
    p.add(lp + "cpa.wv", xavier(c, c, rng));
    if (cfg.use_cpa) {
      for (std::size_t g = 0; g < cfg.groups(); ++g) {
        const std::size_t members = cfg.group_sizes[g] / cfg.budget_for_group(g);
        // uniform averaging at init
        p.add(lp + "cpa.group" + std::to_string(g) + "_w",
              Tensor::full(members, 1, 1.0 / double(members)));
      }
    }
    add_linear(p, lp + "cpa.wo", c, c, rng);
    add_ffn(p, lp + "cpa", c, f, rng);
  }

  add_linear(p, "rpn.trunk", c, c, rng);
  add_linear(p, "rpn.mask", c, 1, rng);
  add_linear(p, "rpn.target", c, 1, rng);
  add_linear(p, "rpn.center", c, 3, rng);
  add_linear(p, "rpn.yaw", c, 1, rng);
  add_linear(p, "rpn.alpha", c, 2, rng);
  return p;
}

// ------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'H', 'V', 'T', 'C', 'K', 'P', 'T', '\x01'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kVersion);
  const std::string cfg_text = to_text(cfg);
  write_pod(out, std::uint64_t(cfg_text.size()));
  out.write(cfg_text.data(), std::streamsize(cfg_text.size()));
  write_pod(out, std::uint64_t(params.items().size()));
  for (const auto& [name, var] : params.items()) {
    write_pod(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    write_pod(out, std::uint64_t(var.val().rows));
    write_pod(out, std::uint64_t(var.val().cols));
    out.write(reinterpret_cast<const char*>(var.val().data()),
              std::streamsize(var.val().numel() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

std::pair<ModelConfig, ParamStore> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  const auto cfg_len = read_pod<std::uint64_t>(in, path);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), std::streamsize(cfg_len));
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  const ModelConfig cfg = model_config_from_text(cfg_text);

  // template of the expected parameter set, then overwrite values
  ParamStore params = init_params(cfg);
  const auto n_tensors = read_pod<std::uint64_t>(in, path);
  if (n_tensors != params.items().size())
    throw std::runtime_error("checkpoint tensor count mismatch in " + path);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rows = read_pod<std::uint64_t>(in, path);
    const auto cols = read_pod<std::uint64_t>(in, path);
    if (!params.has(name))
      throw std::runtime_error("unexpected tensor '" + name + "' in " + path);
    ag::Var var = params.get(name);
    Tensor& dst = var.leaf_value();
    if (dst.rows != rows || dst.cols != cols)
      throw std::runtime_error("shape mismatch for tensor '" + name + "' in " + path);
    in.read(reinterpret_cast<char*>(dst.data()),
            std::streamsize(dst.numel() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  }
  return {cfg, std::move(params)};
}

std::pair<ModelConfig, ParamStore> load_checkpoint(const std::string& path,
                                                   const ModelConfig& requested) {
  auto [saved, params] = load_checkpoint(path);
  check_structural_match(saved, requested);
  return {requested, std::move(params)};
}

}  // namespace hvt
