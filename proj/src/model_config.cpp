#include "hvtrack/model_config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hvt {

std::size_t ModelConfig::contextual_total() const {
  std::size_t t = 0;
  for (auto u : contextual_counts) t += u;
  return t;
}

void validate(const ModelConfig& cfg) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (cfg.n == 0 || cfg.c == 0 || cfg.layers == 0 || cfg.heads == 0) fail("n, c, layers, heads must be positive");
  if (cfg.c % cfg.heads != 0) fail("c must be divisible by heads");
  if (cfg.use_bea && cfg.heads % 2 != 0) fail("heads must be even to split across the two branches");
  if (cfg.n % 8 != 0) fail("n must be divisible by 8 (expansion downsample target k*n/8)");
  if (cfg.k_train == 0 || cfg.k_test == 0) fail("memory sizes must be >= 1");
  if (cfg.n_in == 0) fail("n_in must be positive");
  if (cfg.backbone_knn == 0 || cfg.backbone_knn > cfg.n_in) fail("backbone_knn must be in [1, n_in]");
  if (cfg.group_sizes.empty() || cfg.group_sizes.size() != cfg.contextual_counts.size())
    fail("group_sizes and contextual_counts must be non-empty and equally long");
  std::size_t sum = 0;
  for (std::size_t g = 0; g < cfg.group_sizes.size(); ++g) {
    const std::size_t size = cfg.group_sizes[g];
    const std::size_t u_stated = cfg.contextual_counts[g];
    const std::size_t u_mapped = cfg.budget_for_group(g);
    if (size == 0 || u_stated == 0) fail("group sizes and contextual counts must be positive");
    if (size % u_stated != 0 || size % u_mapped != 0)
      fail("group size " + std::to_string(size) + " not divisible by its cluster budget");
    sum += size;
  }
  if (sum != cfg.n) fail("group sizes must sum to n");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0) fail("dropout_rate must be in [0, 1)");
  if (cfg.n_in < cfg.n) fail("n_in must be >= n");
}

namespace {

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoul(item));
  }
  return out;
}

std::string format_size_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("model config: expected true/false, got '" + s + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("model config: expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "n") cfg.n = std::stoul(val);
    else if (key == "c") cfg.c = std::stoul(val);
    else if (key == "layers") cfg.layers = std::stoul(val);
    else if (key == "heads") cfg.heads = std::stoul(val);
    else if (key == "k_train") cfg.k_train = std::stoul(val);
    else if (key == "k_test") cfg.k_test = std::stoul(val);
    else if (key == "group_sizes") cfg.group_sizes = parse_size_list(val);
    else if (key == "contextual_counts") cfg.contextual_counts = parse_size_list(val);
    else if (key == "n_in") cfg.n_in = std::stoul(val);
    else if (key == "backbone_knn") cfg.backbone_knn = std::stoul(val);
    else if (key == "ffn_hidden") cfg.ffn_hidden = std::stoul(val);
    else if (key == "dropout_rate") cfg.dropout_rate = std::stod(val);
    else if (key == "gamma_cc") cfg.gamma_cc = std::stod(val);
    else if (key == "gamma_mask") cfg.gamma_mask = std::stod(val);
    else if (key == "gamma_alpha") cfg.gamma_alpha = std::stod(val);
    else if (key == "gamma_rm") cfg.gamma_rm = std::stod(val);
    else if (key == "gamma_box") cfg.gamma_box = std::stod(val);
    else if (key == "use_om") cfg.use_om = parse_bool(val);
    else if (key == "use_bea") cfg.use_bea = parse_bool(val);
    else if (key == "use_cpa") cfg.use_cpa = parse_bool(val);
    else if (key == "detach_memory") cfg.detach_memory = parse_bool(val);
    else if (key == "vertical_enlarge") cfg.vertical_enlarge = std::stod(val);
    else if (key == "synth_offset") cfg.synth_offset = std::stod(val);
    else if (key == "init_seed") cfg.init_seed = std::stoull(val);
    else throw std::invalid_argument("model config: unknown key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

std::string to_text(const ModelConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "n = " << cfg.n << '\n'
      << "c = " << cfg.c << '\n'
      << "layers = " << cfg.layers << '\n'
      << "heads = " << cfg.heads << '\n'
      << "k_train = " << cfg.k_train << '\n'
      << "k_test = " << cfg.k_test << '\n'
      << "group_sizes = " << format_size_list(cfg.group_sizes) << '\n'
      << "contextual_counts = " << format_size_list(cfg.contextual_counts) << '\n'
      << "n_in = " << cfg.n_in << '\n'
      << "backbone_knn = " << cfg.backbone_knn << '\n'
      << "ffn_hidden = " << cfg.ffn_hidden << '\n'
      << "dropout_rate = " << cfg.dropout_rate << '\n'
      << "gamma_cc = " << cfg.gamma_cc << '\n'
      << "gamma_mask = " << cfg.gamma_mask << '\n'
      << "gamma_alpha = " << cfg.gamma_alpha << '\n'
      << "gamma_rm = " << cfg.gamma_rm << '\n'
      << "gamma_box = " << cfg.gamma_box << '\n'
      << "use_om = " << (cfg.use_om ? "true" : "false") << '\n'
      << "use_bea = " << (cfg.use_bea ? "true" : "false") << '\n'
      << "use_cpa = " << (cfg.use_cpa ? "true" : "false") << '\n'
      << "detach_memory = " << (cfg.detach_memory ? "true" : "false") << '\n'
      << "vertical_enlarge = " << cfg.vertical_enlarge << '\n'
      << "synth_offset = " << cfg.synth_offset << '\n'
      << "init_seed = " << cfg.init_seed << '\n';
  return out.str();
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_config_from_text(ss.str());
}

void save_model_config(const ModelConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model config: " + path);
  out << to_text(cfg);
}

void check_structural_match(const ModelConfig& saved, const ModelConfig& requested) {
  auto fail = [](const char* field) {
    throw std::runtime_error(std::string("checkpoint config mismatch on field '") + field + "'");
  };
  if (saved.n != requested.n) fail("n");
  if (saved.c != requested.c) fail("c");
  if (saved.layers != requested.layers) fail("layers");
  if (saved.heads != requested.heads) fail("heads");
  if (saved.group_sizes != requested.group_sizes) fail("group_sizes");
  if (saved.contextual_counts != requested.contextual_counts) fail("contextual_counts");
  if (saved.n_in != requested.n_in) fail("n_in");
  if (saved.backbone_knn != requested.backbone_knn) fail("backbone_knn");
  if (saved.ffn_hidden != requested.ffn_hidden) fail("ffn_hidden");
  if (saved.use_bea != requested.use_bea) fail("use_bea");
  if (saved.use_cpa != requested.use_cpa) fail("use_cpa");
}

}  // namespace hvt
