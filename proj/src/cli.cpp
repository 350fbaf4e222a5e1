#include "hvtrack/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hvtrack/dataset.hpp"
#include "hvtrack/metrics.hpp"
#include "hvtrack/model_config.hpp"
#include "hvtrack/params.hpp"
#include "hvtrack/svg_plot.hpp"
#include "hvtrack/synth.hpp"
#include "hvtrack/tracker.hpp"
#include "hvtrack/train.hpp"

namespace fs = std::filesystem;

namespace hvt::cli {

namespace {

// One config file carries every hyperparameter; keys are namespaced by
// section ("model.n = 128", "train.steps = 500", "synth.seed = 7").
struct RunConfigText {
  std::string model, train, synth;
};

RunConfigText split_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  RunConfigText out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    std::string body = hash == std::string::npos ? line : line.substr(0, hash);
    if (body.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto dot = body.find('.');
    const auto eq = body.find('=');
    if (dot == std::string::npos || eq == std::string::npos || dot > eq)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 'section.key = value'");
    const std::string section = body.substr(0, dot);
    const std::string rest = body.substr(dot + 1);
    const auto b = section.find_first_not_of(" \t");
    const std::string name = b == std::string::npos ? section : section.substr(b);
    if (name == "model") out.model += rest + '\n';
    else if (name == "train") out.train += rest + '\n';
    else if (name == "synth") out.synth += rest + '\n';
    else
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": unknown section '" + name + "'");
  }
  return out;
}

// relative cache paths resolve against HVTRACK_CACHE_DIR when set
std::string resolve_cache_path(const std::string& p) {
  const char* cache = std::getenv("HVTRACK_CACHE_DIR");
  if (!cache || *cache == '\0' || fs::path(p).is_absolute()) return p;
  return (fs::path(cache) / p).string();
}

int cmd_build_hv(const std::string& root, const std::string& category, int interval,
                 const std::string& split, const std::string& out_path) {
  const Category cat = category_from_string(category);
  const auto tracklets = load_kitti_tracklets(root, cat, split_from_string(split));
  std::size_t src_frames = 0;
  for (const auto& t : tracklets) src_frames += t.frames.size();

  const auto hv = build_hv(tracklets, interval);
  const std::string out = resolve_cache_path(out_path);
  const std::size_t written = write_tracklet_index(hv, out);

  std::cout << "source tracklets: " << tracklets.size() << " (" << src_frames << " frames)\n"
            << "hv tracklets:     " << hv.size() << " (" << written << " frames)\n"
            << "frame conservation: " << (written == src_frames ? "ok" : "VIOLATED") << '\n'
            << "index: " << out << '\n';
  if (written != src_frames) throw std::runtime_error("frame conservation violated");
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out_path, int tracklets,
              std::uint64_t seed_override, bool has_seed) {
  SynthConfig cfg;
  if (!config_path.empty()) cfg = synth_config_from_text(split_run_config(config_path).synth);
  if (has_seed) cfg.seed = seed_override;
  const auto data = generate_dataset(cfg, tracklets);
  const std::string out = resolve_cache_path(out_path);
  const std::size_t written = write_tracklet_index(data, out);
  std::cout << "synthetic tracklets: " << data.size() << " (" << written << " frames)\n"
            << "index: " << out << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_path, int interval, int steps_override,
              double lr_override, int batch_override, std::uint64_t seed_override,
              bool has_seed, const std::string& loss_log) {
  const RunConfigText rc = split_run_config(config_path);
  ModelConfig mc = model_config_from_text(rc.model);
  TrainConfig tc = train_config_from_text(rc.train);
  if (steps_override > 0) tc.steps = steps_override;
  if (lr_override > 0) tc.lr = lr_override;
  if (batch_override > 0) tc.batch_size = batch_override;
  if (has_seed) tc.seed = seed_override;
  tc.loss_log_path = loss_log;

  const auto tracklets = read_tracklet_index(resolve_cache_path(data_path));
  ParamStore params = init_params(mc);
  std::cout << "parameters: " << params.total_elements() << " elements\n";
  const TrainResult res = train(params, mc, tracklets, tc, interval);
  save_checkpoint(out_path, mc, params);
  std::cout << "steps: " << res.steps_run << "\ninitial loss: " << res.initial_loss
            << "\nfinal loss:   " << res.final_loss << "\ncheckpoint: " << out_path << '\n';
  return 0;
}

void emit_plots(const OPEReport& rep, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<double> iou_taus, dist_taus;
  for (std::size_t i = 0; i < rep.success_curve.size(); ++i) {
    iou_taus.push_back(double(i) * 0.05);
    dist_taus.push_back(double(i) * 0.1);
  }
  plot::write_curve_svg((fs::path(out_dir) / "success_curve.svg").string(),
                        "Success rate vs IoU threshold", "IoU threshold", "fraction of frames",
                        iou_taus, rep.success_curve);
  plot::write_curve_svg((fs::path(out_dir) / "precision_curve.svg").string(),
                        "Precision vs distance threshold", "distance threshold (m)",
                        "fraction of frames", dist_taus, rep.precision_curve);

  std::vector<std::string> labels;
  std::vector<double> values;
  std::map<std::string, std::pair<double, std::size_t>> by_cat;  // weighted success
  for (const auto& ts : rep.per_tracklet) {
    auto& [acc, frames] = by_cat[to_string(ts.category)];
    acc += ts.success * double(ts.frames);
    frames += ts.frames;
  }
  for (const auto& [cat, acc] : by_cat) {
    labels.push_back(cat);
    values.push_back(acc.second ? acc.first / double(acc.second) : 0.0);
  }
  plot::write_bar_svg((fs::path(out_dir) / "category_success.svg").string(),
                      "Success by category", labels, values);
}

int cmd_track(const std::string& ckpt_path, const std::string& data_path, int interval,
              std::size_t k_test, const std::string& report_dir, std::uint64_t seed,
              std::size_t threads) {
  auto [cfg, params] = load_checkpoint(ckpt_path);
  cfg.k_test = k_test;
  validate(cfg);

  const auto tracklets = read_tracklet_index(resolve_cache_path(data_path));
  std::size_t input_frames = 0;
  for (const auto& t : tracklets) input_frames += t.frames.size();

  const auto runs = run_tracklets(tracklets, params, cfg, interval, seed, threads);
  fs::create_directories(report_dir);
  const std::string runs_path = (fs::path(report_dir) / "runs.txt").string();
  write_track_runs(runs, runs_path);

  const OPEReport rep = evaluate(runs);
  write_report(rep, (fs::path(report_dir) / "report.txt").string());

  std::size_t skipped = 0;
  for (const auto& r : runs)
    if (r.skipped) {
      ++skipped;
      std::cout << "skipped tracklet " << r.tracklet_id << ": " << r.skip_reason << '\n';
    }
  std::cout << "tracklets: " << runs.size() << " (skipped " << skipped << ")\n"
            << "frames evaluated: " << rep.total_frames << " of " << input_frames << '\n'
            << "success = " << rep.success << "\nprecision = " << rep.precision
            << "\nmean fps = " << rep.mean_fps << "\nrecords: " << runs_path << '\n';
  return 0;
}

int cmd_eval(const std::string& runs_path, const std::string& report_path) {
  const auto runs = read_track_runs(runs_path);
  const OPEReport rep = evaluate(runs);
  write_report(rep, report_path);
  std::cout << "success = " << rep.success << "\nprecision = " << rep.precision
            << "\nreport: " << report_path << '\n';
  return 0;
}

int cmd_plot(const std::string& runs_path, const std::string& out_dir) {
  const auto runs = read_track_runs(runs_path);
  const OPEReport rep = evaluate(runs);
  emit_plots(rep, out_dir);
  std::cout << "plots written to " << out_dir << '\n';
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"high-temporal-variation 3d point-cloud single-object tracker"};
  app.require_subcommand(1);

  // build-hv
  auto* bhv = app.add_subcommand("build-hv", "resample a KITTI split at a frame interval");
  std::string kitti_root, category{"Car"}, split{"train"}, bhv_out{"hv_index.txt"};
  int bhv_interval = 1;
  bhv->add_option("--kitti-root", kitti_root, "KITTI tracking root")->required();
  bhv->add_option("--category", category, "Car|Pedestrian|Van|Cyclist");
  bhv->add_option("--interval", bhv_interval, "frame sampling interval")
      ->check(CLI::PositiveNumber);
  bhv->add_option("--split", split, "train|valid|test");
  bhv->add_option("--out", bhv_out, "output index path");

  // synth
  auto* syn = app.add_subcommand("synth", "generate synthetic tracklets");
  std::string syn_config, syn_out{"synth_index.txt"};
  int syn_tracklets = 8;
  std::uint64_t syn_seed = 0;
  syn->add_option("--config", syn_config, "run config with synth.* keys");
  syn->add_option("--out", syn_out, "output index path");
  syn->add_option("--tracklets", syn_tracklets, "number of tracklets")
      ->check(CLI::PositiveNumber);
  auto* syn_seed_opt = syn->add_option("--seed", syn_seed, "generator seed");

  // train
  auto* trn = app.add_subcommand("train", "train a model on a tracklet index");
  std::string trn_config, trn_data, trn_out{"model.ckpt"}, trn_log;
  int trn_interval = 1, trn_steps = 0, trn_batch = 0;
  double trn_lr = 0;
  std::uint64_t trn_seed = 0;
  trn->add_option("--config", trn_config, "run config (model.* and train.* keys)")->required();
  trn->add_option("--data", trn_data, "tracklet index")->required();
  trn->add_option("--out", trn_out, "checkpoint output path");
  trn->add_option("--interval", trn_interval, "interval for search offsets")
      ->check(CLI::PositiveNumber);
  trn->add_option("--steps", trn_steps, "override train.steps");
  trn->add_option("--lr", trn_lr, "override train.lr");
  trn->add_option("--batch", trn_batch, "override train.batch_size");
  auto* trn_seed_opt = trn->add_option("--seed", trn_seed, "override train.seed");
  trn->add_option("--loss-log", trn_log, "write per-step loss log here");

  // track
  auto* trk = app.add_subcommand("track", "run one-pass tracking over an index");
  std::string trk_ckpt, trk_data, trk_report{"report"};
  int trk_interval = 1;
  std::size_t trk_ktest = 6, trk_threads = 1;
  std::uint64_t trk_seed = 1;
  trk->add_option("--checkpoint", trk_ckpt, "model checkpoint")->required();
  trk->add_option("--data", trk_data, "tracklet index")->required();
  trk->add_option("--interval", trk_interval, "interval for search offsets")
      ->check(CLI::PositiveNumber);
  trk->add_option("--k-test", trk_ktest, "memory size at inference")
      ->check(CLI::PositiveNumber);
  trk->add_option("--report", trk_report, "output directory");
  trk->add_option("--seed", trk_seed, "sampling seed");
  trk->add_option("--threads", trk_threads, "worker threads");

  // eval
  auto* evl = app.add_subcommand("eval", "recompute metrics from run records");
  std::string evl_runs, evl_report{"report.txt"};
  evl->add_option("--runs", evl_runs, "run records file")->required();
  evl->add_option("--report", evl_report, "report output path");

  // plot
  auto* plt = app.add_subcommand("plot", "emit threshold curves and category bars");
  std::string plt_runs, plt_out{"plots"};
  plt->add_option("--runs,--report", plt_runs, "run records file")->required();
  plt->add_option("--out", plt_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (bhv->parsed())
      return cmd_build_hv(kitti_root, category, bhv_interval, split, bhv_out);
    if (syn->parsed())
      return cmd_synth(syn_config, syn_out, syn_tracklets, syn_seed, !syn_seed_opt->empty());
    if (trn->parsed())
      return cmd_train(trn_config, trn_data, trn_out, trn_interval, trn_steps, trn_lr,
                       trn_batch, trn_seed, !trn_seed_opt->empty(), trn_log);
    if (trk->parsed())
      return cmd_track(trk_ckpt, trk_data, trk_interval, trk_ktest, trk_report, trk_seed,
                       trk_threads);
    if (evl->parsed()) return cmd_eval(evl_runs, evl_report);
    if (plt->parsed()) return cmd_plot(plt_runs, plt_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hvt::cli
