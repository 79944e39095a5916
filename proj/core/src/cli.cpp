#include "vsr/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vsr/dataio.hpp"
#include "vsr/kernels.hpp"
#include "vsr/metrics.hpp"
#include "vsr/plot.hpp"
#include "vsr/trainer.hpp"

#ifndef VSR_VERSION
#define VSR_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace vsr::cli {

namespace {

// Relative output paths resolve under VSR_OUTPUT_ROOT when it is set.
std::string resolve_output(const std::string& path) {
  const char* root = std::getenv("VSR_OUTPUT_ROOT");
  if (!root || *root == '\0' || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

void write_run_manifest(const std::string& path, const std::string& command,
                        const cfg::KvMap& resolved, std::uint64_t seed) {
  json j;
  j["schema_version"] = 1;
  j["command"] = command;
  j["version"] = VSR_VERSION;
  j["seed"] = seed;
  j["config"] = json(resolved);
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(path).parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write run manifest: " + path);
  os << j.dump(2) << "\n";
}

std::vector<VideoClip> load_scene_tree(const std::string& root) {
  const auto manifest = dataio::load_manifest(root, dataio::Layout::flat_scene_dirs);
  std::vector<VideoClip> clips;
  for (const auto& scene : manifest.scenes)
    clips.push_back(dataio::load_clip(manifest, scene.scene_id));
  return clips;
}

int cmd_prepare_data(const std::string& input, const std::string& output,
                     const std::string& layout, double sigma, int ksize, int scale,
                     bool force) {
  const std::string out = resolve_output(output);
  dataio::PrepareOptions opt;
  opt.degrade.sigma = sigma;
  opt.degrade.ksize = ksize;
  opt.degrade.scale = scale;
  opt.force = force;
  const auto manifest = dataio::load_manifest(input, dataio::layout_from_string(layout));
  const auto prepared = dataio::prepare_tree(manifest, out, opt);
  int written = 0, skipped = 0;
  for (const auto& s : prepared) (s.skipped ? skipped : written)++;
  cfg::KvMap resolved{{"input", input},        {"output", out},
                      {"layout", layout},      {"sigma", std::to_string(sigma)},
                      {"ksize", std::to_string(ksize)}, {"scale", std::to_string(scale)},
                      {"force", force ? "true" : "false"}};
  write_run_manifest((fs::path(out) / "run_manifest.json").string(), "prepare-data", resolved,
                     0);
  std::cout << "prepared " << written << " scene(s), skipped " << skipped << " under " << out
            << "\n";
  return 0;
}

std::vector<dataio::LRHRPair> load_prepared(const std::string& root) {
  std::ifstream mf(fs::path(root) / "manifest.jsonl");
  if (!mf)
    throw DataError("no manifest.jsonl under '" + root + "' (run prepare-data first)");
  std::vector<dataio::LRHRPair> pairs;
  std::string line;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw DataError("malformed manifest line under: " + root);
    }
    const std::string scene = j.at("scene_id").get<std::string>();
    dataio::LRHRPair pair;
    auto load_side = [&](const char* side) {
      const std::string dir = (fs::path(root) / side / scene).string();
      const auto m = dataio::load_manifest(dir, dataio::Layout::flat_scene_dirs);
      VideoClip clip = dataio::load_clip(m, m.scenes[0].scene_id);
      clip.scene_id = scene;
      return clip;
    };
    pair.lr = load_side("LR");
    pair.hr = load_side("HR");
    pairs.push_back(std::move(pair));
  }
  if (pairs.empty()) throw DataError("manifest lists no scenes under: " + root);
  return pairs;
}

int cmd_train(const std::string& config_path, const std::string& resume) {
  trainer::TrainConfig cfg = trainer::TrainConfig::from_kv(cfg::load_kv_file(config_path));
  cfg.out_dir = resolve_output(cfg.out_dir);
  if (cfg.data_root.empty())
    throw std::invalid_argument("train config: data_root must point at a prepared dataset");
  auto data = load_prepared(cfg.data_root);
  fs::create_directories(cfg.out_dir);
  write_run_manifest((fs::path(cfg.out_dir) / "run_manifest.json").string(), "train",
                     cfg.to_kv(), cfg.seed);
  const auto out = trainer::train(cfg, std::move(data), resume);
  std::cout << "trained " << cfg.total_steps << " step(s); final checkpoint "
            << out.final_checkpoint << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& input,
              const std::string& output) {
  const std::string out = resolve_output(output);
  const auto model = trainer::load_for_inference(checkpoint);
  const auto manifest = dataio::load_manifest(input, dataio::Layout::flat_scene_dirs);
  fs::create_directories(out);
  for (const auto& scene : manifest.scenes) {
    const VideoClip lr = dataio::load_clip(manifest, scene.scene_id);
    const VideoClip sr = model.infer(lr);
    const fs::path scene_dir = fs::path(out) / scene.scene_id;
    fs::create_directories(scene_dir);
    for (std::size_t i = 0; i < sr.frames.size(); ++i) {
      char name[16];
      std::snprintf(name, sizeof(name), "f%04zu.png", i);
      save_png((scene_dir / name).string(), sr.frames[i]);
    }
  }
  cfg::KvMap resolved{{"checkpoint", checkpoint}, {"input", input}, {"output", out}};
  write_run_manifest((fs::path(out) / "run_manifest.json").string(), "infer", resolved,
                     model.config.seed);
  std::cout << "super-resolved " << manifest.scenes.size() << " scene(s) into " << out << "\n";
  return 0;
}

void check_scene_match(const std::vector<VideoClip>& gen, const std::vector<VideoClip>& gt) {
  std::vector<std::string> gen_ids, gt_ids;
  for (const auto& c : gen) gen_ids.push_back(c.scene_id);
  for (const auto& c : gt) gt_ids.push_back(c.scene_id);
  std::sort(gen_ids.begin(), gen_ids.end());
  std::sort(gt_ids.begin(), gt_ids.end());
  std::vector<std::string> missing_in_gen, missing_in_gt;
  std::set_difference(gt_ids.begin(), gt_ids.end(), gen_ids.begin(), gen_ids.end(),
                      std::back_inserter(missing_in_gen));
  std::set_difference(gen_ids.begin(), gen_ids.end(), gt_ids.begin(), gt_ids.end(),
                      std::back_inserter(missing_in_gt));
  if (!missing_in_gen.empty() || !missing_in_gt.empty()) {
    std::string msg = "scene sets differ;";
    if (!missing_in_gen.empty()) {
      msg += " missing from --gen:";
      for (const auto& s : missing_in_gen) msg += " " + s;
    }
    if (!missing_in_gt.empty()) {
      msg += " missing from --gt:";
      for (const auto& s : missing_in_gt) msg += " " + s;
    }
    throw std::invalid_argument(msg);
  }
}

void write_report(const metrics::MetricReport& report, const std::string& report_path,
                  const std::string& command, const cfg::KvMap& resolved,
                  std::uint64_t seed) {
  const std::string out = resolve_output(report_path);
  if (!fs::path(out).parent_path().empty())
    fs::create_directories(fs::path(out).parent_path());
  {
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw DataError("cannot write report: " + out);
    os << report.to_json() << "\n";
  }
  const std::string csv = fs::path(out).replace_extension(".csv").string();
  {
    std::ofstream os(csv, std::ios::trunc);
    if (!os) throw DataError("cannot write report CSV: " + csv);
    os << report.to_csv();
  }
  write_run_manifest(out + ".manifest.json", command, resolved, seed);
  std::cout << command << ": PSNR ";
  if (report.overall.psnr_frames > 0)
    std::cout << report.overall.psnr;
  else
    std::cout << "inf";
  std::cout << " dB, SSIM " << report.overall.ssim << ", LPIPS(x10) "
            << report.overall.lpips * 10.0 << ", tOF " << report.overall.tof << " -> " << out
            << "\n";
}

int cmd_evaluate(const std::string& gen_dir, const std::string& gt_dir,
                 const std::string& report_path, const std::string& lpips_weights,
                 const std::string& model_id) {
  auto gen_clips = load_scene_tree(gen_dir);
  auto gt_clips = load_scene_tree(gt_dir);
  check_scene_match(gen_clips, gt_clips);
  metrics::EvaluateOptions opt;
  opt.model_id = model_id.empty() ? "evaluated-model" : model_id;
  opt.lpips_weights_path = lpips_weights;
  metrics::ProtocolConfig protocol;
  const auto report = metrics::evaluate(gen_clips, gt_clips, protocol, opt);
  cfg::KvMap resolved{{"gen", gen_dir},
                      {"gt", gt_dir},
                      {"report", report_path},
                      {"lpips_weights", lpips_weights},
                      {"model_id", opt.model_id}};
  write_report(report, report_path, "evaluate", resolved, opt.lpips_seed);
  return 0;
}

int cmd_baseline(const std::string& gt_dir, const std::string& report_path, double sigma,
                 int ksize, int scale) {
  auto gt_clips = load_scene_tree(gt_dir);
  dataio::DegradeParams params{sigma, ksize, scale};
  std::vector<VideoClip> gen_clips, gt_cropped;
  for (auto& clip : gt_clips) {
    VideoClip hr;
    hr.scene_id = clip.scene_id;
    for (const auto& f : clip.frames)
      hr.frames.push_back(dataio::center_crop_to_multiple(f, scale));
    const auto pair = dataio::degrade(hr, params);
    VideoClip up;
    up.scene_id = clip.scene_id;
    for (const auto& f : pair.lr.frames)
      up.frames.push_back(clamped(kern::bicubic_upsample(f, scale), 0.0, 1.0));
    gen_clips.push_back(std::move(up));
    gt_cropped.push_back(std::move(hr));
  }
  metrics::EvaluateOptions opt;
  opt.model_id = "bicubic-baseline";
  metrics::ProtocolConfig protocol;
  const auto report = metrics::evaluate(gen_clips, gt_cropped, protocol, opt);
  cfg::KvMap resolved{{"gt", gt_dir},
                      {"report", report_path},
                      {"sigma", std::to_string(sigma)},
                      {"ksize", std::to_string(ksize)},
                      {"scale", std::to_string(scale)}};
  write_report(report, report_path, "baseline", resolved, opt.lpips_seed);
  return 0;
}

// ---- report rendering -----------------------------------------------------

struct ColumnValues {
  std::string label;
  double psnr = 0.0;
  bool psnr_inf = false;
  double ssim = 0.0;
  double lpips_x10 = 0.0;
  double tof = 0.0;
};

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}
std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string render_table(const std::vector<ColumnValues>& cols) {
  const char* metric_names[] = {"PSNR", "SSIM", "LPIPS(x10)", "tOF"};
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Metric"});
  for (const auto& c : cols) grid[0].push_back(c.label);
  for (int mi = 0; mi < 4; ++mi) {
    std::vector<std::string> row{metric_names[mi]};
    for (const auto& c : cols) {
      switch (mi) {
        case 0: row.push_back(c.psnr_inf ? "inf" : fmt2(c.psnr)); break;
        case 1: row.push_back(c.ssim == c.ssim ? fmt3(c.ssim) : "NA"); break;
        case 2: row.push_back(c.lpips_x10 == c.lpips_x10 ? fmt2(c.lpips_x10) : "NA"); break;
        case 3: row.push_back(c.tof == c.tof ? fmt2(c.tof) : "NA"); break;
      }
    }
    grid.push_back(std::move(row));
  }
  std::vector<std::size_t> widths(grid[0].size(), 0);
  for (const auto& row : grid)
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  std::ostringstream os;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    for (std::size_t i = 0; i < grid[r].size(); ++i) {
      os << (i ? " | " : "| ");
      os << grid[r][i] << std::string(widths[i] - grid[r][i].size(), ' ');
    }
    os << " |\n";
    if (r == 0) {
      for (std::size_t i = 0; i < widths.size(); ++i)
        os << (i ? "-+-" : "+-") << std::string(widths[i], '-');
      os << "-+\n";
    }
  }
  return os.str();
}

std::string render_csv(const std::vector<ColumnValues>& cols) {
  std::ostringstream os;
  os << "metric";
  for (const auto& c : cols) os << "," << c.label;
  os << "\npsnr";
  for (const auto& c : cols) os << "," << (c.psnr_inf ? "inf" : fmt2(c.psnr));
  os << "\nssim";
  for (const auto& c : cols) os << "," << (c.ssim == c.ssim ? fmt3(c.ssim) : "NA");
  os << "\nlpips_x10";
  for (const auto& c : cols) os << "," << (c.lpips_x10 == c.lpips_x10 ? fmt2(c.lpips_x10) : "NA");
  os << "\ntof";
  for (const auto& c : cols) os << "," << (c.tof == c.tof ? fmt2(c.tof) : "NA");
  os << "\n";
  return os.str();
}

std::string default_reference_path() {
  if (const char* env = std::getenv("VSR_REFERENCE_TABLES"); env && *env) return env;
  if (fs::exists("data/reference_tables.json")) return "data/reference_tables.json";
  return "";
}

std::vector<ColumnValues> load_reference_columns(const std::string& path,
                                                 const std::string& dataset) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open reference tables: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception&) {
    throw DataError("malformed reference tables: " + path);
  }
  std::vector<ColumnValues> cols;
  const auto& ds = j.at("datasets");
  if (!ds.contains(dataset)) return cols;
  for (const auto& [model, vals] : ds.at(dataset).at("models").items()) {
    ColumnValues c;
    c.label = "paper-reported " + model;
    c.psnr = vals.value("psnr", std::nan(""));
    c.ssim = vals.value("ssim", std::nan(""));
    c.lpips_x10 = vals.value("lpips_x10", std::nan(""));
    c.tof = vals.value("tof", std::nan(""));
    cols.push_back(c);
  }
  return cols;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir,
               const std::string& reference, const std::string& reference_dataset,
               const std::string& loss_log) {
  const std::string out = resolve_output(out_dir);
  fs::create_directories(out);

  std::vector<metrics::MetricReport> reports;
  for (const auto& p : inputs) {
    std::ifstream is(p);
    if (!is) throw DataError("cannot open metric report: " + p);
    std::stringstream ss;
    ss << is.rdbuf();
    reports.push_back(metrics::MetricReport::from_json(ss.str()));
  }

  std::vector<ColumnValues> cols;
  for (const auto& r : reports) {
    ColumnValues c;
    c.label = r.model_id;
    c.psnr_inf = r.overall.psnr_frames == 0;
    c.psnr = r.overall.psnr;
    c.ssim = r.overall.ssim;
    c.lpips_x10 = r.overall.lpips * 10.0;
    c.tof = r.overall.tof;
    cols.push_back(c);
  }
  const std::string ref_path = reference.empty() ? default_reference_path() : reference;
  if (!ref_path.empty()) {
    const auto ref_cols = load_reference_columns(ref_path, reference_dataset);
    cols.insert(cols.end(), ref_cols.begin(), ref_cols.end());
  }

  const std::string table = render_table(cols);
  {
    std::ofstream os(fs::path(out) / "report_table.txt", std::ios::trunc);
    os << table;
  }
  {
    std::ofstream os(fs::path(out) / "report_table.csv", std::ios::trunc);
    os << render_csv(cols);
  }
  std::cout << table;

  // Per-frame metric curves: scenes concatenated in sorted order.
  for (const char* metric : {"psnr", "ssim"}) {
    std::vector<plot::Series> series;
    for (const auto& r : reports) {
      plot::Series s;
      s.label = r.model_id;
      double x = 0;
      for (const auto& scene : r.scenes)
        for (const auto& f : scene.frames) {
          s.xs.push_back(x++);
          if (std::string(metric) == "psnr")
            s.ys.push_back(f.psnr_inf ? std::nan("") : f.psnr);
          else
            s.ys.push_back(f.ssim);
        }
      series.push_back(std::move(s));
    }
    plot::line_chart((fs::path(out) / (std::string("frames_") + metric + ".png")).string(),
                     std::string("per-frame ") + metric, "frame", metric, series);
  }

  if (!loss_log.empty()) {
    std::ifstream is(loss_log);
    if (!is) throw DataError("cannot open training log: " + loss_log);
    std::vector<plot::Series> series(6);
    const char* names[] = {"pixel", "adv", "pingpong", "feature", "warp", "total"};
    for (int i = 0; i < 6; ++i) series[i].label = names[i];
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception&) {
        throw DataError("malformed training log line in: " + loss_log);
      }
      const double step = j.at("step").get<double>();
      for (int i = 0; i < 6; ++i) {
        series[i].xs.push_back(step);
        series[i].ys.push_back(j.at(names[i]).get<double>());
      }
    }
    plot::line_chart((fs::path(out) / "loss_curves.png").string(), "training losses", "step",
                     "loss", series);
  }

  cfg::KvMap resolved{{"out", out},
                      {"reference", ref_path},
                      {"reference_dataset", reference_dataset},
                      {"loss_log", loss_log}};
  for (std::size_t i = 0; i < inputs.size(); ++i)
    resolved["input" + std::to_string(i)] = inputs[i];
  write_run_manifest((fs::path(out) / "run_manifest.json").string(), "report", resolved, 0);
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"back-projection video super-resolution toolkit"};
  app.set_version_flag("--version", VSR_VERSION);
  app.require_subcommand(1);

  // prepare-data
  auto* prep = app.add_subcommand("prepare-data",
                                  "degrade an HR dataset into aligned LR/HR training pairs");
  std::string prep_input, prep_output, prep_layout = "flat";
  double prep_sigma = 1.5;
  int prep_ksize = 13, prep_scale = 4;
  bool prep_force = false;
  prep->add_option("--input", prep_input, "HR scene tree")->required();
  prep->add_option("--output", prep_output, "output tree root")->required();
  prep->add_option("--layout", prep_layout, "flat | septuplet");
  prep->add_option("--sigma", prep_sigma, "Gaussian blur sigma");
  prep->add_option("--ksize", prep_ksize, "Gaussian kernel size (odd)");
  prep->add_option("--scale", prep_scale, "downsampling factor");
  prep->add_flag("--force", prep_force, "rewrite existing outputs");

  // train
  auto* train_cmd = app.add_subcommand("train", "run a training preset from a config file");
  std::string train_config, train_resume;
  train_cmd->add_option("--config", train_config, "flat key/value config file")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "super-resolve LR scenes with a checkpoint");
  std::string infer_ckpt, infer_input, infer_output;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "trained checkpoint")->required();
  infer_cmd->add_option("--input", infer_input, "LR scene tree")->required();
  infer_cmd->add_option("--output", infer_output, "output tree")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "metric report for generated vs GT scenes");
  std::string eval_gen, eval_gt, eval_report, eval_lpips, eval_model;
  eval_cmd->add_option("--gen", eval_gen, "generated scene tree")->required();
  eval_cmd->add_option("--gt", eval_gt, "ground-truth scene tree")->required();
  eval_cmd->add_option("--report", eval_report, "output report JSON path")->required();
  eval_cmd->add_option("--lpips-weights", eval_lpips, "external perceptual backbone archive");
  eval_cmd->add_option("--model-id", eval_model, "label recorded in the report");

  // baseline
  auto* base_cmd =
      app.add_subcommand("baseline", "training-free bicubic upsampling baseline report");
  std::string base_gt, base_report;
  double base_sigma = 1.5;
  int base_ksize = 13, base_scale = 4;
  base_cmd->add_option("--gt", base_gt, "ground-truth scene tree")->required();
  base_cmd->add_option("--report", base_report, "output report JSON path")->required();
  base_cmd->add_option("--sigma", base_sigma, "degradation blur sigma");
  base_cmd->add_option("--ksize", base_ksize, "degradation kernel size (odd)");
  base_cmd->add_option("--scale", base_scale, "degradation factor");

  // report
  auto* rep_cmd = app.add_subcommand("report", "merge metric reports into tables and plots");
  std::vector<std::string> rep_inputs;
  std::string rep_out, rep_reference, rep_dataset = "Vid4", rep_loss_log;
  rep_cmd->add_option("--inputs", rep_inputs, "metric report JSON files")
      ->required()
      ->expected(-1);
  rep_cmd->add_option("--out", rep_out, "output directory")->required();
  rep_cmd->add_option("--reference", rep_reference, "reference tables JSON");
  rep_cmd->add_option("--reference-dataset", rep_dataset, "reference dataset label");
  rep_cmd->add_option("--loss-log", rep_loss_log, "training log for loss curves");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "vsr: error: bad-arguments: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (*prep)
      return cmd_prepare_data(prep_input, prep_output, prep_layout, prep_sigma, prep_ksize,
                              prep_scale, prep_force);
    if (*train_cmd) return cmd_train(train_config, train_resume);
    if (*infer_cmd) return cmd_infer(infer_ckpt, infer_input, infer_output);
    if (*eval_cmd)
      return cmd_evaluate(eval_gen, eval_gt, eval_report, eval_lpips, eval_model);
    if (*base_cmd)
      return cmd_baseline(base_gt, base_report, base_sigma, base_ksize, base_scale);
    if (*rep_cmd)
      return cmd_report(rep_inputs, rep_out, rep_reference, rep_dataset, rep_loss_log);
    std::cerr << "vsr: error: bad-arguments: no subcommand given\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "vsr: error: data: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "vsr: error: bad-arguments: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "vsr: error: runtime: " << one_line(e.what()) << "\n";
    return 4;
  }
}

}  // namespace vsr::cli
