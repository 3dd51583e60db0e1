// fmlc: batch front end for expert fusion, logit smoothing and evaluation of
// land-cover label rasters produced by an upstream classifier.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fmlc/fmlc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Raised for bad flags, missing files and invalid configs (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool is_tiff(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".tif" || ext == ".tiff";
}

void require_file(const fs::path& p, const std::string& role) {
  if (p.empty()) throw UsageError("missing " + role + " path");
  if (!fs::is_regular_file(p)) throw UsageError(role + " not found: " + p.string());
}

fmlc::LabelMap load_labels(const fs::path& p, const std::string& role) {
  require_file(p, role);
  return is_tiff(p) ? fmlc::read_label_tiff(p) : fmlc::read_labels(p);
}

struct LoadedProbs {
  fmlc::ProbabilityMap probs;
  std::vector<std::string> legend;
};

LoadedProbs load_probs(const fs::path& p) {
  require_file(p, "coarse probability map");
  fmlc::TensorBlob blob = fmlc::read_tensor_blob(p);
  if (blob.dtype != "f32") throw fmlc::InvalidInput("coarse probability map must be f32");
  LoadedProbs out{fmlc::ProbabilityMap(blob.height, blob.width, blob.bands, std::move(blob.f32)), {}};
  fmlc::validate(out.probs);
  if (blob.legend.size() == blob.bands) out.legend = blob.legend;
  else if (blob.band_names.size() == blob.bands) out.legend = blob.band_names;
  return out;
}

fmlc::BinaryProbMap load_expert(const fs::path& p) {
  require_file(p, "expert map");
  fmlc::TensorBlob blob = fmlc::read_tensor_blob(p);
  if (blob.dtype != "f32" || blob.bands != 1) throw fmlc::InvalidInput("expert map must be single-band f32");
  fmlc::BinaryProbMap g(blob.height, blob.width, std::move(blob.f32));
  fmlc::validate(g);
  return g;
}

void save_labels(const fmlc::LabelMap& m, const fs::path& out, const std::string& format) {
  if (out.empty()) throw UsageError("missing output path");
  if (format == "tiff") fmlc::write_label_tiff(m, out);
  else if (format == "fmt") fmlc::write_labels(out, m);
  else throw UsageError("unknown output format \"" + format + "\" (expected tiff or fmt)");
}

/// Settings shared by fuse, smooth and pipeline: a JSON config file with
/// command-line overrides on top.
struct PipelineConfig {
  fs::path coarse;
  std::map<std::uint8_t, fs::path> experts;
  std::vector<fmlc::FusionRule> rules;
  fmlc::SmoothingParams smoothing;
  bool smoothing_enabled = true;
  fs::path output;
  std::string format;
  fs::path reference;
};

struct ConfigFlags {
  std::string config;
  std::string coarse;
  std::vector<std::string> experts;  // "k=path"
  std::string rules;
  std::string output;
  std::string format;
  std::string reference;
  std::optional<std::size_t> window;
  std::optional<double> alpha;
  std::optional<double> sigma2;
  std::optional<std::string> variant;
  std::optional<double> tau;
  bool no_smooth = false;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f, bool with_smoothing, bool with_fusion) {
  cmd->add_option("--config", f.config, "JSON pipeline config");
  cmd->add_option("--coarse,--input", f.coarse, "coarse probability map (.fmt, f32 H x W x C)");
  cmd->add_option("-o,--output", f.output, "output label raster");
  cmd->add_option("--format", f.format, "output format: tiff or fmt (default from extension)");
  if (with_fusion) {
    cmd->add_option("--expert", f.experts, "expert map as CLASS=PATH (repeatable)");
    cmd->add_option("--rules", f.rules, "JSON file with [{k, k_prime, tau}]");
    cmd->add_option("--tau", f.tau, "override every rule's threshold");
  }
  if (with_smoothing) {
    cmd->add_option("--window", f.window, "smoothing window (odd)");
    cmd->add_option("--alpha", f.alpha, "top fraction of window values");
    cmd->add_option("--sigma2", f.sigma2, "observation variance");
    cmd->add_option("--variant", f.variant, "prose-consistent or literal-eq11");
  }
}

json read_json_file(const fs::path& p, const std::string& role) {
  require_file(p, role);
  std::ifstream in(p);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw UsageError(role + " is not valid JSON: " + p.string());
  return j;
}

PipelineConfig resolve_config(const ConfigFlags& f) {
  PipelineConfig cfg;
  if (!f.config.empty()) {
    const fs::path cfg_path(f.config);
    const json j = read_json_file(cfg_path, "config");
    const fs::path base = cfg_path.parent_path();
    auto rel = [&](const std::string& s) { return fs::path(s).is_absolute() ? fs::path(s) : base / s; };
    try {
      if (j.contains("coarse")) cfg.coarse = rel(j["coarse"].get<std::string>());
      if (j.contains("experts")) {
        for (const auto& [k, v] : j["experts"].items()) {
          cfg.experts[static_cast<std::uint8_t>(std::stoi(k))] = rel(v.get<std::string>());
        }
      }
      if (j.contains("rules")) cfg.rules = fmlc::rules_from_json(j["rules"]);
      if (j.contains("smoothing")) {
        if (j["smoothing"].is_boolean() || j["smoothing"].is_null()) {
          cfg.smoothing_enabled = j["smoothing"].is_boolean() && j["smoothing"].get<bool>();
        } else {
          cfg.smoothing = fmlc::smoothing_from_json(j["smoothing"]);
        }
      }
      if (j.contains("output")) cfg.output = rel(j["output"].get<std::string>());
      if (j.contains("format")) cfg.format = j["format"].get<std::string>();
      if (j.contains("reference")) cfg.reference = rel(j["reference"].get<std::string>());
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad config field: ") + e.what());
    } catch (const std::invalid_argument&) {
      throw UsageError("expert keys must be integer class ids");
    }
  }
  if (!f.coarse.empty()) cfg.coarse = f.coarse;
  for (const auto& spec : f.experts) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw UsageError("--expert expects CLASS=PATH, got " + spec);
    try {
      cfg.experts[static_cast<std::uint8_t>(std::stoi(spec.substr(0, eq)))] = spec.substr(eq + 1);
    } catch (const std::exception&) {
      throw UsageError("--expert class must be an integer: " + spec);
    }
  }
  if (!f.rules.empty()) cfg.rules = fmlc::rules_from_json(read_json_file(f.rules, "rules file"));
  if (f.tau) {
    for (auto& r : cfg.rules) r.tau = *f.tau;
  }
  if (f.window) cfg.smoothing.window = *f.window;
  if (f.alpha) cfg.smoothing.alpha = *f.alpha;
  if (f.sigma2) cfg.smoothing.sigma2 = *f.sigma2;
  if (f.variant) cfg.smoothing.variant = fmlc::parse_variant(*f.variant);
  if (f.no_smooth) cfg.smoothing_enabled = false;
  if (!f.output.empty()) cfg.output = f.output;
  if (!f.format.empty()) cfg.format = f.format;
  if (!f.reference.empty()) cfg.reference = f.reference;
  if (cfg.format.empty()) cfg.format = is_tiff(cfg.output) ? "tiff" : "fmt";
  cfg.smoothing.validate();
  return cfg;
}

fmlc::ExpertMaps load_experts(const PipelineConfig& cfg) {
  fmlc::ExpertMaps experts;
  for (const auto& rule : cfg.rules) {
    auto it = cfg.experts.find(rule.flagged);
    if (it == cfg.experts.end()) {
      throw UsageError("no expert map configured for flagged class " + std::to_string(rule.flagged));
    }
    if (!experts.count(rule.flagged)) experts.emplace(rule.flagged, load_expert(it->second));
  }
  return experts;
}

void print_changes(const fmlc::PipelineResult& res) {
  for (const auto& c : res.changes) std::cout << "stage " << c.stage << ": " << c.changed << " pixels changed\n";
}

void print_evaluation(const fmlc::LabelMap& pred, const fmlc::LabelMap& truth, std::optional<std::uint8_t> ignore,
                      std::size_t threads) {
  const fmlc::ConfusionMatrix cm = fmlc::confusion(pred, truth, ignore, threads);
  const fmlc::MetricReport rep = fmlc::metrics(cm);
  const auto& legend = truth.legend.size() >= pred.legend.size() ? truth.legend : pred.legend;
  fmlc::print_table(std::cout, cm, rep, legend);
  std::cout << fmlc::to_json(rep, legend).dump(2) << '\n';
}

int run_fusion_command(const ConfigFlags& flags, std::size_t threads, bool fuse, bool smooth_only) {
  PipelineConfig cfg = resolve_config(flags);
  LoadedProbs in = load_probs(cfg.coarse);
  fmlc::ExpertMaps experts;
  std::vector<fmlc::FusionRule> rules;
  if (!smooth_only) {
    for (const auto& r : cfg.rules) {
      try {
        r.validate(in.probs.classes());
      } catch (const fmlc::ConfigError& e) {
        throw UsageError(e.what());
      }
    }
    experts = load_experts(cfg);
    rules = cfg.rules;
  }
  std::optional<fmlc::SmoothingParams> smoothing;
  if (!fuse && cfg.smoothing_enabled) smoothing = cfg.smoothing;
  const fmlc::PipelineResult res = fmlc::run_pipeline(in.probs, experts, rules, smoothing, threads, in.legend);
  print_changes(res);
  save_labels(res.labels, cfg.output, cfg.format);
  if (!fuse && !smooth_only && !cfg.reference.empty()) {
    print_evaluation(res.labels, load_labels(cfg.reference, "reference labels"), std::nullopt, threads);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fmlc: expert fusion, Bayesian logit smoothing and land-cover evaluation"};
  app.require_subcommand(1);
  std::size_t threads = fmlc::default_threads();
  app.add_option("--threads", threads, "worker threads (default $FMLC_THREADS or 1)")->check(CLI::PositiveNumber);
  app.fallthrough();

  ConfigFlags fuse_flags, smooth_flags, pipe_flags;
  auto* fuse = app.add_subcommand("fuse", "coarse argmax plus expert overrides");
  add_config_flags(fuse, fuse_flags, false, true);
  auto* smooth = app.add_subcommand("smooth", "windowed logit smoothing of a probability map");
  add_config_flags(smooth, smooth_flags, true, false);
  auto* pipeline = app.add_subcommand("pipeline", "argmax, overrides, smoothing and optional evaluation");
  add_config_flags(pipeline, pipe_flags, true, true);
  pipeline->add_option("--reference", pipe_flags.reference, "reference labels for evaluation");
  pipeline->add_flag("--no-smooth", pipe_flags.no_smooth, "skip the smoothing stage");

  std::string pred_path, truth_path;
  std::optional<int> ignore_id;
  std::string json_out;
  auto* evaluate = app.add_subcommand("evaluate", "confusion matrix and accuracy report");
  evaluate->add_option("--pred", pred_path, "predicted labels (.fmt or .tif)")->required();
  evaluate->add_option("--truth", truth_path, "reference labels (.fmt or .tif)")->required();
  evaluate->add_option("--ignore", ignore_id, "reference id to exclude")->check(CLI::Range(0, 255));
  evaluate->add_option("--json", json_out, "also write the report JSON here");

  std::size_t top_n = 1;
  double detect_tau = 0.5;
  std::string rules_out;
  auto* detect = app.add_subcommand("detect-confusion", "rank confused class pairs into fusion rules");
  detect->add_option("--pred", pred_path, "predicted labels")->required();
  detect->add_option("--truth", truth_path, "reference labels")->required();
  detect->add_option("--top-n", top_n, "number of rules to emit");
  detect->add_option("--tau", detect_tau, "threshold written into each rule");
  detect->add_option("-o,--output", rules_out, "write rules JSON here instead of stdout");

  fmlc::SceneSpec scene;
  int flagged = scene.flagged, partner = scene.partner;
  std::string out_dir = ".";
  std::string synth_format = "tiff";
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic scene and pipeline config");
  synth->add_option("--seed", scene.seed, "random seed");
  synth->add_option("--height", scene.height);
  synth->add_option("--width", scene.width);
  synth->add_option("--classes", scene.classes);
  synth->add_option("--blobs", scene.blobs);
  synth->add_option("--confusion", scene.confusion_strength, "confusion strength in [0,1]");
  synth->add_option("--noise", scene.noise_rate, "impulse noise rate in [0,1]");
  synth->add_option("--k", flagged, "flagged class id");
  synth->add_option("--k-prime", partner, "partner class id");
  synth->add_option("--out-dir", out_dir, "output directory");
  synth->add_option("--format", synth_format, "output format written into the generated config");

  std::string convert_in, convert_out;
  auto* convert = app.add_subcommand("convert", "convert label rasters between .fmt and GeoTIFF");
  convert->add_option("input", convert_in)->required();
  convert->add_option("output", convert_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*fuse) return run_fusion_command(fuse_flags, threads, true, false);
    if (*smooth) return run_fusion_command(smooth_flags, threads, false, true);
    if (*pipeline) return run_fusion_command(pipe_flags, threads, false, false);

    if (*evaluate) {
      const fmlc::LabelMap pred = load_labels(pred_path, "predicted labels");
      const fmlc::LabelMap truth = load_labels(truth_path, "reference labels");
      if (!pred.same_extent(truth)) throw UsageError("predicted and reference label maps differ in shape");
      std::optional<std::uint8_t> ignore;
      if (ignore_id) ignore = static_cast<std::uint8_t>(*ignore_id);
      print_evaluation(pred, truth, ignore, threads);
      if (!json_out.empty()) {
        const auto rep = fmlc::metrics(fmlc::confusion(pred, truth, ignore, threads));
        std::ofstream(json_out) << fmlc::to_json(rep, truth.legend).dump(2) << '\n';
      }
      return 0;
    }

    if (*detect) {
      const fmlc::LabelMap pred = load_labels(pred_path, "predicted labels");
      const fmlc::LabelMap truth = load_labels(truth_path, "reference labels");
      if (!pred.same_extent(truth)) throw UsageError("predicted and reference label maps differ in shape");
      const auto rules = fmlc::detect_confusion(fmlc::confusion(pred, truth, std::nullopt, threads), top_n, detect_tau);
      const std::string text = fmlc::to_json(rules).dump(2) + "\n";
      if (rules_out.empty()) std::cout << text;
      else std::ofstream(rules_out) << text;
      return 0;
    }

    if (*synth) {
      if (flagged < 0 || flagged > 255 || partner < 0 || partner > 255) throw UsageError("class ids must fit in 8 bits");
      scene.flagged = static_cast<std::uint8_t>(flagged);
      scene.partner = static_cast<std::uint8_t>(partner);
      const fmlc::Scene s = fmlc::generate_scene(scene);
      const fs::path dir(out_dir);
      fs::create_directories(dir);
      fmlc::write_labels(dir / "truth.fmt", s.truth);
      fmlc::MultiBandRaster coarse(s.coarse_probs);
      coarse.band_names = s.truth.legend;
      fmlc::write_tensor(dir / "coarse.fmt", coarse);
      fmlc::write_tensor(dir / "expert.fmt", s.expert_probs);
      const std::string output = synth_format == "tiff" ? "final.tif" : "final.fmt";
      json cfg = {{"coarse", "coarse.fmt"},
                  {"experts", {{std::to_string(scene.flagged), "expert.fmt"}}},
                  {"rules", fmlc::to_json(std::vector<fmlc::FusionRule>{{scene.flagged, scene.partner, 0.5}})},
                  {"smoothing", fmlc::to_json(fmlc::SmoothingParams{})},
                  {"output", output},
                  {"format", synth_format},
                  {"reference", "truth.fmt"}};
      std::ofstream(dir / "pipeline.json") << cfg.dump(2) << '\n';
      std::cout << "wrote scene (seed " << scene.seed << ") to " << dir.string() << '\n';
      return 0;
    }

    if (*convert) {
      const fmlc::LabelMap m = load_labels(convert_in, "input labels");
      save_labels(m, convert_out, is_tiff(convert_out) ? "tiff" : "fmt");
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "fmlc: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fmlc::ConfigError& e) {
    std::cerr << "fmlc: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "fmlc: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
