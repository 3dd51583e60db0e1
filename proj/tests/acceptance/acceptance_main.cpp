// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances and trial counts are fixed here.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "fmlc/fmlc.hpp"

namespace {

using namespace fmlc;
using Clock = std::chrono::steady_clock;

constexpr double kOaTarget = 96.09;       // percent
constexpr double kOaTolerance = 0.01;     // percentage points
constexpr double kKappaTarget = 0.939;
constexpr double kKappaTolerance = 0.002;
constexpr double kSpreadsheetTolerance = 1e-12;
constexpr double kStitchTolerance = 1e-6;
constexpr double kMinF1Gain = 0.10;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return std::min(static_cast<std::size_t>(uniform() * n), n - 1); }

 private:
  std::mt19937_64 engine_;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename T>
bool same_bits(const Grid<T>& a, const Grid<T>& b) {
  return a.size() == b.size() && a.height() == b.height() && a.width() == b.width() &&
         std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(T)) == 0;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

LogitMap random_logits(std::size_t h, std::size_t w, std::size_t c, Rng& rng, bool tied) {
  LogitMap l(h, w, c);
  for (float& v : l.values()) {
    v = tied ? static_cast<float>(static_cast<int>(rng.below(5)) - 2) * 0.5f : static_cast<float>(rng.uniform(-4, 4));
  }
  return l;
}

Outcome ac1_table() {
  Check chk;
  const auto t0 = Clock::now();
  // Rows classified, columns reference.
  const ConfusionMatrix cm(4, {2532004, 2158, 28044, 20066,  //
                               121, 691170, 11840, 4077,     //
                               33406, 34986, 7705119, 262471,  //
                               7840, 16966, 187956, 4059344});
  const MetricReport r = metrics(cm);
  const double elapsed = seconds_since(t0);
  chk.expect(std::abs(100.0 * r.overall_acc - kOaTarget) <= kOaTolerance, "overall accuracy " + fixed(100 * r.overall_acc, 4));
  chk.expect(std::abs(r.kappa - kKappaTarget) <= kKappaTolerance, "kappa " + fixed(r.kappa, 5));

  // Spreadsheet oracle recomputed from the cells, not from the library.
  const double precision[] = {0.9805334217309408, 0.977322089116639, 0.9588273094688365, 0.9501973967874393};
  const double recall[] = {0.9839249762276796, 0.9273964147702877, 0.9712793170871046, 0.934050444113818};
  const double f1[] = {0.9822262712914761, 0.9517049366328671, 0.9650131464572385, 0.9420547352630475};
  for (int c = 0; c < 4; ++c) {
    chk.expect(std::abs(r.per_class[c].user_acc - precision[c]) <= kSpreadsheetTolerance, "precision class " + std::to_string(c));
    chk.expect(std::abs(r.per_class[c].producer_acc - recall[c]) <= kSpreadsheetTolerance, "recall class " + std::to_string(c));
    chk.expect(std::abs(r.per_class[c].f1 - f1[c]) <= kSpreadsheetTolerance, "f1 class " + std::to_string(c));
  }
  chk.expect(elapsed < 1.0, "runtime " + fixed(elapsed, 3) + " s");
  chk.note("OA " + fixed(100 * r.overall_acc, 3) + "%, kappa " + fixed(r.kappa, 4) + ", " + fixed(elapsed * 1e3, 2) + " ms");
  return chk.result();
}

Outcome ac2_truth_table() {
  Check chk;
  const std::uint8_t k = 1, kp = 0, other = 2;
  const FusionRule rule{k, kp, 0.5};
  const std::uint8_t coarse_ids[] = {k, kp, other};
  const float experts[] = {0.25f, 0.5f, 0.75f};
  LabelMap coarse(3, 3, land_cover_legend());
  BinaryProbMap expert(3, 3);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      coarse(a, b) = coarse_ids[a];
      expert(a, b) = experts[b];
    }
  }
  const LabelMap out = expert_override(coarse, expert, rule);
  int cases = 0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      // coarse outside the pair keeps its label; inside, expert >= tau selects k.
      const std::uint8_t want = coarse_ids[a] == other ? other : (experts[b] >= 0.5f ? k : kp);
      chk.expect(out(a, b) == want, "case coarse=" + std::to_string(coarse_ids[a]) + " expert=" + fixed(experts[b], 2));
      ++cases;
    }
  }
  chk.note(std::to_string(cases) + " cases exact");
  return chk.result();
}

Outcome ac3_oracle() {
  Check chk;
  const auto t0 = Clock::now();
  const std::size_t windows[] = {1, 3, 5, 7};
  const double alphas[] = {0.25, 0.5, 1.0};
  constexpr int kInstances = 120;
  for (int seed = 0; seed < kInstances; ++seed) {
    Rng rng(1000 + static_cast<std::uint64_t>(seed));
    const std::size_t h = 1 + rng.below(64), w = 1 + rng.below(64), c = 1 + rng.below(4);
    const LogitMap l = random_logits(h, w, c, rng, seed % 3 == 0);
    const SmoothingParams params{windows[rng.below(4)], alphas[rng.below(3)], rng.uniform(0.1, 4.0),
                                 seed % 2 ? BlendVariant::LiteralEq11 : BlendVariant::ProseConsistent};
    const std::size_t threads = 1 + rng.below(8);
    const WindowStats fast = window_stats(l, params, threads);
    const WindowStats slow = naive_window_stats(l, params);
    chk.expect(same_bits(fast.mean, slow.mean) && same_bits(fast.variance, slow.variance),
               "window stats differ for seed " + std::to_string(seed));
    const SmoothResult s = smooth(l, params, threads);
    const LogitMap reference = naive_smooth_reference(l, params);
    chk.expect(same_bits(s.logits, reference), "smoothed logits differ for seed " + std::to_string(seed));
    chk.expect(s.labels == argmax_labels(reference), "labels differ for seed " + std::to_string(seed));
  }
  const double elapsed = seconds_since(t0);
  chk.expect(elapsed < 30.0, "runtime " + fixed(elapsed, 2) + " s");
  chk.note(std::to_string(kInstances) + " instances bit-exact, " + fixed(elapsed, 2) + " s");
  return chk.result();
}

Outcome ac4_identities() {
  Check chk;
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 1 + rng.below(40), w = 1 + rng.below(40), c = 1 + rng.below(5);
    LogitMap flat(h, w, c);
    std::vector<float> level(c);
    for (float& v : level) v = static_cast<float>(rng.uniform(-6, 6));
    for (std::size_t i = 0; i < flat.pixels(); ++i) {
      for (std::size_t b = 0; b < c; ++b) flat.at_pixel(i, b) = level[b];
    }
    for (auto variant : {BlendVariant::ProseConsistent, BlendVariant::LiteralEq11}) {
      const SmoothingParams params{1 + 2 * rng.below(4), rng.uniform(0.05, 1.0), rng.uniform(0.1, 10.0), variant};
      chk.expect(smooth(flat, params).labels == argmax_labels(flat), "constant field not argmax-fixed");

      const LogitMap l = random_logits(h, w, c, rng, false);
      const SmoothingParams unit{1, params.alpha, params.sigma2, variant};
      chk.expect(same_bits(smooth(l, unit).logits, l), "W=1 not identity");
    }

    ProbabilityMap p(h, w, c + 1);
    for (std::size_t i = 0; i < p.pixels(); ++i) {
      double sum = 0;
      std::vector<double> raw(c + 1);
      for (double& v : raw) sum += (v = rng.uniform(0.01, 1.0));
      for (std::size_t b = 0; b <= c; ++b) p.at_pixel(i, b) = static_cast<float>(raw[b] / sum);
    }
    const LabelMap plain = argmax_labels(p);
    chk.expect(run_pipeline(p, {}, {}, std::nullopt).labels.storage() == plain.storage(),
               "empty pipeline without smoothing differs from argmax");
    chk.expect(run_pipeline(p, {}, {}, SmoothingParams{1, 0.5, 1.0}).labels.storage() == plain.storage(),
               "empty pipeline with W=1 smoothing differs from argmax");
  }
  chk.note("20 random shapes, both blend variants");
  return chk.result();
}

SceneSpec improvement_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.confusion_strength = 0.5;
  spec.seed = seed;
  return spec;
}

Outcome ac5_improvement() {
  Check chk;
  const auto t0 = Clock::now();
  int improved = 0;
  double min_gain = INFINITY;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SceneSpec spec = improvement_scene(seed);
    const Scene s = generate_scene(spec);
    const double before = metrics(confusion(argmax_labels(s.coarse_probs), s.truth)).per_class[spec.flagged].f1;
    const PipelineResult res = run_pipeline(s.coarse_probs, {{spec.flagged, s.expert_probs}},
                                            {FusionRule{spec.flagged, spec.partner, 0.5}}, SmoothingParams{});
    const double after = metrics(confusion(res.labels, s.truth)).per_class[spec.flagged].f1;
    min_gain = std::min(min_gain, after - before);
    if (after - before >= kMinF1Gain) ++improved;
  }
  const double elapsed = seconds_since(t0);
  chk.expect(improved >= 9, std::to_string(improved) + "/10 seeds gained >= 0.10");
  chk.expect(elapsed < 60.0, "runtime " + fixed(elapsed, 2) + " s");
  chk.note(std::to_string(improved) + "/10 seeds gained >= 0.10 (min gain " + fixed(min_gain, 3) + "), " +
           fixed(elapsed, 2) + " s");
  return chk.result();
}

Outcome ac6_noise() {
  Check chk;
  constexpr int kTrials = 50;
  int energy_ok = 0;
  int islands_ok = 0;
  for (int t = 0; t < kTrials; ++t) {
    SceneSpec spec;
    spec.seed = 500 + static_cast<std::uint64_t>(t);
    spec.noise_rate = 0.01 + 0.04 * t / (kTrials - 1);
    const Scene s = generate_scene(spec);
    const LogitMap l = probs_to_logits(s.coarse_probs);
    const LabelMap before = argmax_labels(l);
    const LabelMap after = smooth(l, SmoothingParams{}).labels;
    if (disagreeing_edges(after) <= disagreeing_edges(before)) ++energy_ok;
    if (count_isolated_pixels(after) < count_isolated_pixels(before)) ++islands_ok;
  }
  chk.expect(energy_ok * 100 >= 95 * kTrials, "pairwise term did not drop often enough: " + std::to_string(energy_ok));
  chk.expect(islands_ok == kTrials, "islands decreased in only " + std::to_string(islands_ok) + " trials");
  chk.note("pairwise term non-increasing " + std::to_string(energy_ok) + "/" + std::to_string(kTrials) +
           ", islands decreased " + std::to_string(islands_ok) + "/" + std::to_string(kTrials));
  return chk.result();
}

Outcome ac7_io() {
  Check chk;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("fmlc_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  Rng rng(7);

  MultiBandRaster x(37, 53, 5);
  for (float& v : x.values()) {
    std::uint32_t bits = static_cast<std::uint32_t>(rng.uniform() * 4294967296.0);
    std::memcpy(&v, &bits, sizeof v);
  }
  x.band_names = {"b0", "b1", "b2", "b3", "b4"};
  write_tensor(dir / "x.fmt", x);
  chk.expect(same_bits<float>(read_tensor(dir / "x.fmt"), x), ".fmt round trip not bit-exact");

  LabelMap m(257, 131, land_cover_legend());
  for (auto& v : m.values()) v = static_cast<std::uint8_t>(rng.below(4));
  write_label_tiff(m, dir / "m.tif");
  const LabelMap back = read_label_tiff(dir / "m.tif");
  chk.expect(back == m, "GeoTIFF round trip not pixel-exact");

  const fs::path golden = fs::path(FMLC_TEST_DATA_DIR) / "labels_2x2.tif";
  const LabelMap tiny(2, 2, std::vector<std::uint8_t>{0, 1, 2, 3}, land_cover_legend());
  bool golden_ok = false;
  try {
    golden_ok = read_file_bytes(golden) == encode_label_tiff(tiny);
  } catch (const Error&) {
  }
  chk.expect(golden_ok, "golden 2x2 TIFF bytes differ");
  fs::remove_all(dir);
  chk.note(".fmt bit-exact, TIFF pixel-exact, golden bytes match");
  return chk.result();
}

Outcome ac8_tiling() {
  Check chk;
  const TileSpec spec{256, 128, EdgePolicy::PadReplicate};
  chk.expect(tile_origins(512, 512, spec).size() == 9, "512x512 did not give 9 tiles");
  Rng rng(8);
  MultiBandRaster x(512, 512, 4);
  for (float& v : x.values()) v = static_cast<float>(rng.uniform(-100, 100));
  const MultiBandRaster back = stitch(tile(x, spec), 512, 512);
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(double(back.values()[i]) - x.values()[i]));
  chk.expect(worst <= kStitchTolerance, "stitch error " + fixed(worst, 9));

  MultiBandRaster odd(300, 300, 2);
  for (float& v : odd.values()) v = static_cast<float>(rng.uniform());
  double worst_odd = 0;
  const MultiBandRaster back_odd = stitch(tile(odd, spec), 300, 300);
  for (std::size_t i = 0; i < odd.size(); ++i) {
    worst_odd = std::max(worst_odd, std::abs(double(back_odd.values()[i]) - odd.values()[i]));
  }
  chk.expect(worst_odd <= kStitchTolerance, "300x300 stitch error " + fixed(worst_odd, 9));
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << std::max(worst, worst_odd);
  chk.note("9 tiles, max stitch error " + os.str());
  return chk.result();
}

Outcome ac9_determinism() {
  Check chk;
  SceneSpec spec;
  spec.height = 150;
  spec.width = 170;
  spec.confusion_strength = 0.5;
  spec.noise_rate = 0.03;
  spec.seed = 99;
  const Scene s = generate_scene(spec);
  const ExpertMaps experts{{spec.flagged, s.expert_probs}};
  const std::vector<FusionRule> rules{{spec.flagged, spec.partner, 0.5}};

  struct Bytes {
    std::vector<std::uint8_t> labels, tiff, probs, cm, stitched;
  };
  auto produce = [&](std::size_t threads) {
    const PipelineResult res = run_pipeline(s.coarse_probs, experts, rules, SmoothingParams{}, threads);
    Bytes b;
    b.labels = encode_tensor(res.labels);
    b.tiff = encode_label_tiff(res.labels);
    b.probs = encode_tensor(MultiBandRaster(Grid<float>(*res.smoothed_probs)));
    const ConfusionMatrix cm = confusion(res.labels, s.truth, {}, threads);
    const auto* raw = reinterpret_cast<const std::uint8_t*>(cm.counts().data());
    b.cm.assign(raw, raw + cm.counts().size() * sizeof(std::uint64_t));
    const MultiBandRaster x(Grid<float>(s.coarse_probs));
    b.stitched = encode_tensor(stitch(tile(x, TileSpec{64, 48}), x.height(), x.width(), threads));
    return b;
  };
  const Bytes one = produce(1);
  for (std::size_t threads : {2u, 8u}) {
    const Bytes many = produce(threads);
    const std::string n = std::to_string(threads);
    chk.expect(many.labels == one.labels, "labels differ at " + n + " threads");
    chk.expect(many.tiff == one.tiff, "TIFF differs at " + n + " threads");
    chk.expect(many.probs == one.probs, "smoothed probabilities differ at " + n + " threads");
    chk.expect(many.cm == one.cm, "confusion matrix differs at " + n + " threads");
    chk.expect(many.stitched == one.stitched, "stitched raster differs at " + n + " threads");
  }
  chk.note("labels, TIFF, probabilities, confusion and stitch identical for 1/2/8 threads");
  return chk.result();
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"AC1 confusion-matrix reproduction", ac1_table},
      {"AC2 expert override truth table", ac2_truth_table},
      {"AC3 smoothing oracle equivalence", ac3_oracle},
      {"AC4 identity properties", ac4_identities},
      {"AC5 hierarchical improvement", ac5_improvement},
      {"AC6 noise suppression", ac6_noise},
      {"AC7 I/O round trips", ac7_io},
      {"AC8 tiling arithmetic", ac8_tiling},
      {"AC9 determinism under parallelism", ac9_determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " - " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
