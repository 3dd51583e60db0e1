#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fmlc/metrics.hpp"
#include "fmlc/parallel.hpp"
#include "fmlc/raster.hpp"
#include "fmlc/simplex.hpp"
#include "fmlc/smoothing.hpp"

namespace fmlc {

/// Expert override for one confused pair: on pixels labelled `flagged` or
/// `partner`, assign `flagged` where the expert probability reaches `tau`
/// and `partner` elsewhere.
struct FusionRule {
  std::uint8_t flagged = 0;
  std::uint8_t partner = 1;
  double tau = 0.5;

  void validate(std::size_t legend_size) const {
    if (flagged == partner) throw ConfigError("fusion rule needs two distinct classes");
    if (flagged >= legend_size || partner >= legend_size) {
      throw ConfigError("fusion rule classes (" + std::to_string(flagged) + ", " + std::to_string(partner) +
                        ") not in legend of size " + std::to_string(legend_size));
    }
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("fusion rule threshold must lie in (0, 1)");
  }

  friend bool operator==(const FusionRule&, const FusionRule&) = default;
};

inline nlohmann::json to_json(const FusionRule& r) {
  return {{"k", r.flagged}, {"k_prime", r.partner}, {"tau", r.tau}};
}

inline nlohmann::json to_json(const std::vector<FusionRule>& rules) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rules) out.push_back(to_json(r));
  return out;
}

inline std::vector<FusionRule> rules_from_json(const nlohmann::json& j) {
  std::vector<FusionRule> rules;
  try {
    for (const auto& item : j) {
      FusionRule r;
      r.flagged = item.at("k").get<std::uint8_t>();
      r.partner = item.at("k_prime").get<std::uint8_t>();
      if (item.contains("tau")) r.tau = item["tau"].get<double>();
      rules.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad fusion rules JSON: ") + e.what());
  }
  return rules;
}

/// Ranks class pairs by (cm[a][b] + cm[b][a]) divided by the smaller
/// reference total of the two; ties go to the pair with the lower ids. The
/// class with the lower F1 is flagged (lower id on equal F1). Pairs without
/// any confusion are never returned.
inline std::vector<FusionRule> detect_confusion(const ConfusionMatrix& cm, std::size_t top_n = 1, double tau = 0.5) {
  struct Candidate {
    double score;
    std::size_t a, b;
  };
  const MetricReport rep = cm.total() > 0 ? metrics(cm) : MetricReport{};
  std::vector<Candidate> candidates;
  for (std::size_t a = 0; a < cm.classes(); ++a) {
    for (std::size_t b = a + 1; b < cm.classes(); ++b) {
      const double mass = static_cast<double>(cm(a, b) + cm(b, a));
      if (mass == 0.0) continue;
      const double ta = static_cast<double>(cm.column_total(a));
      const double tb = static_cast<double>(cm.column_total(b));
      double denom = std::min(ta, tb);
      if (denom == 0.0) denom = std::max(ta, tb);
      candidates.push_back({mass / denom, a, b});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
  if (candidates.size() > top_n) candidates.resize(top_n);
  if (cm.classes() > 256) throw CapacityError("detect_confusion: more than 256 classes");

  std::vector<FusionRule> rules;
  for (const auto& c : candidates) {
    auto f1 = [&](std::size_t id) {
      const double v = rep.per_class[id].f1;
      return std::isnan(v) ? -1.0 : v;
    };
    const bool a_worse = f1(c.a) <= f1(c.b);
    const std::size_t k = a_worse ? c.a : c.b;
    const std::size_t kp = a_worse ? c.b : c.a;
    rules.push_back({static_cast<std::uint8_t>(k), static_cast<std::uint8_t>(kp), tau});
  }
  return rules;
}

/// Pixels whose coarse label is the flagged class or its partner.
inline PixelMask override_domain(const LabelMap& coarse, const FusionRule& rule) {
  PixelMask mask(coarse.height(), coarse.width(), 1, std::uint8_t{0});
  for (std::size_t i = 0; i < coarse.pixels(); ++i) {
    const auto v = coarse.at_pixel(i);
    mask.at_pixel(i) = (v == rule.flagged || v == rule.partner) ? 1 : 0;
  }
  return mask;
}

inline LabelMap expert_override(const LabelMap& coarse, const BinaryProbMap& expert, const FusionRule& rule) {
  require_same_extent(coarse, expert, "expert_override");
  rule.validate(coarse.legend.size());
  LabelMap out = coarse;
  for (std::size_t i = 0; i < coarse.pixels(); ++i) {
    const auto v = coarse.at_pixel(i);
    if (v != rule.flagged && v != rule.partner) continue;
    out.at_pixel(i) = expert.at_pixel(i) >= rule.tau ? rule.flagged : rule.partner;
  }
  return out;
}

/// Hands an override back to logit space. On the rule's domain the flagged
/// channel becomes logit(e) - logit(tau) and the partner its negation, so the
/// pair's sign matches the hard decision; other channels are untouched.
inline void apply_override_logits(LogitMap& logits, const LabelMap& before, const BinaryProbMap& expert,
                                  const FusionRule& rule, double eps = kDefaultLogitEps) {
  const double offset = clamped_logit(rule.tau, eps);
  for (std::size_t i = 0; i < before.pixels(); ++i) {
    const auto v = before.at_pixel(i);
    if (v != rule.flagged && v != rule.partner) continue;
    const double z = clamped_logit(expert.at_pixel(i), eps) - offset;
    logits.at_pixel(i, rule.flagged) = static_cast<float>(z);
    logits.at_pixel(i, rule.partner) = static_cast<float>(-z);
  }
}

struct StageChanges {
  std::string stage;
  std::size_t changed = 0;  // pixels whose label differs from the previous stage
};

struct PipelineResult {
  LabelMap coarse;
  LabelMap fused;
  LabelMap labels;  // final output
  LogitMap fused_logits;
  std::optional<ProbabilityMap> smoothed_probs;
  std::vector<StageChanges> changes;
};

inline std::size_t count_changed(const LabelMap& a, const LabelMap& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.pixels(); ++i) n += a.at_pixel(i) != b.at_pixel(i);
  return n;
}

using ExpertMaps = std::map<std::uint8_t, BinaryProbMap>;

/// Coarse argmax, expert overrides in rule order, then (when `smoothing` is
/// set) windowed logit smoothing and a final argmax. Without smoothing the
/// fused labels are the output.
inline PipelineResult run_pipeline(const ProbabilityMap& p, const ExpertMaps& experts,
                                   const std::vector<FusionRule>& rules,
                                   const std::optional<SmoothingParams>& smoothing, std::size_t threads = 1,
                                   std::vector<std::string> legend = {}) {
  if (legend.empty()) legend = p.classes() == 4 ? land_cover_legend() : default_legend(p.classes());
  PipelineResult res;
  res.coarse = argmax_labels(p, legend);
  res.fused = res.coarse;
  res.fused_logits = probs_to_logits(p);
  for (const FusionRule& rule : rules) {
    rule.validate(res.fused.legend.size());
    auto it = experts.find(rule.flagged);
    if (it == experts.end()) {
      throw ConfigError("no expert map supplied for flagged class " + std::to_string(rule.flagged));
    }
    require_same_extent(p, it->second, "run_pipeline expert");
    LabelMap next = expert_override(res.fused, it->second, rule);
    apply_override_logits(res.fused_logits, res.fused, it->second, rule);
    res.changes.push_back({"override " + std::to_string(rule.flagged) + "/" + std::to_string(rule.partner),
                           count_changed(res.fused, next)});
    res.fused = std::move(next);
  }
  if (smoothing) {
    SmoothResult s = smooth(res.fused_logits, *smoothing, threads, legend);
    res.changes.push_back({"smooth", count_changed(res.fused, s.labels)});
    res.labels = std::move(s.labels);
    res.smoothed_probs = std::move(s.probs);
  } else {
    res.labels = res.fused;
  }
  return res;
}

}  // namespace fmlc
