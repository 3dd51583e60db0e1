#include <gtest/gtest.h>

#include "fmlc/fusion.hpp"
#include "fmlc/synth.hpp"
#include "test_util.hpp"

namespace fmlc {
namespace {

constexpr std::uint8_t kWater = 0, kVeg = 1, kBuilt = 2, kBare = 3;

TEST(FusionRuleTest, Validation) {
  EXPECT_THROW((FusionRule{1, 1, 0.5}.validate(4)), ConfigError);
  EXPECT_THROW((FusionRule{1, 4, 0.5}.validate(4)), ConfigError);
  EXPECT_THROW((FusionRule{1, 0, 0.0}.validate(4)), ConfigError);
  EXPECT_THROW((FusionRule{1, 0, 1.0}.validate(4)), ConfigError);
  EXPECT_NO_THROW((FusionRule{1, 0, 0.5}.validate(4)));
}

TEST(FusionRuleTest, JsonRoundTrip) {
  const std::vector<FusionRule> rules{{1, 0, 0.5}, {3, 2, 0.65}};
  const auto j = to_json(rules);
  EXPECT_EQ(j.dump(), R"([{"k":1,"k_prime":0,"tau":0.5},{"k":3,"k_prime":2,"tau":0.65}])");
  EXPECT_EQ(rules_from_json(j), rules);
  EXPECT_EQ(rules_from_json(nlohmann::json::parse(R"([{"k":2,"k_prime":3}])")).front().tau, 0.5);
  EXPECT_THROW(rules_from_json(nlohmann::json::parse(R"([{"k":2}])")), ConfigError);
}

TEST(DetectConfusionTest, DiagonalGivesNoRules) {
  ConfusionMatrix cm(4);
  for (int c = 0; c < 4; ++c) cm(c, c) = 100;
  EXPECT_TRUE(detect_confusion(cm, 3).empty());
}

TEST(DetectConfusionTest, VegetationWaterDominates) {
  // Vegetation is often classified as water; small confusion elsewhere.
  ConfusionMatrix cm(4, {900, 300, 5, 5,   //
                         40, 600, 5, 5,    //
                         5, 5, 2000, 30,   //
                         5, 5, 40, 1500});
  const auto rules = detect_confusion(cm, 2);
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_EQ(rules[0].flagged, kVeg);
  EXPECT_EQ(rules[0].partner, kWater);
  EXPECT_EQ(rules[0].tau, 0.5);
  EXPECT_EQ(rules[1].flagged, kBare);
  EXPECT_EQ(rules[1].partner, kBuilt);
}

TEST(DetectConfusionTest, EqualPairsOrderedByLowerId) {
  ConfusionMatrix cm(4, {100, 10, 0, 0,  //
                         0, 100, 0, 0,   //
                         0, 0, 100, 10,  //
                         0, 0, 0, 100});
  const auto rules = detect_confusion(cm, 5);
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_LT(std::min(rules[0].flagged, rules[0].partner), std::min(rules[1].flagged, rules[1].partner));
}

TEST(ExpertOverrideTest, Branches) {
  const FusionRule rule{kVeg, kWater, 0.5};
  const LabelMap partner_everywhere(3, 3, land_cover_legend(), kWater);
  const LabelMap all_k = expert_override(partner_everywhere, BinaryProbMap(3, 3, 1.0f), rule);
  for (auto v : all_k.values()) EXPECT_EQ(v, kVeg);

  const LabelMap built(3, 3, land_cover_legend(), kBuilt);
  testing::Rng rng(1);
  EXPECT_EQ(expert_override(built, testing::random_binary(3, 3, rng), rule), built);
}

TEST(ExpertOverrideTest, ThreePixelTruthTable) {
  const FusionRule rule{kVeg, kWater, 0.5};
  LabelMap coarse(1, 3, std::vector<std::uint8_t>{kVeg, kWater, kBare}, land_cover_legend());
  BinaryProbMap expert(1, 3, std::vector<float>{0.4f, 0.6f, 0.9f});
  const LabelMap out = expert_override(coarse, expert, rule);
  EXPECT_EQ(out.storage(), (std::vector<std::uint8_t>{kWater, kVeg, kBare}));
}

TEST(ExpertOverrideTest, Errors) {
  LabelMap coarse(2, 2, default_legend(2));
  EXPECT_THROW(expert_override(coarse, BinaryProbMap(2, 2), FusionRule{2, 0, 0.5}), ConfigError);
  EXPECT_THROW(expert_override(coarse, BinaryProbMap(2, 3), FusionRule{1, 0, 0.5}), InvalidInput);
}

TEST(ExpertOverrideProperty, OutsidePairUntouchedAndIdempotent) {
  testing::Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng.below(4);
    const LabelMap coarse = testing::random_labels(6, 6, classes, rng);
    const BinaryProbMap expert = testing::random_binary(6, 6, rng);
    const auto k = static_cast<std::uint8_t>(rng.below(classes));
    const auto kp = static_cast<std::uint8_t>((k + 1 + rng.below(classes - 1)) % classes);
    const FusionRule rule{k, kp, rng.uniform(0.05, 0.95)};
    const LabelMap once = expert_override(coarse, expert, rule);
    for (std::size_t i = 0; i < coarse.pixels(); ++i) {
      const auto v = coarse.at_pixel(i);
      if (v != k && v != kp) ASSERT_EQ(once.at_pixel(i), v);
      else ASSERT_TRUE(once.at_pixel(i) == k || once.at_pixel(i) == kp);
    }
    ASSERT_EQ(expert_override(once, expert, rule), once);
  }
}

TEST(ExpertOverrideProperty, FlippingExpertSwapsPairAtHalf) {
  testing::Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const LabelMap coarse = testing::random_labels(5, 5, 4, rng);
    BinaryProbMap expert(5, 5);
    // Avoid exactly 0.5 where e >= tau and 1 - e >= tau both hold.
    for (float& v : expert.values()) {
      do v = static_cast<float>(rng.uniform()); while (v == 0.5f);
    }
    BinaryProbMap flipped = expert;
    for (float& v : flipped.values()) v = 1.0f - v;
    const FusionRule rule{kVeg, kWater, 0.5};
    const LabelMap a = expert_override(coarse, expert, rule);
    const LabelMap b = expert_override(coarse, flipped, rule);
    for (std::size_t i = 0; i < coarse.pixels(); ++i) {
      const auto v = coarse.at_pixel(i);
      if (v == kVeg || v == kWater) {
        ASSERT_NE(a.at_pixel(i), b.at_pixel(i));
      } else {
        ASSERT_EQ(a.at_pixel(i), b.at_pixel(i));
      }
    }
  }
}

TEST(OverrideLogitsTest, SignFollowsDecisionForAnyThreshold) {
  testing::Rng rng(5);
  const ProbabilityMap p = testing::random_probs(10, 10, 4, rng);
  const BinaryProbMap expert = testing::random_binary(10, 10, rng);
  const LabelMap coarse = argmax_labels(p, land_cover_legend());
  for (double tau : {0.3, 0.5, 0.8}) {
    const FusionRule rule{kVeg, kWater, tau};
    LogitMap l = probs_to_logits(p);
    apply_override_logits(l, coarse, expert, rule);
    const LabelMap fused = expert_override(coarse, expert, rule);
    for (std::size_t i = 0; i < p.pixels(); ++i) {
      const auto v = coarse.at_pixel(i);
      if (v != kVeg && v != kWater) {
        for (std::size_t c = 0; c < 4; ++c) ASSERT_EQ(l.at_pixel(i, c), probs_to_logits(p).at_pixel(i, c));
        continue;
      }
      ASSERT_EQ(l.at_pixel(i, kVeg), -l.at_pixel(i, kWater));
      if (fused.at_pixel(i) == kVeg) ASSERT_GE(l.at_pixel(i, kVeg), 0.0f);
      else ASSERT_LT(l.at_pixel(i, kVeg), 0.0f);
    }
  }
}

TEST(PipelineTest, DegenerateIsPlainArgmax) {
  testing::Rng rng(30);
  const ProbabilityMap p = testing::random_probs(24, 24, 4, rng);
  const PipelineResult res = run_pipeline(p, {}, {}, std::nullopt);
  EXPECT_EQ(res.labels, argmax_labels(p, land_cover_legend()));
  EXPECT_TRUE(res.changes.empty());
}

TEST(PipelineTest, WindowOneSmoothingKeepsArgmax) {
  testing::Rng rng(31);
  const ProbabilityMap p = testing::random_probs(24, 24, 4, rng);
  const PipelineResult res = run_pipeline(p, {}, {}, SmoothingParams{1, 1.0, 1.0});
  EXPECT_EQ(res.labels, argmax_labels(p, land_cover_legend()));
}

TEST(PipelineTest, RulesWithoutSmoothingEqualOverride) {
  testing::Rng rng(32);
  const ProbabilityMap p = testing::random_probs(24, 24, 4, rng);
  const BinaryProbMap expert = testing::random_binary(24, 24, rng);
  const FusionRule rule{kVeg, kWater, 0.5};
  const PipelineResult res = run_pipeline(p, {{kVeg, expert}}, {rule}, std::nullopt);
  EXPECT_EQ(res.labels, expert_override(argmax_labels(p, land_cover_legend()), expert, rule));
  ASSERT_EQ(res.changes.size(), 1u);
  EXPECT_EQ(res.changes[0].changed, count_changed(res.coarse, res.labels));
}

TEST(PipelineTest, RulesApplyInOrder) {
  testing::Rng rng(33);
  const ProbabilityMap p = testing::random_probs(16, 16, 4, rng);
  const BinaryProbMap e1 = testing::random_binary(16, 16, rng);
  const BinaryProbMap e3 = testing::random_binary(16, 16, rng);
  const std::vector<FusionRule> rules{{kVeg, kWater, 0.5}, {kBare, kVeg, 0.5}};
  const PipelineResult res = run_pipeline(p, {{kVeg, e1}, {kBare, e3}}, rules, std::nullopt);
  const LabelMap step1 = expert_override(argmax_labels(p, land_cover_legend()), e1, rules[0]);
  EXPECT_EQ(res.labels, expert_override(step1, e3, rules[1]));
}

TEST(PipelineTest, MissingExpertIsConfigError) {
  testing::Rng rng(34);
  const ProbabilityMap p = testing::random_probs(4, 4, 4, rng);
  EXPECT_THROW(run_pipeline(p, {}, {{kVeg, kWater, 0.5}}, std::nullopt), ConfigError);
  EXPECT_THROW(run_pipeline(p, {{kVeg, BinaryProbMap(4, 5)}}, {{kVeg, kWater, 0.5}}, std::nullopt), InvalidInput);
}

TEST(PipelineTest, SyntheticSceneImprovesFlaggedClass) {
  SceneSpec spec;
  spec.confusion_strength = 0.5;
  spec.seed = 2024;
  const Scene s = generate_scene(spec);
  const FusionRule rule{spec.flagged, spec.partner, 0.5};
  const PipelineResult res = run_pipeline(s.coarse_probs, {{spec.flagged, s.expert_probs}}, {rule}, SmoothingParams{});
  const double before = metrics(confusion(res.coarse, s.truth)).per_class[spec.flagged].f1;
  const double after = metrics(confusion(res.labels, s.truth)).per_class[spec.flagged].f1;
  EXPECT_GT(after, before);
}

}  // namespace
}  // namespace fmlc
