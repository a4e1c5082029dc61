#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "maeguard/attacks/attacks.hpp"
#include "maeguard/repair/repair.hpp"
#include "support/tiny_models.hpp"

namespace rp = maeguard::repair;
namespace models = maeguard::models;
namespace attacks = maeguard::attacks;
namespace mt = maeguard::testing;

namespace {

struct Fixture {
  models::MaeModel mae{mt::tiny_mae_config()};
  models::ClassifierModel clf{mt::tiny_classifier_config()};
  models::ImageSet images = mt::random_image_set(6, 11);
};

rp::RepairConfig small_cfg(rp::RepairInit init, std::size_t iters) {
  rp::RepairConfig c;
  c.init = init;
  c.iters = iters;
  c.masks = 2;
  return c;
}

}  // namespace

TEST(Repair, ZeroItersZeroInitIsIdentity) {
  Fixture f;
  auto out = rp::repair(f.images, f.mae, small_cfg(rp::RepairInit::kZero, 0));
  for (const auto& r : out) {
    EXPECT_EQ(r.adapted, r.input);
    EXPECT_EQ(r.loss_after, r.loss_before);
    EXPECT_EQ(r.trajectory.size(), 1u);
  }
}

TEST(Repair, EveryIterateStaysInBoxes) {
  Fixture f;
  for (auto init : {rp::RepairInit::kZero, rp::RepairInit::kUniform}) {
    auto cfg = small_cfg(init, 6);
    cfg.alpha = 0.02;
    cfg.batch_size = 4;
    std::size_t calls = 0;
    rp::RepairOptions opts;
    opts.on_iterate = [&](std::size_t, std::span<const std::size_t> ids, std::span<const double> x) {
      ++calls;
      const std::size_t dim = f.images.image_size();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
          const double v = x[i * dim + j];
          ASSERT_GE(v, 0.0);
          ASSERT_LE(v, 1.0);
          ASSERT_LE(std::abs(v - f.images.image(ids[i])[j]), cfg.epsilon + 1e-9);
        }
      }
    };
    auto out = rp::repair(f.images, f.mae, cfg, {}, opts);
    EXPECT_EQ(calls, 2u * 7u);
    for (const auto& r : out) {
      EXPECT_LE(attacks::linf_distance(r.adapted, r.input), cfg.epsilon + 1e-9);
      EXPECT_EQ(r.trajectory.size(), 7u);
    }
  }
}

TEST(Repair, FirstSmallStepDescends) {
  Fixture f;
  auto cfg = small_cfg(rp::RepairInit::kZero, 1);
  cfg.alpha = 1e-4;
  for (const auto& r : rp::repair(f.images, f.mae, cfg)) EXPECT_LT(r.loss_after, r.loss_before);
}

TEST(Repair, DeterministicAndBatchIndependent) {
  Fixture f;
  auto cfg = small_cfg(rp::RepairInit::kUniform, 3);
  cfg.batch_size = 4;
  auto a = rp::repair(f.images, f.mae, cfg);
  cfg.batch_size = 3;
  auto b = rp::repair(f.images, f.mae, cfg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].adapted, b[i].adapted);
    EXPECT_EQ(a[i].trajectory, b[i].trajectory);
  }
  cfg.seed = 1;
  EXPECT_NE(rp::repair(f.images, f.mae, cfg)[0].adapted, a[0].adapted);
}

TEST(Repair, TwoPassesStayWithinTwiceEpsilon) {
  Fixture f;
  auto cfg = small_cfg(rp::RepairInit::kUniform, 4);
  cfg.alpha = cfg.epsilon;
  auto first = rp::repair(f.images, f.mae, cfg);
  models::ImageSet mid{8, 8, 1, {}, {}};
  for (const auto& r : first) mid.append(r.adapted, 0);
  cfg.seed = 5;
  auto second = rp::repair(mid, f.mae, cfg);
  for (std::size_t i = 0; i < second.size(); ++i) {
    const double d = attacks::linf_distance(second[i].adapted, first[i].input);
    EXPECT_LE(d, 2.0 * cfg.epsilon + 1e-9);
    EXPECT_GT(d, cfg.epsilon);
  }
}

TEST(Repair, RejectsBadConfigAndEmptySets) {
  Fixture f;
  auto cfg = small_cfg(rp::RepairInit::kZero, 1);
  cfg.epsilon = 0.0;
  EXPECT_THROW(rp::repair(f.images, f.mae, cfg), std::invalid_argument);
  EXPECT_THROW(rp::repair_and_classify({}, f.mae, f.clf, small_cfg(rp::RepairInit::kZero, 1)),
               std::invalid_argument);
  EXPECT_THROW(rp::parse_repair_init("gaussian"), std::invalid_argument);
}

TEST(RepairReport, ClosedGateAndVanishingEpsilonKeepAccuracy) {
  Fixture f;
  auto set = rp::as_examples(f.images, f.clf);
  const std::vector<std::uint8_t> closed(set.size(), 0);
  auto cfg = small_cfg(rp::RepairInit::kUniform, 5);
  auto gated = rp::repair_and_classify(set, f.mae, f.clf, cfg, closed);
  EXPECT_EQ(gated.accuracy_after, gated.accuracy_before);
  for (const auto& r : gated.results) EXPECT_EQ(r.adapted, r.input);
  cfg.epsilon = 1e-12;
  cfg.alpha = 1e-12;
  auto tiny = rp::repair_and_classify(set, f.mae, f.clf, cfg);
  EXPECT_EQ(tiny.accuracy_after, tiny.accuracy_before);
  EXPECT_EQ(tiny.accuracy_before, models::accuracy(models::predict(f.clf, f.images), f.images.labels));
}

TEST(Sweeps, IterPrefixesMatchStandaloneRuns) {
  Fixture f;
  auto set = rp::as_examples(f.images, f.clf);
  auto base = small_cfg(rp::RepairInit::kUniform, 5);
  base.alpha = 0.05;
  auto curve = rp::sweep_iters(set, f.mae, f.clf, base, {0, 1, 3, 6});
  ASSERT_EQ(curve.size(), 4u);
  EXPECT_EQ(curve[0].accuracy, models::accuracy(models::predict(f.clf, f.images), f.images.labels));
  for (std::size_t k = 1; k < 4; ++k) {
    auto cfg = base;
    cfg.iters = static_cast<std::size_t>(curve[k].value);
    auto report = rp::repair_and_classify(set, f.mae, f.clf, cfg);
    EXPECT_EQ(curve[k].accuracy, report.accuracy_after);
    EXPECT_NEAR(curve[k].mean_loss, report.mean_loss_after, 1e-12);
  }
}

TEST(Sweeps, EpsilonGridEndpointsAreValid) {
  Fixture f;
  auto set = rp::as_examples(f.images, f.clf);
  auto curve = rp::sweep_epsilon(set, f.mae, f.clf, small_cfg(rp::RepairInit::kUniform, 1));
  ASSERT_EQ(curve.size(), 4u);
  EXPECT_DOUBLE_EQ(curve.front().value, 2.0 / 255);
  EXPECT_DOUBLE_EQ(curve.back().value, 16.0 / 255);
  for (const auto& p : curve) {
    EXPECT_GE(p.accuracy, 0.0);
    EXPECT_LE(p.accuracy, 1.0);
  }
}
