#include <gtest/gtest.h>

#include "maeguard/attacks/attacks.hpp"
#include "support/tiny_models.hpp"

using namespace maeguard;
using namespace maeguard::attacks;
namespace mt = maeguard::testing;

namespace {

struct Fixture {
  models::ClassifierModel clf{mt::tiny_classifier_config()};
  models::MaeModel mae{mt::tiny_mae_config()};
  models::ImageSet data = mt::random_image_set(10, 3);

  AttackContext ctx(std::size_t batch = 4) const {
    AttackContext c;
    c.classifier = &clf;
    c.mae = &mae;
    c.mask_seed = 99;
    c.batch_size = batch;
    return c;
  }
};

AttackSpec spec_of(AttackKind kind, double eps, std::size_t steps = 5) {
  AttackSpec s;
  s.kind = kind;
  s.epsilon = eps;
  s.steps = steps;
  s.seed = 17;
  return s;
}

}  // namespace

TEST(Attacks, ZeroEpsilonLeavesImagesUnchanged) {
  Fixture f;
  for (auto kind : {AttackKind::kFgsm, AttackKind::kPgdLinf, AttackKind::kBim, AttackKind::kPgdL2}) {
    for (const auto& ex : run_attack(f.data, spec_of(kind, 0.0), f.ctx())) {
      EXPECT_EQ(ex.adv, ex.clean) << to_string(kind);
    }
  }
}

TEST(Attacks, EveryIterateRespectsBallAndBox) {
  Fixture f;
  for (auto kind : {AttackKind::kFgsm, AttackKind::kPgdLinf, AttackKind::kBim, AttackKind::kPgdL2,
                    AttackKind::kCwL2, AttackKind::kDaa}) {
    auto spec = spec_of(kind, is_l2(kind) ? 0.8 : 0.1);
    spec.lambda = 1.0;
    auto ctx = f.ctx();
    std::size_t checked = 0;
    ctx.on_iterate = [&](std::size_t, std::span<const std::size_t> ids, std::span<const double> x) {
      const std::size_t dim = f.data.image_size();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto xi = x.subspan(i * dim, dim);
        auto ci = f.data.image(ids[i]);
        for (double v : xi) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
        const double d = is_l2(kind) ? l2_distance(xi, ci) : linf_distance(xi, ci);
        ASSERT_LE(d, spec.epsilon + 1e-9);
        ++checked;
      }
    };
    for (const auto& ex : run_attack(f.data, spec, ctx)) {
      EXPECT_LE(is_l2(kind) ? ex.l2 : ex.linf, spec.epsilon + 1e-9);
      for (double v : ex.adv) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    }
    EXPECT_GT(checked, 0u) << to_string(kind);
  }
}

TEST(Attacks, SingleStepBimMatchesFgsm) {
  Fixture f;
  auto bim = spec_of(AttackKind::kBim, 0.05, 1);
  bim.alpha = 0.05;
  const auto a = run_attack(f.data, spec_of(AttackKind::kFgsm, 0.05), f.ctx());
  const auto b = run_attack(f.data, bim, f.ctx());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].adv, b[i].adv);
}

TEST(Attacks, DaaWithZeroLambdaFollowsPgd) {
  Fixture f;
  auto daa = spec_of(AttackKind::kDaa, 0.1);
  daa.lambda = 0.0;
  const auto a = run_attack(f.data, spec_of(AttackKind::kPgdLinf, 0.1), f.ctx());
  const auto b = run_attack(f.data, daa, f.ctx());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].adv, b[i].adv);
}

TEST(Attacks, DaaWithPositiveLambdaDiffersFromPgd) {
  Fixture f;
  auto daa = spec_of(AttackKind::kDaa, 0.1);
  daa.lambda = 50.0;
  const auto a = run_attack(f.data, spec_of(AttackKind::kPgdLinf, 0.1), f.ctx());
  const auto b = run_attack(f.data, daa, f.ctx());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].adv != b[i].adv;
  EXPECT_TRUE(differs);
}

TEST(Attacks, DeterministicAndIndependentOfBatchSize) {
  Fixture f;
  for (auto kind : {AttackKind::kPgdLinf, AttackKind::kPgdL2, AttackKind::kCwL2}) {
    const auto spec = spec_of(kind, is_l2(kind) ? 0.8 : 0.1);
    const auto a = run_attack(f.data, spec, f.ctx(4));
    const auto b = run_attack(f.data, spec, f.ctx(4));
    const auto c = run_attack(f.data, spec, f.ctx(3));
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].adv, b[i].adv);
      EXPECT_EQ(a[i].adv, c[i].adv) << to_string(kind) << " image " << i;
    }
  }
}

TEST(Attacks, SeedChangesRandomStart) {
  Fixture f;
  auto s1 = spec_of(AttackKind::kPgdLinf, 0.1, 1);
  auto s2 = s1;
  s2.seed = 18;
  EXPECT_NE(run_attack(f.data, s1, f.ctx())[0].adv, run_attack(f.data, s2, f.ctx())[0].adv);
}

TEST(Attacks, ZeroGradientLeavesFgsmInputUnchanged) {
  Fixture f;
  f.clf.zero_head();
  for (const auto& ex : run_attack(f.data, spec_of(AttackKind::kFgsm, 0.1), f.ctx())) {
    EXPECT_EQ(ex.adv, ex.clean);
    EXPECT_EQ(ex.prediction, 0);
    EXPECT_EQ(ex.success, ex.label != 0);
  }
}

TEST(Attacks, CwOnMisclassifiedInputReturnsZeroPerturbation) {
  Fixture f;
  const auto preds = models::predict(f.clf, f.data);
  models::ImageSet wrong = f.data;
  for (std::size_t i = 0; i < wrong.size(); ++i) wrong.labels[i] = (preds[i] + 1) % 3;
  for (const auto& ex : run_attack(wrong, spec_of(AttackKind::kCwL2, 1.0), f.ctx())) {
    EXPECT_TRUE(ex.success);
    EXPECT_EQ(ex.l2, 0.0);
  }
}

TEST(Attacks, RejectsMalformedSpecs) {
  Fixture f;
  auto s = spec_of(AttackKind::kPgdLinf, 0.1, 0);
  EXPECT_THROW(run_attack(f.data, s, f.ctx()), std::invalid_argument);
  s = spec_of(AttackKind::kPgdLinf, -1.0);
  EXPECT_THROW(run_attack(f.data, s, f.ctx()), std::invalid_argument);
  EXPECT_THROW(parse_attack_kind("zoo"), std::invalid_argument);
  EXPECT_EQ(parse_attack_kind("pgd-l2"), AttackKind::kPgdL2);
}
