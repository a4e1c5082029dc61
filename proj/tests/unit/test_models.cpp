#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "../support/gradcheck.hpp"
#include "maeguard/autodiff/ops.hpp"
#include "maeguard/models/checkpoint.hpp"
#include "maeguard/models/classifier.hpp"
#include "maeguard/models/mae.hpp"
#include "maeguard/models/rng.hpp"
#include "maeguard/models/training.hpp"

using namespace maeguard;
using namespace maeguard::models;
using ad::Shape;

namespace {

Tensor random_images(std::size_t b, const PatchGrid& grid, std::uint64_t seed,
                     bool requires_grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(b * grid.image_size());
  for (auto& x : v) x = u(rng);
  return Tensor({b, grid.height, grid.width, grid.channels}, std::move(v), requires_grad);
}

MaeConfig tiny_mae() {
  MaeConfig c;
  c.grid = {8, 8, 4, 1};
  c.enc_dim = 8;
  c.enc_depth = 1;
  c.enc_heads = 2;
  c.enc_hidden = 16;
  c.dec_dim = 8;
  c.dec_depth = 1;
  c.dec_heads = 2;
  c.dec_hidden = 16;
  c.mask_ratio = 0.5;
  return c;
}

ClassifierConfig tiny_classifier() {
  ClassifierConfig c;
  c.grid = {8, 8, 4, 1};
  c.embed_dim = 8;
  c.depth = 1;
  c.heads = 2;
  c.mlp_hidden = 16;
  c.classes = 3;
  return c;
}

std::vector<double> values_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Patchify, RoundTripOnFourByFour) {
  PatchGrid grid{4, 4, 2, 1};
  std::vector<double> px(16);
  std::iota(px.begin(), px.end(), 0.0);
  Tensor img({4, 4, 1}, px);
  Graph g(ad::GradScope::kNone);
  auto patches = patchify(g, img, grid);
  EXPECT_EQ(patches.shape(), (Shape{4, 4}));
  EXPECT_EQ(values_of(patches), (std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15}));
  EXPECT_EQ(values_of(unpatchify(g, patches, grid)), px);
}

TEST(Patchify, ConstantImageGivesEqualPatches) {
  PatchGrid grid{8, 8, 4, 1};
  Graph g(ad::GradScope::kNone);
  auto patches = patchify(g, Tensor::full({8, 8, 1}, 0.3), grid);
  for (double v : patches.values()) EXPECT_EQ(v, 0.3);
}

TEST(Patchify, MatchesIndexArithmeticOracle) {
  PatchGrid grid{8, 8, 4, 2};
  auto batch = random_images(3, grid, 5);
  Graph g(ad::GradScope::kNone);
  auto patches = patchify(g, batch, grid);
  ASSERT_EQ(patches.shape(), (Shape{3, 4, 32}));
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t pr = 0; pr < 2; ++pr)
      for (std::size_t pc = 0; pc < 2; ++pc)
        for (std::size_t y = 0; y < 4; ++y)
          for (std::size_t x = 0; x < 4; ++x)
            for (std::size_t c = 0; c < 2; ++c) {
              const double want = batch.values()[((b * 8 + pr * 4 + y) * 8 + pc * 4 + x) * 2 + c];
              const double got = patches.values()[(b * 4 + pr * 2 + pc) * 32 + (y * 4 + x) * 2 + c];
              ASSERT_EQ(got, want);
            }
  EXPECT_EQ(values_of(unpatchify(g, patches, grid)), values_of(batch));
}

TEST(Patchify, RejectsMismatchedImages) {
  Graph g;
  EXPECT_THROW(patchify(g, Tensor::zeros({6, 8, 1}), PatchGrid{8, 8, 4, 1}), ad::ShapeError);
  EXPECT_THROW(patchify(g, Tensor::zeros({6, 6, 1}), PatchGrid{6, 6, 4, 1}), std::invalid_argument);
}

TEST(SampleMask, RatioZeroKeepsEverything) {
  std::mt19937_64 rng(1);
  auto m = sample_mask(PatchGrid{16, 16, 4, 1}, 0.0, rng);
  EXPECT_EQ(m.n_masked(), 0u);
}

TEST(SampleMask, ThreeQuartersOfSixteenHidesTwelve) {
  std::mt19937_64 rng(2);
  auto m = sample_mask(PatchGrid{16, 16, 4, 1}, 0.75, rng);
  EXPECT_EQ(m.bits.size(), 16u);
  EXPECT_EQ(m.n_masked(), 12u);
}

TEST(SampleMask, DeterministicPerSeedAndVariesAcrossSeeds) {
  PatchGrid grid{28, 28, 4, 1};
  auto a = stream(9, 1), b = stream(9, 1), c = stream(10, 1);
  const auto ma = sample_mask(grid, 0.75, a);
  EXPECT_EQ(ma.bits, sample_mask(grid, 0.75, b).bits);
  EXPECT_NE(ma.bits, sample_mask(grid, 0.75, c).bits);
}

TEST(SampleMask, RatioOneIsRejected) {
  std::mt19937_64 rng(3);
  EXPECT_THROW(sample_mask(PatchGrid{}, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(sample_mask(PatchGrid{}, -0.1, rng), std::invalid_argument);
}

TEST(MaeLoss, PerfectReconstructionIsZero) {
  PatchGrid grid{8, 8, 4, 1};
  Graph g(ad::GradScope::kNone);
  auto target = patchify(g, random_images(2, grid, 7), grid);
  std::mt19937_64 rng(1);
  std::vector<MaskPattern> masks = {sample_mask(grid, 0.5, rng), sample_mask(grid, 0.5, rng)};
  EXPECT_EQ(masked_mse(g, target, target, masks, ad::Reduction::kMean).item(), 0.0);
}

TEST(MaeLoss, EmptyMaskGivesZero) {
  auto model = MaeModel(tiny_mae());
  std::mt19937_64 rng(1);
  std::vector<MaskPattern> masks = {sample_mask(tiny_mae().grid, 0.0, rng)};
  Graph g(ad::GradScope::kNone);
  EXPECT_EQ(mae_loss(g, random_images(1, tiny_mae().grid, 3), masks, model).item(), 0.0);
}

TEST(MaeLoss, TwoPatchToyExample) {
  Tensor target({1, 2, 2}, {1, 1, 2, 2});
  Tensor pred({1, 2, 2}, {0, 0, 2, 2});
  std::vector<MaskPattern> masks = {MaskPattern{{0, 1}, 0.5}};
  Graph g(ad::GradScope::kNone);
  EXPECT_DOUBLE_EQ(masked_mse(g, target, pred, masks, ad::Reduction::kMean).item(), 1.0);
}

TEST(MaeLoss, IgnoresVisiblePatchesOfTarget) {
  PatchGrid grid{8, 8, 4, 1};
  Graph g(ad::GradScope::kNone);
  auto target = patchify(g, random_images(1, grid, 11), grid);
  auto pred = patchify(g, random_images(1, grid, 12), grid);
  std::vector<MaskPattern> masks = {MaskPattern{{1, 0, 1, 0}, 0.5}};
  const double base = masked_mse(g, target, pred, masks, ad::Reduction::kMean).item();
  auto perturbed = target.clone();
  for (std::size_t e = 0; e < 16; ++e) {
    perturbed.mutable_values()[e] += 5.0;       // patch 0, visible
    perturbed.mutable_values()[32 + e] -= 3.0;  // patch 2, visible
  }
  EXPECT_EQ(masked_mse(g, perturbed, pred, masks, ad::Reduction::kMean).item(), base);
}

TEST(MaeLoss, SumReductionAddsPerImageLosses) {
  MaeModel model(tiny_mae());
  auto images = random_images(3, tiny_mae().grid, 13);
  std::mt19937_64 rng(4);
  std::vector<MaskPattern> masks;
  for (int i = 0; i < 3; ++i) masks.push_back(sample_mask(tiny_mae().grid, 0.5, rng));
  const auto per_image = mae_losses(model, images, masks);
  Graph g(ad::GradScope::kNone);
  const double total = mae_loss(g, images, masks, model, ad::Reduction::kSum).item();
  EXPECT_NEAR(total, per_image[0] + per_image[1] + per_image[2], 1e-12);
}

TEST(MaeLoss, PixelGradientMatchesFiniteDifferences) {
  MaeModel model(tiny_mae());
  auto images = random_images(1, tiny_mae().grid, 17, true);
  std::mt19937_64 rng(5);
  std::vector<MaskPattern> masks = {sample_mask(tiny_mae().grid, 0.5, rng)};
  Graph g(ad::GradScope::kInputsOnly);
  const auto grad = g.gradient(mae_loss(g, images, masks, model), images);
  std::uniform_int_distribution<std::size_t> pick(0, images.numel() - 1);
  const double h = 1e-5;
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t i = pick(rng);
    auto eval = [&](double delta) {
      auto x = images.clone();
      x.mutable_values()[i] += delta;
      Graph ge(ad::GradScope::kNone);
      return mae_loss(ge, x, masks, model).item();
    };
    const double numeric = (eval(h) - eval(-h)) / (2 * h);
    const double analytic = grad.values()[i];
    EXPECT_LT(std::abs(analytic - numeric) / std::max({std::abs(numeric), std::abs(analytic), 1e-8}),
              1e-3)
        << "pixel " << i;
  }
}

TEST(MaeLoss, ParameterGradientsMatchFiniteDifferences) {
  MaeModel model(tiny_mae());
  auto images = random_images(2, tiny_mae().grid, 43);
  std::mt19937_64 rng(7);
  std::vector<MaskPattern> masks = {sample_mask(tiny_mae().grid, 0.5, rng),
                                    sample_mask(tiny_mae().grid, 0.5, rng)};
  std::vector<Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  auto result = maeguard::testing::grad_check(
      [&](Graph& g, const std::vector<Tensor>&) { return mae_loss(g, images, masks, model); },
      params);
  EXPECT_LT(result.max_relative_error, 1e-4);
}

TEST(Classifier, ParameterGradientsMatchFiniteDifferences) {
  ClassifierModel model(tiny_classifier());
  auto images = random_images(3, tiny_classifier().grid, 47);
  const std::vector<int> labels = {0, 2, 1};
  std::vector<Tensor> params;
  for (const auto& p : model.parameters()) params.push_back(p.tensor);
  auto result = maeguard::testing::grad_check(
      [&](Graph& g, const std::vector<Tensor>&) {
        return ad::cross_entropy(g, model.logits(g, images), labels);
      },
      params);
  EXPECT_LT(result.max_relative_error, 1e-4);
}

TEST(Classifier, ZeroHeadGivesUniformLogitsAndLowestIndex) {
  ClassifierModel model(tiny_classifier());
  model.zero_head();
  auto logits = classify(model, Tensor::full({8, 8, 1}, 0.5));
  for (double v : logits) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(argmax(logits), 0);
}

TEST(Classifier, SoftmaxOfLogitsSumsToOne) {
  ClassifierModel model(tiny_classifier());
  Graph g(ad::GradScope::kNone);
  auto p = ad::softmax(g, model.logits(g, random_images(4, tiny_classifier().grid, 19)));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += p.values()[r * 3 + k];
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(Classifier, DeterministicAndBatchIndependent) {
  ClassifierModel model(tiny_classifier());
  auto images = random_images(5, tiny_classifier().grid, 23);
  Graph g(ad::GradScope::kNone);
  const auto all = values_of(model.logits(g, images));
  EXPECT_EQ(all, values_of(model.logits(g, images)));
  auto single = ad::slice(g, images, 0, 2, 1);
  const auto one = values_of(model.logits(g, single));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(one[k], all[2 * 3 + k]);
}

TEST(Training, MaeOverfitsSingleImage) {
  MaeModel model(tiny_mae());
  ImageSet data{8, 8, 1, {}, {}};
  auto img = random_images(1, tiny_mae().grid, 29);
  data.append(img.values(), 0);
  TrainConfig cfg;
  cfg.epochs = 4000;
  cfg.batch_size = 1;
  cfg.sgd.lr = 0.1;
  auto log = train_mae(model, data, cfg);
  const auto ma = log.moving_average(10);
  EXPECT_LT(ma.back(), 1e-3);
}

TEST(Training, ClassifierOverfitsOneBatch) {
  ClassifierModel model(tiny_classifier());
  ImageSet data{8, 8, 1, {}, {}};
  auto imgs = random_images(8, tiny_classifier().grid, 31);
  for (std::size_t i = 0; i < 8; ++i)
    data.append(imgs.values().subspan(i * 64, 64), static_cast<int>(i % 3));
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 8;
  cfg.sgd.lr = 0.1;
  auto log = train_classifier(model, data, cfg);
  EXPECT_LT(log.rows.back().loss, 1e-2);
}

TEST(Training, EmptyDatasetIsRejected) {
  MaeModel model(tiny_mae());
  ImageSet data{8, 8, 1, {}, {}};
  EXPECT_THROW(train_mae(model, data, TrainConfig{}), std::invalid_argument);
}

TEST(Training, NonFiniteLossAbortsWithDiagnostics) {
  ClassifierModel model(tiny_classifier());
  Tensor w = model.parameters().front().tensor;
  w.mutable_values()[0] = std::numeric_limits<double>::quiet_NaN();
  ImageSet data{8, 8, 1, {}, {}};
  auto imgs = random_images(2, tiny_classifier().grid, 37);
  for (std::size_t i = 0; i < 2; ++i) data.append(imgs.values().subspan(i * 64, 64), 1);
  try {
    train_classifier(model, data, TrainConfig{});
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 0"), std::string::npos);
    EXPECT_NE(msg.find("embed.weight"), std::string::npos);
  }
}

TEST(Training, CosineScheduleEndsAtFloor) {
  MomentumSgd opt({}, SgdConfig{"sgd", 0.1, 0.01, 0.9, 0.0, 0, 0.0}, 100);
  EXPECT_DOUBLE_EQ(opt.learning_rate(0), 0.1);
  EXPECT_NEAR(opt.learning_rate(50), 0.055, 1e-12);
  EXPECT_DOUBLE_EQ(opt.learning_rate(100), 0.01);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "maeguard_ckpt_test";
  std::filesystem::create_directories(dir);
  ClassifierModel clf(tiny_classifier());
  MaeModel mae(tiny_mae());
  save_classifier(dir / "clf.ckpt", clf);
  save_mae(dir / "mae.ckpt", mae);
  auto clf2 = load_classifier(dir / "clf.ckpt");
  auto mae2 = load_mae(dir / "mae.ckpt");
  EXPECT_EQ(clf2.config(), clf.config());
  EXPECT_EQ(mae2.config(), mae.config());
  auto images = random_images(2, tiny_mae().grid, 41);
  Graph g(ad::GradScope::kNone);
  EXPECT_EQ(values_of(clf.logits(g, images)), values_of(clf2.logits(g, images)));
  std::mt19937_64 rng(6);
  std::vector<MaskPattern> masks = {sample_mask(tiny_mae().grid, 0.5, rng),
                                    sample_mask(tiny_mae().grid, 0.5, rng)};
  EXPECT_EQ(mae_losses(mae, images, masks), mae_losses(mae2, images, masks));
  EXPECT_THROW(load_mae(dir / "clf.ckpt"), CheckpointError);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "maeguard_ckpt_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  }
  EXPECT_THROW(read_checkpoint(dir / "junk.ckpt"), CheckpointError);
  save_classifier(dir / "full.ckpt", ClassifierModel(tiny_classifier()));
  const auto size = std::filesystem::file_size(dir / "full.ckpt");
  std::filesystem::copy_file(dir / "full.ckpt", dir / "cut.ckpt",
                             std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(dir / "cut.ckpt", size - 16);
  EXPECT_THROW(load_classifier(dir / "cut.ckpt"), CheckpointError);
}
