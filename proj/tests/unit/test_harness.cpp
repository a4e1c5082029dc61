#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "maeguard/harness/artifacts.hpp"
#include "maeguard/harness/config.hpp"
#include "maeguard/harness/dataset.hpp"
#include "maeguard/harness/pipeline.hpp"
#include "maeguard/harness/stats.hpp"
#include "maeguard/harness/synthetic.hpp"

namespace fs = std::filesystem;
namespace hn = maeguard::harness;
using maeguard::models::ImageSet;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("maeguard_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

hn::ExperimentConfig tiny_config(const fs::path& out) {
  auto cfg = hn::default_config();
  cfg.data.synthetic_count = 260;
  cfg.data.train = 120;
  cfg.data.calibration = 100;
  cfg.data.test = 40;
  cfg.classifier.depth = 1;
  cfg.classifier_train.epochs = 1;
  cfg.mae.enc_depth = 1;
  cfg.mae_train.epochs = 1;
  cfg.attacks.resize(2);  // fgsm, pgd-linf
  cfg.attacks[1].steps = 3;
  cfg.attack_examples = 16;
  cfg.detection.reference_size = 100;
  cfg.detection.window = 8;
  cfg.detection.bootstrap_batches = 20;
  cfg.detection.nd_trials = 2;
  cfg.detection.td.max_steps = 3;
  cfg.repair.iters = 2;
  cfg.repair.masks = 2;
  cfg.detection.masks = 2;
  cfg.sweeps.iters = {0, 1};
  cfg.sweeps.epsilons = {2.0 / 255, 4.0 / 255};
  cfg.sweeps.daa_lambdas = {0, 2};
  cfg.sweeps.daa_examples = 8;
  cfg.sweeps.daa.steps = 2;
  cfg.output_dir = out.string();
  return cfg;
}

}  // namespace

TEST(Config, DefaultRoundTripsThroughJson) {
  const auto cfg = hn::default_config();
  const auto back = hn::config_from_json(nlohmann::json::parse(hn::dump_config(cfg)));
  EXPECT_EQ(hn::dump_config(back), hn::dump_config(cfg));
}

TEST(Config, UnknownKeysAreRejectedWithTheirPath) {
  auto j = nlohmann::json::parse(hn::dump_config(hn::default_config()));
  j["detection"]["windw"] = 16;
  try {
    hn::config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const hn::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("windw"), std::string::npos);
  }
}

TEST(Config, FileMayContainCommentsAndPartialOverrides) {
  auto dir = scratch("config");
  std::ofstream(dir / "c.json") << "{\n  // fewer masks\n  \"detection\": {\"masks\": 2}\n}\n";
  const auto cfg = hn::load_config(dir / "c.json");
  EXPECT_EQ(cfg.detection.masks, 2u);
  EXPECT_EQ(cfg.detection.window, hn::default_config().detection.window);
}

TEST(Config, ValidationCatchesBadRanges) {
  auto cfg = hn::default_config();
  cfg.detection.fpr_target = 1.5;
  EXPECT_THROW(hn::validate(cfg), hn::ConfigError);
  cfg = hn::default_config();
  cfg.data.train = cfg.data.synthetic_count;
  EXPECT_THROW(hn::validate(cfg), hn::ConfigError);
  EXPECT_NO_THROW(hn::validate(hn::default_config()));
}

TEST(Dataset, HandWrittenIdxFixtureDecodesExactly) {
  auto dir = scratch("idx");
  std::vector<unsigned char> img, lab;
  put_u32(img, 0x0803);
  put_u32(img, 4);
  put_u32(img, 2);
  put_u32(img, 2);
  for (unsigned char v : {0, 255, 51, 102, 1, 2, 3, 4, 255, 255, 0, 0, 10, 20, 30, 40}) img.push_back(v);
  put_u32(lab, 0x0801);
  put_u32(lab, 4);
  for (unsigned char v : {7, 0, 3, 9}) lab.push_back(v);
  write_bytes(dir / "img.idx", img);
  write_bytes(dir / "lab.idx", lab);

  const auto set = hn::read_idx(dir / "img.idx", dir / "lab.idx");
  ASSERT_EQ(set.size(), 4u);
  EXPECT_EQ(set.height, 2u);
  EXPECT_EQ(set.width, 2u);
  EXPECT_EQ(set.channels, 1u);
  EXPECT_EQ(set.labels, (std::vector<int>{7, 0, 3, 9}));
  EXPECT_EQ(set.pixels[0], 0.0);
  EXPECT_EQ(set.pixels[1], 1.0);
  EXPECT_DOUBLE_EQ(set.pixels[2], 0.2);
  EXPECT_DOUBLE_EQ(set.pixels[15], 40.0 / 255.0);

  hn::write_idx(set, dir / "img2.idx", dir / "lab2.idx");
  EXPECT_EQ(slurp(dir / "img2.idx"), slurp(dir / "img.idx"));
  EXPECT_EQ(slurp(dir / "lab2.idx"), slurp(dir / "lab.idx"));
}

TEST(Dataset, IdxErrorsAreDescriptive) {
  auto dir = scratch("idx_errors");
  write_bytes(dir / "empty.idx", {});
  std::vector<unsigned char> img, lab;
  put_u32(img, 0x0803);
  put_u32(img, 1);
  put_u32(img, 1);
  put_u32(img, 1);
  img.push_back(9);
  put_u32(lab, 0x0801);
  put_u32(lab, 2);
  lab.push_back(1);
  lab.push_back(2);
  write_bytes(dir / "img.idx", img);
  write_bytes(dir / "lab.idx", lab);
  EXPECT_THROW(hn::read_idx(dir / "empty.idx", dir / "lab.idx"), hn::DatasetError);
  EXPECT_THROW(hn::read_idx(dir / "missing.idx", dir / "lab.idx"), hn::DatasetError);
  try {
    hn::read_idx(dir / "img.idx", dir / "lab.idx");
    FAIL() << "expected DatasetError";
  } catch (const hn::DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Dataset, ManifestRoundTripIsExactOnByteValuedPixels) {
  auto dir = scratch("manifest");
  ImageSet set{3, 2, 1, {}, {}};
  std::mt19937 rng(3);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> img(6);
    for (auto& v : img) v = static_cast<double>(rng() % 256) / 255.0;
    set.append(img, i % 3);
  }
  hn::write_manifest(set, dir / "m.json");
  const auto back = hn::ingest_dataset("manifest", dir / "m.json");
  EXPECT_EQ(back.pixels, set.pixels);
  EXPECT_EQ(back.labels, set.labels);
  EXPECT_EQ(back.height, 3u);
  EXPECT_EQ(back.width, 2u);
}

TEST(Dataset, SplitsPartitionWithoutOverlap) {
  hn::GlyphConfig g;
  g.count = 50;
  const auto set = hn::make_glyphs(g);
  const auto sp = hn::split_dataset(set, 30, 10, 10, 4);
  EXPECT_EQ(sp.train.size() + sp.calibration.size() + sp.test.size(), set.size());
  const auto again = hn::split_dataset(set, 30, 10, 10, 4);
  EXPECT_EQ(again.test.pixels, sp.test.pixels);
  EXPECT_THROW(hn::split_dataset(set, 40, 10, 10, 4), hn::DatasetError);
}

TEST(Stats, WelchMatchesHandComputedStatistic) {
  const std::vector<double> a = {5.1, 4.9, 6.2, 5.7, 6.0, 5.4};
  const std::vector<double> b = {4.2, 4.8, 4.4, 5.0, 4.6};
  double ma = 0, mb = 0;
  for (double v : a) ma += v / a.size();
  for (double v : b) mb += v / b.size();
  double va = 0, vb = 0;
  for (double v : a) va += (v - ma) * (v - ma) / (a.size() - 1);
  for (double v : b) vb += (v - mb) * (v - mb) / (b.size() - 1);
  const double sa = va / a.size(), sb = vb / b.size();
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) /
                    (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
  const auto r = hn::welch_t_test(a, b);
  EXPECT_NEAR(r.t, t, 1e-12);
  EXPECT_NEAR(r.df, df, 1e-12);
  boost::math::students_t dist(df);
  EXPECT_NEAR(r.p_greater, boost::math::cdf(boost::math::complement(dist, t)), 1e-12);
  EXPECT_GT(hn::welch_t_test(b, a).p_greater, 0.5);
}

TEST(Stats, HistogramCountsSumToSampleSize) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d(0.5, 0.3);
  std::vector<double> v(777);
  for (auto& x : v) x = d(rng);
  const auto h = hn::histogram(v, 0.0, 1.0, 13);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, v.size());
  EXPECT_EQ(hn::median(std::vector<double>{3, 1, 2, 10}), 2.5);
}

TEST(Csv, WriterAndParserAgree) {
  hn::CsvWriter w({"a", "b"});
  w.row({hn::fmt(0.1), hn::fmt(std::size_t{3})}).row({hn::fmt(-2.5), hn::fmt(7)});
  const auto t = hn::parse_csv(w.str());
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.numbers("a"), (std::vector<double>{0.1, -2.5}));
  EXPECT_THROW(w.row({"1"}), std::exception);
}

TEST(Results, CsvHeaderAndRoundTrip) {
  hn::ResultTable t;
  t.clean_accuracy = 0.97;
  t.p_threshold = 0.013;
  hn::ResultRow r;
  r.attack = "pgd-linf@0.1";
  r.kind = "pgd-linf";
  r.epsilon = 0.1;
  r.examples = 256;
  r.tpr_mae = 1.0 / 3.0;
  t.rows.push_back(r);
  const auto csv = hn::results_csv(t);
  const auto parsed = hn::parse_csv(csv);
  EXPECT_EQ(parsed.header, hn::result_columns());
  EXPECT_EQ(hn::parse_results(csv, hn::clean_csv(t)), t);
}

TEST(Artifacts, AdvSetRoundTripsBitExactly) {
  auto dir = scratch("adv");
  maeguard::attacks::AdvExample e;
  e.image_id = 42;
  e.label = 3;
  e.prediction = 5;
  e.success = true;
  e.clean = {0.0, 0.25, 1.0, 0.5};
  e.adv = {0.1, 0.15, 0.9, 0.6000000000000001};
  e.linf = 0.1;
  e.l2 = 0.2;
  maeguard::attacks::AttackSpec spec;
  spec.kind = maeguard::attacks::AttackKind::kPgdLinf;
  spec.epsilon = 0.1;
  hn::write_adv_set(dir / "a.adv", {e}, spec, {2, 2, 1, 1});
  const auto back = hn::read_adv_set(dir / "a.adv");
  ASSERT_EQ(back.examples.size(), 1u);
  EXPECT_EQ(back.examples[0].adv, e.adv);
  EXPECT_EQ(back.examples[0].image_id, 42u);
  EXPECT_EQ(back.spec.epsilon, 0.1);
  write_bytes(dir / "bad.adv", {'n', 'o', 'p', 'e'});
  EXPECT_THROW(hn::read_adv_set(dir / "bad.adv"), hn::ArtifactError);
}

TEST(Artifacts, RunDirsAreNumberedAndWriteOnce) {
  auto dir = scratch("rundir");
  auto a = hn::RunDir::create(dir);
  auto b = hn::RunDir::create(dir);
  EXPECT_NE(a.root(), b.root());
  a.write_text("x/y.txt", "hello");
  EXPECT_THROW(a.write_text("x/y.txt", "again"), hn::ArtifactError);
  const auto sums = a.write_checksums();
  ASSERT_EQ(sums.size(), 1u);
  EXPECT_EQ(sums.at("x/y.txt"),
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824");
}

TEST(Pipeline, MissingInputsNameTheStageToRerun) {
  auto dir = scratch("report_missing");
  auto cfg = tiny_config(dir);
  auto run = hn::RunDir::create(dir);
  run.write_text("config.json", hn::dump_config(cfg));
  try {
    hn::report(run.root());
    FAIL() << "expected StageError";
  } catch (const hn::StageError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("rerun:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("train-clf"), std::string::npos) << msg;
    EXPECT_NE(msg.find("scores/pgd-linf_0.1.csv"), std::string::npos) << msg;
  }
}

TEST(Pipeline, EmptyAttackListGivesCleanMetricsOnly) {
  auto dir = scratch("no_attacks");
  auto cfg = tiny_config(dir);
  cfg.attacks.clear();
  const auto t = hn::run_pipeline(cfg);
  EXPECT_TRUE(t.rows.empty());
  EXPECT_EQ(hn::parse_csv(hn::results_csv(t)).rows.size(), 0u);
  EXPECT_GT(t.clean_accuracy, 0.0);
  EXPECT_GT(t.loss_clean, 0.0);
}

TEST(Pipeline, SameSeedGivesIdenticalTablesAndChecksums) {
  auto dir = scratch("determinism");
  const auto cfg = tiny_config(dir);
  hn::RunDir r1(""), r2("");
  const auto t1 = hn::run_pipeline(cfg, {}, &r1);
  const auto t2 = hn::run_pipeline(cfg, {}, &r2);
  EXPECT_EQ(t1, t2);
  ASSERT_EQ(t1.rows.size(), 2u);
  EXPECT_EQ(slurp(r1.path("checksums.sha256")), slurp(r2.path("checksums.sha256")));
  for (const auto& rel : {"results.csv", "report/results.csv", "sweeps/iters.csv", "daa/curve.csv"}) {
    if (r1.has(rel)) {
      EXPECT_EQ(slurp(r1.path(rel)), slurp(r2.path(rel))) << rel;
    }
  }
}
