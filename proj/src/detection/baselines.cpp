#include "maeguard/detection/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "maeguard/attacks/attacks.hpp"
#include "maeguard/autodiff/graph.hpp"
#include "maeguard/autodiff/ops.hpp"
#include "maeguard/models/rng.hpp"

namespace maeguard::detection {

std::vector<double> median_filter3(std::span<const double> image, std::size_t height,
                                   std::size_t width, std::size_t channels) {
  if (image.size() != height * width * channels) throw std::invalid_argument("median_filter3: size mismatch");
  std::vector<double> out(image.size());
  std::array<double, 9> win{};
  auto at = [&](long r, long c, std::size_t ch) {
    r = std::clamp(r, 0L, static_cast<long>(height) - 1);
    c = std::clamp(c, 0L, static_cast<long>(width) - 1);
    return image[(static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c)) * channels + ch];
  };
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        std::size_t k = 0;
        for (long dr = -1; dr <= 1; ++dr)
          for (long dc = -1; dc <= 1; ++dc)
            win[k++] = at(static_cast<long>(r) + dr, static_cast<long>(c) + dc, ch);
        std::nth_element(win.begin(), win.begin() + 4, win.end());
        out[(r * width + c) * channels + ch] = win[4];
      }
    }
  }
  return out;
}

std::vector<double> quantize_bits(std::span<const double> image, int bits) {
  if (bits < 1 || bits > 16) throw std::invalid_argument("quantize_bits: bits must be in [1,16]");
  const double levels = std::ldexp(1.0, bits) - 1.0;
  std::vector<double> out(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    out[i] = std::round(std::clamp(image[i], 0.0, 1.0) * levels) / levels;
  return out;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

std::vector<std::vector<double>> softmax_outputs(const models::ClassifierModel& model,
                                                 const models::ImageSet& images,
                                                 std::size_t batch_size) {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  const std::size_t k = model.config().classes;
  for (std::size_t first = 0; first < images.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, images.size() - first);
    ad::Graph g(ad::GradScope::kNone);
    auto p = ad::softmax(g, model.logits(g, images.batch(first, n)));
    for (std::size_t i = 0; i < n; ++i)
      out.emplace_back(p.values().begin() + static_cast<long>(i * k),
                       p.values().begin() + static_cast<long>((i + 1) * k));
  }
  return out;
}

std::vector<double> baseline_fs(const models::ImageSet& images, const models::ClassifierModel& model,
                                int bits) {
  models::ImageSet median = images, quant = images;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto m = median_filter3(images.image(i), images.height, images.width, images.channels);
    std::copy(m.begin(), m.end(), median.image(i).begin());
    auto q = quantize_bits(images.image(i), bits);
    std::copy(q.begin(), q.end(), quant.image(i).begin());
  }
  const auto p0 = softmax_outputs(model, images);
  const auto p1 = softmax_outputs(model, median);
  const auto p2 = softmax_outputs(model, quant);
  std::vector<double> score(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    score[i] = std::max(l1_distance(p0[i], p1[i]), l1_distance(p0[i], p2[i]));
  return score;
}

std::vector<double> baseline_nd(const models::ImageSet& images, const models::ClassifierModel& model,
                                double r, std::size_t trials, std::uint64_t seed,
                                std::span<const std::size_t> image_ids) {
  if (trials == 0) throw std::invalid_argument("baseline_nd: trials must be positive");
  if (!image_ids.empty() && image_ids.size() != images.size())
    throw std::invalid_argument("baseline_nd: one id per image required");
  const auto p0 = softmax_outputs(model, images);
  std::vector<double> score(images.size(), 0.0);
  if (r <= 0.0) return score;
  for (std::size_t t = 0; t < trials; ++t) {
    models::ImageSet noisy = images;
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto rng = models::stream(seed, image_ids.empty() ? i : image_ids[i], t);
      std::normal_distribution<double> noise(0.0, r);
      for (auto& v : noisy.image(i)) v += noise(rng);
    }
    const auto p = softmax_outputs(model, noisy);
    for (std::size_t i = 0; i < images.size(); ++i) score[i] += l1_distance(p0[i], p[i]);
  }
  for (auto& s : score) s /= static_cast<double>(trials);
  return score;
}

namespace {

int choose_target(std::span<const double> logits, const TdConfig& cfg) {
  switch (cfg.rule) {
    case TargetRule::kFixed:
      return cfg.fixed_target;
    case TargetRule::kLeastLikely:
      return static_cast<int>(std::min_element(logits.begin(), logits.end()) - logits.begin());
    case TargetRule::kRunnerUp: {
      const int top = models::argmax(logits);
      int best = -1;
      for (int k = 0; k < static_cast<int>(logits.size()); ++k) {
        if (k == top) continue;
        if (best < 0 || logits[static_cast<std::size_t>(k)] > logits[static_cast<std::size_t>(best)]) best = k;
      }
      return best < 0 ? top : best;
    }
  }
  return 0;
}

}  // namespace

std::vector<std::size_t> td_steps(const models::ImageSet& images, const models::ClassifierModel& model,
                                  const TdConfig& cfg) {
  const std::size_t k = model.config().classes;
  if (cfg.rule == TargetRule::kFixed && (cfg.fixed_target < 0 || static_cast<std::size_t>(cfg.fixed_target) >= k))
    throw std::invalid_argument("baseline_td: fixed target out of range");
  const std::size_t dim = images.image_size();
  std::vector<std::size_t> steps(images.size(), cfg.max_steps);
  constexpr std::size_t kBatch = 32;
  for (std::size_t first = 0; first < images.size(); first += kBatch) {
    const std::size_t n = std::min(kBatch, images.size() - first);
    auto x0 = images.batch(first, n);
    auto x = x0.clone();
    std::vector<int> target(n);
    std::vector<bool> done(n, false);
    for (std::size_t step = 0;; ++step) {
      auto ce = attacks::ce_gradient(model, x, target);
      if (step == 0) {
        for (std::size_t i = 0; i < n; ++i) target[i] = choose_target({ce.logits.data() + i * k, k}, cfg);
        ce = attacks::ce_gradient(model, x, target);
      }
      bool all = true;
      for (std::size_t i = 0; i < n; ++i) {
        if (!done[i] && models::argmax({ce.logits.data() + i * k, k}) == target[i]) {
          done[i] = true;
          steps[first + i] = step;
        }
        all = all && done[i];
      }
      if (all || step == cfg.max_steps) break;
      auto xv = x.mutable_values();
      for (std::size_t j = 0; j < xv.size(); ++j) {
        if (done[j / dim]) continue;
        const double gj = ce.grad[j];
        xv[j] -= cfg.alpha * static_cast<double>((gj > 0.0) - (gj < 0.0));
      }
      attacks::project_linf(xv, x0.values(), cfg.epsilon);
      attacks::clip_box(xv);
    }
  }
  return steps;
}

std::vector<double> baseline_td(const models::ImageSet& images, const models::ClassifierModel& model,
                                const TdConfig& cfg) {
  const auto k = td_steps(images, model, cfg);
  std::vector<double> score(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) score[i] = -static_cast<double>(k[i]);
  return score;
}

}  // namespace maeguard::detection
