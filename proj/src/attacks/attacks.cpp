#include "maeguard/attacks/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "maeguard/autodiff/ops.hpp"
#include "maeguard/models/rng.hpp"

namespace maeguard::attacks {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kPgdLinf: return "pgd-linf";
    case AttackKind::kPgdL2: return "pgd-l2";
    case AttackKind::kBim: return "bim";
    case AttackKind::kCwL2: return "cw-l2";
    case AttackKind::kDaa: return "daa";
  }
  return "unknown";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (auto k : {AttackKind::kFgsm, AttackKind::kPgdLinf, AttackKind::kPgdL2, AttackKind::kBim,
                 AttackKind::kCwL2, AttackKind::kDaa})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown attack kind '" + name +
                              "' (expected fgsm, pgd-linf, pgd-l2, bim, cw-l2 or daa)");
}

bool is_l2(AttackKind kind) { return kind == AttackKind::kPgdL2 || kind == AttackKind::kCwL2; }

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("attack: epsilon must be finite and >= 0");
  if (steps == 0) throw std::invalid_argument("attack: steps must be >= 1");
  if (!(lambda >= 0.0)) throw std::invalid_argument("attack: lambda must be >= 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("attack: alpha must be >= 0");
  if (kind == AttackKind::kDaa && masks == 0) throw std::invalid_argument("attack: DAA needs masks >= 1");
}

std::string AttackSpec::label() const {
  std::ostringstream os;
  os << to_string(kind) << '@' << epsilon;
  if (kind == AttackKind::kDaa) os << "/lambda=" << lambda;
  return os.str();
}

void project_linf(std::span<double> x, std::span<const double> origin, double eps) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], origin[i] - eps, origin[i] + eps);
}

void project_l2(std::span<double> x, std::span<const double> origin, double eps, std::size_t dim) {
  for (std::size_t b = 0; b * dim < x.size(); ++b) {
    double sq = 0.0;
    for (std::size_t e = b * dim; e < (b + 1) * dim; ++e) sq += (x[e] - origin[e]) * (x[e] - origin[e]);
    const double norm = std::sqrt(sq);
    if (norm <= eps) continue;
    const double s = eps / norm;
    for (std::size_t e = b * dim; e < (b + 1) * dim; ++e) x[e] = origin[e] + s * (x[e] - origin[e]);
  }
}

void clip_box(std::span<double> x) {
  for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

CeGradient ce_gradient(const ClassifierModel& model, const ad::Tensor& images,
                       std::span<const int> labels) {
  ad::Tensor x(images.shape(), {images.values().begin(), images.values().end()}, true);
  ad::Graph g(ad::GradScope::kInputsOnly);
  auto logits = model.logits(g, x);
  auto loss = ad::cross_entropy(g, logits, labels, ad::Reduction::kSum);
  auto grad = g.gradient(loss, x);
  return {{grad.values().begin(), grad.values().end()}, {logits.values().begin(), logits.values().end()}};
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct Batch {
  std::span<const std::size_t> ids;
  std::vector<int> labels;
  std::vector<double> clean;
  ad::Shape shape;
};

ad::Tensor as_tensor(const Batch& b, const std::vector<double>& x) { return ad::Tensor(b.shape, x); }

void random_start(const Batch& b, const AttackSpec& spec, std::size_t dim, std::vector<double>& x) {
  for (std::size_t i = 0; i < b.ids.size(); ++i) {
    auto rng = models::stream(spec.seed, b.ids[i], 0x57a7);
    auto xi = std::span<double>(x).subspan(i * dim, dim);
    if (spec.kind == AttackKind::kPgdL2) {
      // Uniform in the l2 ball: Gaussian direction, radius eps * u^(1/d).
      std::normal_distribution<double> gauss;
      std::vector<double> dir(dim);
      double sq = 0.0;
      for (auto& v : dir) {
        v = gauss(rng);
        sq += v * v;
      }
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double r = spec.epsilon * std::pow(u(rng), 1.0 / static_cast<double>(dim));
      const double s = sq > 0.0 ? r / std::sqrt(sq) : 0.0;
      for (std::size_t e = 0; e < dim; ++e) xi[e] += s * dir[e];
    } else {
      std::uniform_real_distribution<double> u(-spec.epsilon, spec.epsilon);
      for (auto& v : xi) v += u(rng);
    }
  }
  clip_box(x);
}

void project(const AttackSpec& spec, std::size_t dim, std::vector<double>& x,
             const std::vector<double>& clean) {
  if (is_l2(spec.kind)) {
    project_l2(x, clean, spec.epsilon, dim);
  } else {
    project_linf(x, clean, spec.epsilon);
  }
  clip_box(x);
}

std::vector<double> daa_gradient(const Batch& b, const std::vector<double>& x,
                                 const AttackSpec& spec, const AttackContext& ctx) {
  auto ce = ce_gradient(*ctx.classifier, as_tensor(b, x), b.labels).grad;
  if (spec.lambda == 0.0) return ce;
  std::vector<std::vector<models::MaskPattern>> masks;
  for (auto id : b.ids) masks.push_back(models::fixed_masks(ctx.mae->config(), ctx.mask_seed, id, spec.masks));
  const auto mse = models::mask_set_loss(*ctx.mae, as_tensor(b, x), masks, true);
  for (std::size_t e = 0; e < ce.size(); ++e) ce[e] -= spec.lambda * mse.grad[e];
  return ce;
}

void signed_steps(const Batch& b, const AttackSpec& spec, const AttackContext& ctx,
                  std::size_t dim, std::vector<double>& x) {
  const double alpha = spec.step_size();
  for (std::size_t t = 1; t <= spec.steps; ++t) {
    const auto g = spec.kind == AttackKind::kDaa
                       ? daa_gradient(b, x, spec, ctx)
                       : ce_gradient(*ctx.classifier, as_tensor(b, x), b.labels).grad;
    for (std::size_t e = 0; e < x.size(); ++e) x[e] += alpha * sign(g[e]);
    project(spec, dim, x, b.clean);
    if (ctx.on_iterate) ctx.on_iterate(t, b.ids, x);
  }
}

void l2_steps(const Batch& b, const AttackSpec& spec, const AttackContext& ctx, std::size_t dim,
              std::vector<double>& x) {
  const double alpha = spec.step_size();
  for (std::size_t t = 1; t <= spec.steps; ++t) {
    const auto g = ce_gradient(*ctx.classifier, as_tensor(b, x), b.labels).grad;
    for (std::size_t i = 0; i < b.ids.size(); ++i) {
      double sq = 0.0;
      for (std::size_t e = i * dim; e < (i + 1) * dim; ++e) sq += g[e] * g[e];
      if (sq == 0.0) continue;
      const double s = alpha / std::sqrt(sq);
      for (std::size_t e = i * dim; e < (i + 1) * dim; ++e) x[e] += s * g[e];
    }
    project(spec, dim, x, b.clean);
    if (ctx.on_iterate) ctx.on_iterate(t, b.ids, x);
  }
}

// Margin max(z_y - max_{k!=y} z_k, -kappa) + c ||x - x0||^2, minimized with
// normalized gradient steps; keeps the successful iterate of smallest l2.
std::vector<double> carlini_wagner(const Batch& b, const AttackSpec& spec, const AttackContext& ctx,
                                   std::size_t dim, std::vector<double>& x) {
  const std::size_t n = b.ids.size();
  const std::size_t k = ctx.classifier->config().classes;
  std::vector<double> best = x;
  std::vector<double> best_norm(n, std::numeric_limits<double>::infinity());
  const double alpha = spec.step_size();
  for (std::size_t t = 0;; ++t) {
    ad::Tensor xt(b.shape, x, true);
    ad::Graph g(ad::GradScope::kInputsOnly);
    auto logits = ctx.classifier->logits(g, xt);
    std::vector<double> coef(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto z = logits.values().subspan(i * k, k);
      const auto y = static_cast<std::size_t>(b.labels[i]);
      std::size_t other = y == 0 ? 1 : 0;
      for (std::size_t j = 0; j < k; ++j)
        if (j != y && z[j] > z[other]) other = j;
      const double margin = z[y] - z[other];
      if (models::argmax(z) != b.labels[i]) {
        const double d = l2_distance(std::span<const double>(x).subspan(i * dim, dim),
                                     std::span<const double>(b.clean).subspan(i * dim, dim));
        if (d < best_norm[i]) {
          best_norm[i] = d;
          std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * dim), dim,
                      best.begin() + static_cast<std::ptrdiff_t>(i * dim));
        }
      }
      if (margin > -spec.cw_kappa) {
        coef[i * k + y] = 1.0;
        coef[i * k + other] = -1.0;
      }
    }
    if (t == spec.steps) break;
    auto loss = ad::sum(g, ad::mul(g, logits, ad::Tensor(logits.shape(), coef)));
    std::vector<double> grad(x.size(), 0.0);
    if (g.tracks(loss)) {
      auto gt = g.gradient(loss, xt);
      std::copy(gt.values().begin(), gt.values().end(), grad.begin());
    }
    for (std::size_t e = 0; e < x.size(); ++e) grad[e] += 2.0 * spec.cw_c * (x[e] - b.clean[e]);
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0.0;
      for (std::size_t e = i * dim; e < (i + 1) * dim; ++e) sq += grad[e] * grad[e];
      if (sq == 0.0) continue;
      const double s = alpha / std::sqrt(sq);
      for (std::size_t e = i * dim; e < (i + 1) * dim; ++e) x[e] -= s * grad[e];
    }
    project(spec, dim, x, b.clean);
    if (ctx.on_iterate) ctx.on_iterate(t + 1, b.ids, x);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(best_norm[i]))
      std::copy_n(best.begin() + static_cast<std::ptrdiff_t>(i * dim), dim,
                  x.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return best_norm;
}

}  // namespace

std::vector<AdvExample> run_attack(const ImageSet& images, const AttackSpec& spec,
                                   const AttackContext& ctx, std::span<const std::size_t> image_ids) {
  spec.validate();
  if (ctx.classifier == nullptr) throw std::invalid_argument("attack: classifier missing");
  if (spec.kind == AttackKind::kDaa && spec.lambda > 0.0 && ctx.mae == nullptr)
    throw std::invalid_argument("attack: DAA needs an MAE");
  if (images.labels.size() != images.size()) throw std::invalid_argument("attack: labels required");
  std::vector<std::size_t> default_ids;
  if (image_ids.empty()) {
    default_ids.resize(images.size());
    std::iota(default_ids.begin(), default_ids.end(), 0);
    image_ids = default_ids;
  }
  if (image_ids.size() != images.size()) throw std::invalid_argument("attack: one id per image required");

  const std::size_t dim = images.image_size();
  const std::size_t k = ctx.classifier->config().classes;
  const std::size_t bs = std::max<std::size_t>(1, ctx.batch_size);
  std::vector<AdvExample> out;
  out.reserve(images.size());
  for (std::size_t first = 0; first < images.size(); first += bs) {
    const std::size_t n = std::min(bs, images.size() - first);
    Batch b;
    b.ids = image_ids.subspan(first, n);
    b.labels.assign(images.labels.begin() + static_cast<std::ptrdiff_t>(first),
                    images.labels.begin() + static_cast<std::ptrdiff_t>(first + n));
    auto src = images.image(first);
    b.clean.assign(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n * dim));
    b.shape = {n, images.height, images.width, images.channels};
    std::vector<double> x = b.clean;
    std::vector<double> cw_norms;

    switch (spec.kind) {
      case AttackKind::kFgsm: {
        const auto g = ce_gradient(*ctx.classifier, as_tensor(b, x), b.labels).grad;
        for (std::size_t e = 0; e < x.size(); ++e) x[e] += spec.epsilon * sign(g[e]);
        project(spec, dim, x, b.clean);
        if (ctx.on_iterate) ctx.on_iterate(1, b.ids, x);
        break;
      }
      case AttackKind::kPgdLinf:
      case AttackKind::kDaa:
        random_start(b, spec, dim, x);
        if (ctx.on_iterate) ctx.on_iterate(0, b.ids, x);
        signed_steps(b, spec, ctx, dim, x);
        break;
      case AttackKind::kBim:
        signed_steps(b, spec, ctx, dim, x);
        break;
      case AttackKind::kPgdL2:
        random_start(b, spec, dim, x);
        if (ctx.on_iterate) ctx.on_iterate(0, b.ids, x);
        l2_steps(b, spec, ctx, dim, x);
        break;
      case AttackKind::kCwL2:
        cw_norms = carlini_wagner(b, spec, ctx, dim, x);
        break;
    }

    ad::Graph g(ad::GradScope::kNone);
    auto logits = ctx.classifier->logits(g, as_tensor(b, x));
    for (std::size_t i = 0; i < n; ++i) {
      AdvExample ex;
      ex.image_id = b.ids[i];
      ex.clean.assign(b.clean.begin() + static_cast<std::ptrdiff_t>(i * dim),
                      b.clean.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
      ex.adv.assign(x.begin() + static_cast<std::ptrdiff_t>(i * dim),
                    x.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
      ex.label = b.labels[i];
      ex.prediction = models::argmax(logits.values().subspan(i * k, k));
      ex.success = spec.kind == AttackKind::kCwL2 ? std::isfinite(cw_norms[i]) : ex.prediction != ex.label;
      ex.linf = linf_distance(ex.adv, ex.clean);
      ex.l2 = l2_distance(ex.adv, ex.clean);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace maeguard::attacks
