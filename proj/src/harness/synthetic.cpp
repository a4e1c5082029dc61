#include "maeguard/harness/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "maeguard/models/rng.hpp"

namespace maeguard::harness {

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

// Arc centred at (cx, cy) with radii (rx, ry) from angle a0 to a1 (radians,
// y pointing down, 0 = right).
Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1, int n = 12) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * i / n;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

const std::array<std::vector<Stroke>, 10>& glyphs() {
  constexpr double pi = std::numbers::pi;
  static const std::array<std::vector<Stroke>, 10> table = {{
      {arc(0.5, 0.5, 0.26, 0.38, 0, 2 * pi, 20)},
      {{{0.38, 0.24}, {0.54, 0.12}, {0.54, 0.88}}, {{0.36, 0.88}, {0.72, 0.88}}},
      {[] {
         auto s = arc(0.5, 0.34, 0.24, 0.22, pi, 2.15 * pi);
         s.push_back({0.26, 0.88});
         s.push_back({0.78, 0.88});
         return s;
       }()},
      {arc(0.48, 0.31, 0.24, 0.19, 1.1 * pi, 2.5 * pi), arc(0.48, 0.69, 0.27, 0.2, 1.5 * pi, 2.9 * pi)},
      {{{0.66, 0.88}, {0.66, 0.12}, {0.22, 0.64}, {0.82, 0.64}}},
      {[] {
         Stroke s = {{0.74, 0.12}, {0.32, 0.12}, {0.28, 0.46}};
         auto a = arc(0.5, 0.64, 0.26, 0.24, 1.2 * pi, 2.75 * pi);
         s.insert(s.end(), a.begin(), a.end());
         return s;
       }()},
      {[] {
         Stroke s = arc(0.56, 0.42, 0.3, 0.4, 1.45 * pi, 1.0 * pi, 8);
         auto a = arc(0.5, 0.66, 0.24, 0.22, pi, 3 * pi, 16);
         s.insert(s.end(), a.begin(), a.end());
         return s;
       }()},
      {{{0.24, 0.12}, {0.78, 0.12}, {0.42, 0.88}}, {{0.36, 0.5}, {0.66, 0.5}}},
      {arc(0.5, 0.3, 0.2, 0.18, 0, 2 * pi, 16), arc(0.5, 0.68, 0.25, 0.2, 0, 2 * pi, 16)},
      {[] {
         Stroke s = arc(0.5, 0.34, 0.24, 0.22, 0, 2 * pi, 16);
         s.push_back({0.72, 0.7});
         s.push_back({0.56, 0.88});
         return s;
       }()},
  }};
  return table;
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

models::ImageSet make_glyphs(const GlyphConfig& cfg) {
  models::ImageSet set{cfg.side, cfg.side, 1, {}, {}};
  set.pixels.reserve(cfg.count * cfg.side * cfg.side);
  const double side = static_cast<double>(cfg.side);
  std::vector<double> img(cfg.side * cfg.side);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    const int label = static_cast<int>(i % 10);
    auto rng = models::stream(cfg.seed, 0x6c7f, i);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const double rot = cfg.rotation * u(rng);
    const double scale = 0.72 + 0.1 * u(rng);
    const double aspect = 1.0 + 0.12 * u(rng);
    const double shear = 0.15 * u(rng);
    const double tx = 0.06 * u(rng), ty = 0.06 * u(rng);
    const double width = (1.1 + 0.5 * (u(rng) + 1.0)) / side;  // stroke radius in unit coords
    const double ink = 0.85 + 0.15 * std::abs(u(rng));
    const double c = std::cos(rot), s = std::sin(rot);

    std::vector<Stroke> strokes;
    for (const auto& stroke : glyphs()[static_cast<std::size_t>(label)]) {
      Stroke t;
      for (Pt p : stroke) {
        double x = (p.x - 0.5) * aspect + shear * (p.y - 0.5) + cfg.jitter * g(rng);
        double y = (p.y - 0.5) + cfg.jitter * g(rng);
        x *= scale;
        y *= scale;
        t.push_back({0.5 + tx + c * x - s * y, 0.5 + ty + s * x + c * y});
      }
      strokes.push_back(std::move(t));
    }
    for (std::size_t r = 0; r < cfg.side; ++r) {
      for (std::size_t col = 0; col < cfg.side; ++col) {
        const Pt p{(static_cast<double>(col) + 0.5) / side, (static_cast<double>(r) + 0.5) / side};
        double d = 1e9;
        for (const auto& st : strokes)
          for (std::size_t k = 0; k + 1 < st.size(); ++k) d = std::min(d, segment_distance(p, st[k], st[k + 1]));
        // One-pixel soft edge around the stroke.
        const double cover = std::clamp((width - d) * side + 0.5, 0.0, 1.0);
        img[r * cfg.side + col] = std::clamp(ink * cover + cfg.noise * g(rng), 0.0, 1.0);
      }
    }
    set.append(img, label);
  }
  return set;
}

}  // namespace maeguard::harness
