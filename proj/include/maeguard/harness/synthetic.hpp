#pragma once

#include <cstddef>
#include <cstdint>

#include "maeguard/models/data.hpp"

namespace maeguard::harness {

struct GlyphConfig {
  std::size_t side = 28;
  std::size_t count = 6000;
  std::uint64_t seed = 17;
  double jitter = 0.035;    // per-vertex displacement, glyph units
  double rotation = 0.2;    // max radians
  double noise = 0.02;      // background gaussian sigma
};

// Ten stroke-drawn digit glyphs, 0-9, rendered with random affine jitter,
// stroke width and ink level. Labels cycle 0..9; image i depends only on (seed, i).
models::ImageSet make_glyphs(const GlyphConfig& cfg);

}  // namespace maeguard::harness
