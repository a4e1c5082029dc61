#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maeguard/models/classifier.hpp"
#include "maeguard/models/data.hpp"
#include "maeguard/models/mae.hpp"

namespace maeguard::attacks {

using models::ClassifierModel;
using models::ImageSet;
using models::MaeModel;

enum class AttackKind { kFgsm, kPgdLinf, kPgdL2, kBim, kCwL2, kDaa };

std::string to_string(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);
bool is_l2(AttackKind kind);

struct AttackSpec {
  AttackKind kind = AttackKind::kPgdLinf;
  double epsilon = 0.1;  // l-inf bound on the [0,1] scale, or l2 radius
  double alpha = 0.0;    // 0 selects epsilon / 8
  std::size_t steps = 20;
  double lambda = 0.0;   // DAA weight on the MAE loss
  std::size_t masks = 4; // DAA masks per example
  double cw_c = 0.1;
  double cw_kappa = 0.0;
  std::uint64_t seed = 0;

  double step_size() const { return alpha > 0.0 ? alpha : epsilon / 8.0; }
  // Throws std::invalid_argument on a malformed spec.
  void validate() const;
  std::string label() const;  // e.g. "pgd-linf@0.1"

  bool operator==(const AttackSpec&) const = default;
};

struct AdvExample {
  std::size_t image_id = 0;
  std::vector<double> clean;
  std::vector<double> adv;
  int label = 0;
  int prediction = 0;  // classifier output on adv
  bool success = false;
  double linf = 0.0;   // ||adv - clean||_inf
  double l2 = 0.0;     // ||adv - clean||_2
};

// Called with the batch iterate after every projection (x_t for t >= 1).
using IterateFn = std::function<void(std::size_t step, std::span<const std::size_t> image_ids,
                                     std::span<const double> iterate)>;

struct AttackContext {
  const ClassifierModel* classifier = nullptr;
  const MaeModel* mae = nullptr;       // DAA only
  std::uint64_t mask_seed = 0;         // seed of the per-example DAA mask sets
  std::size_t batch_size = 32;
  IterateFn on_iterate;
};

// Attacks every image of `images`; image_ids[i] (defaults to i) keys the
// per-example random streams.
std::vector<AdvExample> run_attack(const ImageSet& images, const AttackSpec& spec,
                                   const AttackContext& ctx,
                                   std::span<const std::size_t> image_ids = {});

// d(sum_i CE(x_i, y_i))/dx for a (B,H,W,C) batch; also returns the logits.
struct CeGradient {
  std::vector<double> grad;
  std::vector<double> logits;
};
CeGradient ce_gradient(const ClassifierModel& model, const ad::Tensor& images,
                       std::span<const int> labels);

// Per-example projections over a flattened batch of `dim`-sized images.
void project_linf(std::span<double> x, std::span<const double> origin, double eps);
void project_l2(std::span<double> x, std::span<const double> origin, double eps, std::size_t dim);
void clip_box(std::span<double> x);

double linf_distance(std::span<const double> a, std::span<const double> b);
double l2_distance(std::span<const double> a, std::span<const double> b);

}  // namespace maeguard::attacks
