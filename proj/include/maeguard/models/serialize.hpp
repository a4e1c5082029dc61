#pragma once

#include "json.hpp"
#include "maeguard/models/classifier.hpp"
#include "maeguard/models/mae.hpp"
#include "maeguard/models/optimizer.hpp"
#include "maeguard/models/training.hpp"

namespace maeguard::models {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PatchGrid, height, width, patch, channels)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ClassifierConfig, grid, embed_dim, depth, heads,
                                                mlp_hidden, classes, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MaeConfig, grid, enc_dim, enc_depth, enc_heads,
                                                enc_hidden, dec_dim, dec_depth, dec_heads,
                                                dec_hidden, mask_ratio, seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SgdConfig, method, lr, lr_min, momentum, weight_decay,
                                                warmup_steps, clip_norm, beta2, adam_eps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, epochs, batch_size, sgd, seed)

}  // namespace maeguard::models
