#pragma once

#include <string>

#include "navgen/error.hpp"

namespace navgen {

// Model hyperparameters. Width d splits into (d/2, d/8 x4) sub-embeddings,
// so d must be divisible by 8; 2d must be divisible by the head count.
struct ModelConfig {
  int d = 32;
  int gat_layers = 2;
  int zone_layers = 2;
  int traj_layers = 2;
  int heads = 4;
  double leaky_slope = 0.2;
  bool literal_dk_scale = false;  // divide attention logits by d_k instead of sqrt(d_k)
  int window = 64;                // prefix cap during search

  bool disable_road_encoder = false;  // raw id-embedding rows, no graph layers
  bool disable_traj_encoder = false;  // current point projection instead of the transformer
  bool disable_navigator = false;     // zero destination query/key halves

  int length_buckets = 32;
  int lonlat_buckets = 64;
  int angle_buckets = 36;

  void validate() const {
    if (d <= 0 || d % 8 != 0) throw config_error("d must be positive and divisible by 8");
    if (heads <= 0 || (2 * d) % heads != 0) throw config_error("2d must be divisible by heads");
    if (gat_layers < 1 || zone_layers < 1 || traj_layers < 1)
      throw config_error("layer counts must be >= 1");
    if (window < 1) throw config_error("window must be >= 1");
    if (length_buckets < 1 || lonlat_buckets < 1 || angle_buckets < 1)
      throw config_error("bucket counts must be >= 1");
  }

  int head_dim() const { return 2 * d / heads; }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json);
};

}  // namespace navgen
