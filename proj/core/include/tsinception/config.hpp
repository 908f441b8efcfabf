#pragma once

#include <string>
#include <vector>

namespace tsinception {

// one inception module: optional bottleneck, parallel convolutions of the
// given lengths, optional maxpool branch, channel concatenation.
struct InceptionModuleConfig {
  bool use_bottleneck = true;
  int bottleneck_size = 64;  // m; the applied width is min(m, input channels)
  std::vector<int> filter_lengths{10, 20, 40};
  int filters_per_branch = 32;
  bool use_maxpool_branch = true;
  int maxpool_window = 3;

  int branch_count() const {
    return static_cast<int>(filter_lengths.size()) + (use_maxpool_branch ? 1 : 0);
  }
  int output_channels() const { return filters_per_branch * branch_count(); }

  bool operator==(const InceptionModuleConfig&) const = default;
};

struct NetworkConfig {
  int depth = 6;
  bool residual_enabled = true;
  int residual_period = 3;
  int num_classes = 2;
  int input_channels = 1;
  InceptionModuleConfig module;

  bool operator==(const NetworkConfig&) const = default;
};

// throws Error naming the offending field
void validate(const NetworkConfig& config);

// json round-trip used by config files and checkpoint headers. parsing
// accepts missing fields (defaults apply) but rejects unknown keys.
std::string config_to_json(const NetworkConfig& config);
NetworkConfig config_from_json(const std::string& text);

}  // namespace tsinception
