#include "tsinception/config.hpp"

#include <json.hpp>

#include "tsinception/error.hpp"

namespace tsinception {

using nlohmann::json;

namespace {

// json arithmetic conversion also accepts booleans; keep the types strict
int as_int(const std::string& key, const json& v) {
  check(v.is_number_integer(), "config: \"", key, "\" must be an integer");
  return v.get<int>();
}

bool as_bool(const std::string& key, const json& v) {
  check(v.is_boolean(), "config: \"", key, "\" must be a boolean");
  return v.get<bool>();
}

std::vector<int> as_int_vector(const std::string& key, const json& v) {
  check(v.is_array(), "config: \"", key, "\" must be an array of integers");
  std::vector<int> out;
  for (const auto& item : v) out.push_back(as_int(key, item));
  return out;
}

}  // namespace

std::string config_to_json(const NetworkConfig& c) {
  const json m = {
      {"use_bottleneck", c.module.use_bottleneck},
      {"bottleneck_size", c.module.bottleneck_size},
      {"filter_lengths", c.module.filter_lengths},
      {"filters_per_branch", c.module.filters_per_branch},
      {"use_maxpool_branch", c.module.use_maxpool_branch},
      {"maxpool_window", c.module.maxpool_window},
  };
  const json j = {
      {"depth", c.depth},
      {"residual_enabled", c.residual_enabled},
      {"residual_period", c.residual_period},
      {"num_classes", c.num_classes},
      {"input_channels", c.input_channels},
      {"module", m},
  };
  return j.dump(2);
}

NetworkConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail("config: invalid json: ", e.what());
  }
  NetworkConfig c;
  try {
    check(j.is_object(), "config: top level must be a json object");
    for (const auto& [key, value] : j.items()) {
      if (key == "depth") {
        c.depth = as_int(key, value);
      } else if (key == "residual_enabled") {
        c.residual_enabled = as_bool(key, value);
      } else if (key == "residual_period") {
        c.residual_period = as_int(key, value);
      } else if (key == "num_classes") {
        c.num_classes = as_int(key, value);
      } else if (key == "input_channels") {
        c.input_channels = as_int(key, value);
      } else if (key == "module") {
        check(value.is_object(), "config: \"module\" must be a json object");
        for (const auto& [mk, mv] : value.items()) {
          if (mk == "use_bottleneck") {
            c.module.use_bottleneck = as_bool(mk, mv);
          } else if (mk == "bottleneck_size") {
            c.module.bottleneck_size = as_int(mk, mv);
          } else if (mk == "filter_lengths") {
            c.module.filter_lengths = as_int_vector(mk, mv);
          } else if (mk == "filters_per_branch") {
            c.module.filters_per_branch = as_int(mk, mv);
          } else if (mk == "use_maxpool_branch") {
            c.module.use_maxpool_branch = as_bool(mk, mv);
          } else if (mk == "maxpool_window") {
            c.module.maxpool_window = as_int(mk, mv);
          } else {
            fail("config: unknown module field \"", mk, "\"");
          }
        }
      } else {
        fail("config: unknown field \"", key, "\"");
      }
    }
  } catch (const json::exception& e) {
    fail("config: ", e.what());
  }
  validate(c);
  return c;
}

}  // namespace tsinception
