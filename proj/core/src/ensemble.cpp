#include "tsinception/ensemble.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "tsinception/checkpoint.hpp"
#include "tsinception/config.hpp"
#include "tsinception/error.hpp"
#include "tsinception/version.hpp"

namespace tsinception {

using nlohmann::json;

namespace {

std::string member_file(int j) { return "member_" + std::to_string(j) + ".tsinet"; }

std::uint32_t config_crc(const NetworkConfig& config) {
  const auto text = config_to_json(config);
  return crc32(text.data(), text.size());
}

}  // namespace

template <typename S>
EnsembleModel<S> train_ensemble(const Dataset<S>& dataset, const NetworkConfig& config,
                                int n, std::uint64_t base_seed, const TrainConfig& tcfg,
                                std::vector<TrainHistory>* histories) {
  check(n >= 1, "ensemble: member count must be positive, got ", n);
  EnsembleModel<S> model;
  model.config = config;
  model.base_seed = base_seed;
  if (histories) histories->clear();
  for (int j = 0; j < n; ++j) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(j);
    try {
      Rng rng(seed);
      auto net = build_network<S>(config, rng);
      TrainConfig member_cfg = tcfg;
      member_cfg.seed = seed;
      auto history = train(net, dataset, member_cfg);
      if (histories) histories->push_back(std::move(history));
      model.members.push_back(std::move(net));
      model.seeds.push_back(seed);
    } catch (const Error& e) {
      fail("ensemble: member ", j, ": ", e.what());
    }
  }
  return model;
}

template <typename S>
void ensemble_predict_batch(EnsembleModel<S>& model, const std::vector<const Tensor<S>*>& xs,
                            std::vector<Tensor<S>>& probs) {
  check(!model.members.empty(), "ensemble: no members to predict with");
  const int classes = model.config.num_classes;
  const std::size_t n = xs.size();
  std::vector<std::vector<double>> acc(n, std::vector<double>(classes, 0.0));
  std::vector<Tensor<S>> member_probs;
  for (auto& member : model.members) {
    member.forward(xs, Mode::infer, member_probs);
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < classes; ++c) acc[i][c] += member_probs[i].data[c];
  }
  probs.resize(n);
  const double scale = 1.0 / static_cast<double>(model.members.size());
  for (std::size_t i = 0; i < n; ++i) {
    probs[i] = Tensor<S>({classes});
    for (int c = 0; c < classes; ++c) probs[i].data[c] = static_cast<S>(acc[i][c] * scale);
  }
}

template <typename S>
Tensor<S> ensemble_predict(EnsembleModel<S>& model, const Tensor<S>& x) {
  std::vector<const Tensor<S>*> xs{&x};
  std::vector<Tensor<S>> probs;
  ensemble_predict_batch(model, xs, probs);
  return probs[0];
}

template <typename S>
double ensemble_evaluate(EnsembleModel<S>& model, const std::vector<LabeledSeries<S>>& split,
                         int chunk) {
  check(!split.empty(), "ensemble: cannot evaluate an empty split");
  check(chunk >= 1, "ensemble: evaluation chunk must be positive, got ", chunk);
  int correct = 0;
  for (std::size_t at = 0; at < split.size(); at += chunk) {
    const std::size_t hi = std::min(split.size(), at + chunk);
    std::vector<const Tensor<S>*> xs;
    for (std::size_t i = at; i < hi; ++i) xs.push_back(&split[i].values);
    std::vector<Tensor<S>> probs;
    ensemble_predict_batch(model, xs, probs);
    for (std::size_t i = at; i < hi; ++i)
      if (argmax_class(probs[i - at]) == split[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

template <typename S>
std::vector<EnsembleSizeRow> ensemble_size_sweep(EnsembleModel<S>& pool,
                                                 const std::vector<LabeledSeries<S>>& split,
                                                 const std::vector<int>& sizes, int chunk) {
  check(!sizes.empty(), "ensemble: size list is empty");
  const int pool_size = static_cast<int>(pool.members.size());
  for (int s : sizes)
    check(s >= 1 && s <= pool_size, "ensemble: requested size ", s, " from a pool of ",
          pool_size);
  std::vector<EnsembleSizeRow> rows;
  for (int s : sizes) {
    // the size-s ensemble is the first s members of the pool
    EnsembleModel<S> prefix;
    prefix.config = pool.config;
    prefix.base_seed = pool.base_seed;
    prefix.members = std::vector<Network<S>>(
        std::make_move_iterator(pool.members.begin()),
        std::make_move_iterator(pool.members.begin() + s));
    const double acc = ensemble_evaluate(prefix, split, chunk);
    std::move(prefix.members.begin(), prefix.members.end(), pool.members.begin());
    rows.push_back({s, acc});
  }
  return rows;
}

template <typename S>
void save_ensemble(EnsembleModel<S>& model, const std::string& dir) {
  check(!model.members.empty(), "ensemble: nothing to save");
  check(model.members.size() == model.seeds.size(),
        "ensemble: member and seed counts disagree");
  std::filesystem::create_directories(dir);
  json manifest = {
      {"schema_version", checkpoint_schema_version},
      {"members", model.members.size()},
      {"base_seed", model.base_seed},
      {"member_seeds", model.seeds},
      {"config", json::parse(config_to_json(model.config))},
      {"config_crc32", config_crc(model.config)},
  };
  for (std::size_t j = 0; j < model.members.size(); ++j)
    save_checkpoint(model.members[j], (std::filesystem::path(dir) / member_file(static_cast<int>(j))).string());
  std::ofstream out(std::filesystem::path(dir) / "manifest.json", std::ios::trunc);
  check(out.good(), "ensemble: cannot write the manifest in \"", dir, "\"");
  out << manifest.dump(2) << '\n';
  check(out.good(), "ensemble: manifest write failed in \"", dir, "\"");
}

template <typename S>
EnsembleModel<S> load_ensemble(const std::string& dir) {
  const auto manifest_path = std::filesystem::path(dir) / "manifest.json";
  std::ifstream in(manifest_path);
  check(in.good(), "ensemble: cannot open \"", manifest_path.string(), "\"");
  json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    fail("ensemble: invalid manifest: ", e.what());
  }

  EnsembleModel<S> model;
  std::size_t count = 0;
  try {
    const int schema = manifest.at("schema_version").get<int>();
    check(schema == checkpoint_schema_version, "ensemble: unsupported schema version ",
          schema);
    count = manifest.at("members").get<std::size_t>();
    model.base_seed = manifest.at("base_seed").get<std::uint64_t>();
    model.seeds = manifest.at("member_seeds").get<std::vector<std::uint64_t>>();
    model.config = config_from_json(manifest.at("config").dump());
    const auto crc = manifest.at("config_crc32").get<std::uint32_t>();
    check(crc == config_crc(model.config), "ensemble: manifest config hash mismatch");
  } catch (const json::exception& e) {
    fail("ensemble: manifest: ", e.what());
  }
  check(count >= 1, "ensemble: manifest lists no members");
  check(model.seeds.size() == count, "ensemble: manifest lists ", model.seeds.size(),
        " seeds for ", count, " members");

  for (std::size_t j = 0; j < count; ++j) {
    auto net = load_checkpoint<S>(
        (std::filesystem::path(dir) / member_file(static_cast<int>(j))).string());
    check(net.config == model.config, "ensemble: member ", j,
          " config does not match the manifest");
    model.members.push_back(std::move(net));
  }
  return model;
}

#define TSINCEPTION_INSTANTIATE_ENSEMBLE(S)                                              \
  template EnsembleModel<S> train_ensemble<S>(const Dataset<S>&, const NetworkConfig&,  \
                                              int, std::uint64_t, const TrainConfig&,   \
                                              std::vector<TrainHistory>*);              \
  template Tensor<S> ensemble_predict<S>(EnsembleModel<S>&, const Tensor<S>&);          \
  template void ensemble_predict_batch<S>(EnsembleModel<S>&,                            \
                                          const std::vector<const Tensor<S>*>&,         \
                                          std::vector<Tensor<S>>&);                     \
  template double ensemble_evaluate<S>(EnsembleModel<S>&,                               \
                                       const std::vector<LabeledSeries<S>>&, int);      \
  template std::vector<EnsembleSizeRow> ensemble_size_sweep<S>(                         \
      EnsembleModel<S>&, const std::vector<LabeledSeries<S>>&, const std::vector<int>&, \
      int);                                                                             \
  template void save_ensemble<S>(EnsembleModel<S>&, const std::string&);                \
  template EnsembleModel<S> load_ensemble<S>(const std::string&);

TSINCEPTION_INSTANTIATE_ENSEMBLE(float)
TSINCEPTION_INSTANTIATE_ENSEMBLE(double)

}  // namespace tsinception
