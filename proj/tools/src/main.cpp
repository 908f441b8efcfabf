#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsinception/checkpoint.hpp"
#include "tsinception/config.hpp"
#include "tsinception/dataset.hpp"
#include "tsinception/ensemble.hpp"
#include "tsinception/error.hpp"
#include "tsinception/network.hpp"
#include "tsinception/parallel.hpp"
#include "tsinception/stats.hpp"
#include "tsinception/train.hpp"

#ifndef TSINCEPTION_VERSION
#define TSINCEPTION_VERSION "0.0.0"
#endif

namespace {

using json = nlohmann::json;
using namespace tsinception;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  check(ec == std::errc(), "cannot format number");
  return std::string(buf, end);
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "cannot open \"", path, "\"");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string crc_hex(const std::string& bytes) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc32(bytes.data(), bytes.size()));
  return buf;
}

std::string iso_utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// one json manifest per run: enough to identify inputs and rerun the command
void write_experiment_manifest(const std::string& path, const std::string& command,
                               const json& arguments, const std::vector<std::uint64_t>& seeds,
                               const std::vector<std::string>& input_paths,
                               const std::vector<std::string>& artifact_paths,
                               double wall_seconds) {
  json inputs = json::array();
  for (const auto& p : input_paths) {
    // an unreadable input (e.g. a failed sweep row's data file) is recorded
    // without a hash rather than aborting the manifest
    json entry = {{"path", p}, {"crc32", nullptr}};
    try {
      entry["crc32"] = crc_hex(slurp_file(p));
    } catch (const Error&) {
    }
    inputs.push_back(entry);
  }
  json doc = {{"schema_version", 1},
              {"tool_version", TSINCEPTION_VERSION},
              {"command", command},
              {"arguments", arguments},
              {"seeds", seeds},
              {"inputs", inputs},
              {"artifacts", artifact_paths},
              {"wall_clock_seconds", wall_seconds},
              {"completed_at", iso_utc_now()}};
  std::ofstream out(path);
  check(out.good(), "cannot write \"", path, "\"");
  out << doc.dump(2) << '\n';
  check(out.good(), "write to \"", path, "\" failed");
}

// ---------------------------------------------------------------- arch flags

struct ArchFlags {
  int depth = 6;
  int filters = 32;
  std::vector<int> filter_lengths{10, 20, 40};
  int bottleneck = 64;
  bool no_bottleneck = false;
  bool no_residual = false;
  int residual_period = 3;
  bool no_maxpool = false;
  int maxpool_window = 3;
};

void add_arch_flags(CLI::App* cmd, ArchFlags& a) {
  cmd->add_option("--depth", a.depth, "number of inception modules")->capture_default_str();
  cmd->add_option("--filters", a.filters, "filters per branch")->capture_default_str();
  cmd->add_option("--filter-lengths", a.filter_lengths, "comma-separated filter lengths")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--bottleneck", a.bottleneck, "bottleneck width")->capture_default_str();
  cmd->add_flag("--no-bottleneck", a.no_bottleneck, "disable the bottleneck layer");
  cmd->add_flag("--no-residual", a.no_residual, "disable shortcut connections");
  cmd->add_option("--residual-period", a.residual_period, "modules spanned by each shortcut")
      ->capture_default_str();
  cmd->add_flag("--no-maxpool", a.no_maxpool, "disable the max-pool branch");
  cmd->add_option("--maxpool-window", a.maxpool_window, "max-pool window size")
      ->capture_default_str();
}

NetworkConfig to_network_config(const ArchFlags& a, int channels, int classes) {
  NetworkConfig c;
  c.depth = a.depth;
  c.residual_enabled = !a.no_residual;
  c.residual_period = a.residual_period;
  c.input_channels = channels;
  c.num_classes = classes;
  c.module.use_bottleneck = !a.no_bottleneck;
  c.module.bottleneck_size = a.bottleneck;
  c.module.filter_lengths = a.filter_lengths;
  c.module.filters_per_branch = a.filters;
  c.module.use_maxpool_branch = !a.no_maxpool;
  c.module.maxpool_window = a.maxpool_window;
  return c;
}

json arch_to_json(const ArchFlags& a) {
  return json::parse(config_to_json(to_network_config(a, 1, 2)));
}

// ------------------------------------------------------------------ generate

struct GenerateOpts {
  int length = 0;
  int classes = 2;
  int instances = 128;
  int test_instances = 1024;
  std::uint64_t seed = 0;
  double noise_low = 0.0;
  double noise_high = 0.1;
  double amplitude = 1.0;
  std::vector<int> pattern_starts;
  std::string name = "synthetic";
  std::string out = ".";
};

void run_generate(const GenerateOpts& o) {
  const auto t0 = clock_type::now();
  check(o.classes >= 1, "--classes must be >= 1, got ", o.classes);
  check(o.instances % o.classes == 0, "--instances (", o.instances,
        ") must be divisible by --classes (", o.classes, ") for a balanced split");
  check(o.test_instances % o.classes == 0, "--test-instances (", o.test_instances,
        ") must be divisible by --classes (", o.classes, ")");
  SyntheticSpec spec;
  spec.length = o.length;
  spec.num_classes = o.classes;
  spec.train_per_class = o.instances / o.classes;
  spec.test_per_class = o.test_instances / o.classes;
  spec.noise_low = o.noise_low;
  spec.noise_high = o.noise_high;
  spec.amplitude = o.amplitude;
  spec.pattern_starts = o.pattern_starts;
  spec.seed = o.seed;
  auto ds = generate_synthetic<double>(spec);
  ds.name = o.name;

  fs::create_directories(o.out);
  const std::string train_path = (fs::path(o.out) / (o.name + "_TRAIN.tsv")).string();
  const std::string test_path = (fs::path(o.out) / (o.name + "_TEST.tsv")).string();
  save_ucr(ds, train_path, test_path);

  json args = {{"length", o.length},          {"classes", o.classes},
               {"instances", o.instances},    {"test_instances", o.test_instances},
               {"seed", o.seed},              {"noise_low", o.noise_low},
               {"noise_high", o.noise_high},  {"amplitude", o.amplitude},
               {"pattern_starts", o.pattern_starts}, {"name", o.name},
               {"out", o.out}};
  write_experiment_manifest((fs::path(o.out) / "experiment.json").string(), "generate", args,
                            {o.seed}, {}, {train_path, test_path}, seconds_since(t0));
  std::cout << "wrote " << ds.train.size() << " train and " << ds.test.size()
            << " test series of length " << ds.length << " to " << o.out << '\n';
}

// --------------------------------------------------------------------- train

struct TrainOpts {
  std::string train_path;
  std::string test_path;
  bool no_normalize = false;
  std::string out;
  int n = 5;
  std::uint64_t seed = 0;
  ArchFlags arch;
  int epochs = 1500;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 50;
  double min_learning_rate = 1e-4;
  bool no_shuffle = false;
  bool keep_final = false;
  int workers = 0;
};

TrainConfig to_train_config(const TrainOpts& o) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.learning_rate;
  tc.plateau_factor = o.plateau_factor;
  tc.plateau_patience = o.plateau_patience;
  tc.min_learning_rate = o.min_learning_rate;
  tc.seed = o.seed;
  tc.shuffle = !o.no_shuffle;
  tc.checkpoint_best = !o.keep_final;
  return tc;
}

void run_train(const TrainOpts& o) {
  const auto t0 = clock_type::now();
  if (o.workers > 0) set_worker_count(o.workers);
  const auto ds = load_ucr<float>(o.train_path, o.test_path, !o.no_normalize);
  const auto cfg = to_network_config(o.arch, ds.channels, ds.num_classes);
  std::cout << ds.name << ": " << ds.train.size() << " train / " << ds.test.size()
            << " test series, " << ds.num_classes << " classes, length " << ds.length
            << "; receptive field " << receptive_field(cfg) << '\n';

  std::vector<TrainHistory> histories;
  auto model = train_ensemble(ds, cfg, o.n, o.seed, to_train_config(o), &histories);

  fs::create_directories(o.out);
  save_ensemble(model, o.out);
  std::vector<std::string> artifacts{(fs::path(o.out) / "manifest.json").string()};
  for (int j = 0; j < o.n; ++j)
    artifacts.push_back((fs::path(o.out) / ("member_" + std::to_string(j) + ".tsinet")).string());
  for (int j = 0; j < o.n; ++j) {
    const auto path =
        (fs::path(o.out) / ("history_member_" + std::to_string(j) + ".csv")).string();
    save_history_csv(histories[j], path);
    artifacts.push_back(path);
    std::cout << "member " << j << ": best epoch " << histories[j].best_epoch << ", best loss "
              << histories[j].best_loss << '\n';
  }
  const double train_acc = ensemble_evaluate(model, ds.train, 128);
  const double test_acc = ensemble_evaluate(model, ds.test, 128);
  std::cout << "ensemble of " << o.n << ": train accuracy " << train_acc << ", test accuracy "
            << test_acc << '\n';

  json args = {{"train", o.train_path},
               {"test", o.test_path},
               {"normalize", !o.no_normalize},
               {"out", o.out},
               {"n", o.n},
               {"seed", o.seed},
               {"architecture", arch_to_json(o.arch)},
               {"epochs", o.epochs},
               {"batch_size", o.batch_size},
               {"learning_rate", o.learning_rate},
               {"plateau_factor", o.plateau_factor},
               {"plateau_patience", o.plateau_patience},
               {"min_learning_rate", o.min_learning_rate},
               {"shuffle", !o.no_shuffle},
               {"checkpoint_best", !o.keep_final}};
  write_experiment_manifest((fs::path(o.out) / "experiment.json").string(), "train", args,
                            model.seeds, {o.train_path, o.test_path}, artifacts,
                            seconds_since(t0));
}

// --------------------------------------------------------- predict, evaluate

struct PredictOpts {
  std::string model;
  std::string data;
  bool no_normalize = false;
  std::string out = ".";
  std::vector<int> sizes;  // evaluate only
  double alpha = 0.05;     // unused; keeps struct shared code simple
  int workers = 0;
};

template <typename S>
void run_predict_typed(const PredictOpts& o) {
  const auto t0 = clock_type::now();
  auto model = load_ensemble<S>(o.model);
  const auto ds = load_ucr<S>(o.data, o.data, !o.no_normalize);
  const auto& split = ds.train;

  fs::create_directories(o.out);
  const std::string out_path = (fs::path(o.out) / "predictions.csv").string();
  std::ofstream out(out_path);
  check(out.good(), "cannot write \"", out_path, "\"");
  out << "instance,label,predicted";
  for (int c = 1; c <= ds.num_classes; ++c)
    out << ",prob_" << format_number(ds.label_mapping[c - 1]);
  out << '\n';

  const int chunk = 128;
  std::vector<Tensor<S>> probs;
  for (std::size_t lo = 0; lo < split.size(); lo += chunk) {
    const std::size_t hi = std::min(split.size(), lo + chunk);
    std::vector<const Tensor<S>*> xs;
    for (std::size_t i = lo; i < hi; ++i) xs.push_back(&split[i].values);
    ensemble_predict_batch(model, xs, probs);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& p = probs[i - lo];
      out << i + 1 << ',' << format_number(ds.label_mapping[split[i].label - 1]) << ','
          << format_number(ds.label_mapping[argmax_class(p) - 1]);
      for (int c = 0; c < ds.num_classes; ++c)
        out << ',' << format_number(static_cast<double>(p.data[c]));
      out << '\n';
    }
  }
  out.close();
  check(out.good(), "write to \"", out_path, "\" failed");

  json args = {{"model", o.model}, {"data", o.data}, {"normalize", !o.no_normalize},
               {"out", o.out}};
  write_experiment_manifest((fs::path(o.out) / "experiment.json").string(), "predict", args,
                            model.seeds, {o.data}, {out_path}, seconds_since(t0));
  std::cout << "wrote " << split.size() << " predictions to " << out_path << '\n';
}

template <typename S>
void run_evaluate_typed(const PredictOpts& o) {
  const auto t0 = clock_type::now();
  auto model = load_ensemble<S>(o.model);
  const auto ds = load_ucr<S>(o.data, o.data, !o.no_normalize);
  const auto& split = ds.train;

  json result = {{"model", o.model},
                 {"data", o.data},
                 {"instances", split.size()},
                 {"members", model.members.size()},
                 {"accuracy", ensemble_evaluate(model, split, 128)}};
  if (!o.sizes.empty()) {
    json rows = json::array();
    for (const auto& row : ensemble_size_sweep(model, split, o.sizes, 128))
      rows.push_back({{"size", row.size}, {"accuracy", row.accuracy}});
    result["sizes"] = rows;
  }
  std::cout << result.dump(2) << '\n';

  if (!o.out.empty()) {
    fs::create_directories(o.out);
    const std::string out_path = (fs::path(o.out) / "evaluation.json").string();
    std::ofstream out(out_path);
    check(out.good(), "cannot write \"", out_path, "\"");
    out << result.dump(2) << '\n';
    out.close();
    json args = {{"model", o.model}, {"data", o.data}, {"normalize", !o.no_normalize},
                 {"sizes", o.sizes}, {"out", o.out}};
    write_experiment_manifest((fs::path(o.out) / "experiment.json").string(), "evaluate", args,
                              model.seeds, {o.data}, {out_path}, seconds_since(t0));
  }
}

// checkpoints record their precision; retry in double when the store is not
// 32-bit
template <void (*F32)(const PredictOpts&), void (*F64)(const PredictOpts&)>
void run_either_precision(const PredictOpts& o) {
  if (o.workers > 0) set_worker_count(o.workers);
  try {
    F32(o);
  } catch (const std::runtime_error& e) {
    if (std::string(e.what()).find("precision mismatch") == std::string::npos) throw;
    F64(o);
  }
}

// ---------------------------------------------------------------- rf, params

struct InspectOpts {
  ArchFlags arch;
  int channels = 1;
  int classes = 2;
  bool breakdown = false;
};

void run_rf(const InspectOpts& o) {
  std::cout << receptive_field(to_network_config(o.arch, o.channels, o.classes)) << '\n';
}

void run_params(const InspectOpts& o) {
  const auto cfg = to_network_config(o.arch, o.channels, o.classes);
  Rng rng(0);
  auto net = build_network<float>(cfg, rng);
  std::vector<ParamCount> breakdown;
  const long long total = parameter_count(net, o.breakdown ? &breakdown : nullptr);
  std::cout << total << '\n';
  for (const auto& row : breakdown) std::cout << row.name << ',' << row.count << '\n';
}

// --------------------------------------------------------------------- sweep

struct SweepOpts {
  std::string grid;
  std::string out;
  int workers = 0;
};

struct SweepDataEntry {
  std::string name;
  std::string train;
  std::string test;
  bool normalize = true;
};

struct SweepRow {
  SweepDataEntry data;
  NetworkConfig arch;
  std::uint64_t seed = 0;
  std::string key;
};

int grid_int(const json& v, const std::string& key) {
  check(v.is_number_integer(), "sweep: \"", key, "\" must be an integer");
  return v.get<int>();
}

double grid_double(const json& v, const std::string& key) {
  check(v.is_number(), "sweep: \"", key, "\" must be a number");
  return v.get<double>();
}

bool grid_bool(const json& v, const std::string& key) {
  check(v.is_boolean(), "sweep: \"", key, "\" must be a boolean");
  return v.get<bool>();
}

TrainConfig parse_train_fragment(const json& j) {
  check(j.is_object(), "sweep: \"train\" must be an object");
  TrainConfig tc;
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") tc.epochs = grid_int(value, key);
    else if (key == "batch_size") tc.batch_size = grid_int(value, key);
    else if (key == "learning_rate") tc.learning_rate = grid_double(value, key);
    else if (key == "plateau_factor") tc.plateau_factor = grid_double(value, key);
    else if (key == "plateau_patience") tc.plateau_patience = grid_int(value, key);
    else if (key == "min_learning_rate") tc.min_learning_rate = grid_double(value, key);
    else if (key == "shuffle") tc.shuffle = grid_bool(value, key);
    else if (key == "checkpoint_best") tc.checkpoint_best = grid_bool(value, key);
    else fail("sweep: unknown train key \"", key, "\"");
  }
  return tc;
}

json train_config_to_json(const TrainConfig& tc) {
  return {{"epochs", tc.epochs},
          {"batch_size", tc.batch_size},
          {"learning_rate", tc.learning_rate},
          {"plateau_factor", tc.plateau_factor},
          {"plateau_patience", tc.plateau_patience},
          {"min_learning_rate", tc.min_learning_rate},
          {"shuffle", tc.shuffle},
          {"checkpoint_best", tc.checkpoint_best}};
}

const char* sweep_header =
    "key,dataset,depth,filters,filter_lengths,bottleneck,residual,maxpool,seed,rf,params,"
    "epochs,train_accuracy,test_accuracy,seconds,status";

std::string sanitize_csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void run_sweep(const SweepOpts& o) {
  const auto t0 = clock_type::now();
  const std::string grid_text = slurp_file(o.grid);
  json grid;
  try {
    grid = json::parse(grid_text);
  } catch (const std::exception& e) {
    fail("sweep: invalid grid json: ", e.what());
  }
  check(grid.is_object(), "sweep: the grid must be a json object");
  for (const auto& [key, value] : grid.items()) {
    (void)value;
    check(key == "data" || key == "architectures" || key == "seeds" || key == "train",
          "sweep: unknown grid key \"", key, "\"");
  }

  std::vector<SweepDataEntry> data;
  if (grid.contains("data")) {
    check(grid["data"].is_array(), "sweep: \"data\" must be an array");
    for (const auto& item : grid["data"]) {
      check(item.is_object() && item.contains("train") && item.contains("test"),
            "sweep: each data entry needs \"train\" and \"test\" paths");
      SweepDataEntry e;
      e.train = item.at("train").get<std::string>();
      e.test = item.at("test").get<std::string>();
      e.name = item.contains("name") ? item.at("name").get<std::string>()
                                     : fs::path(e.train).stem().string();
      if (item.contains("normalize")) e.normalize = grid_bool(item["normalize"], "normalize");
      for (const auto& [key, value] : item.items()) {
        (void)value;
        check(key == "train" || key == "test" || key == "name" || key == "normalize",
              "sweep: unknown data key \"", key, "\"");
      }
      data.push_back(std::move(e));
    }
  }
  std::vector<NetworkConfig> archs;
  if (grid.contains("architectures")) {
    check(grid["architectures"].is_array(), "sweep: \"architectures\" must be an array");
    for (const auto& item : grid["architectures"]) archs.push_back(config_from_json(item.dump()));
  } else {
    archs.push_back(NetworkConfig{});
  }
  std::vector<std::uint64_t> seeds;
  if (grid.contains("seeds")) {
    check(grid["seeds"].is_array(), "sweep: \"seeds\" must be an array");
    for (const auto& item : grid["seeds"])
      seeds.push_back(static_cast<std::uint64_t>(grid_int(item, "seeds")));
  } else {
    seeds.push_back(0);
  }
  const TrainConfig tc_base =
      grid.contains("train") ? parse_train_fragment(grid["train"]) : TrainConfig{};
  const std::string train_json = train_config_to_json(tc_base).dump();

  std::vector<SweepRow> rows;
  for (const auto& d : data)
    for (const auto& a : archs)
      for (const auto s : seeds) {
        SweepRow row;
        row.data = d;
        row.arch = a;
        row.seed = s;
        const std::string identity = d.train + "\n" + d.test + "\n" +
                                     (d.normalize ? "1" : "0") + "\n" + config_to_json(a) +
                                     "\n" + std::to_string(s) + "\n" + train_json;
        row.key = crc_hex(identity);
        rows.push_back(std::move(row));
      }

  fs::create_directories(o.out);
  const std::string results_path = (fs::path(o.out) / "results.csv").string();
  std::set<std::string> done;
  bool have_header = false;
  if (fs::exists(results_path)) {
    std::ifstream in(results_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (lineno == 1) {
        check(line == sweep_header, "sweep: ", results_path,
              " has a different column layout; move it aside to start fresh");
        have_header = true;
        continue;
      }
      done.insert(line.substr(0, line.find(',')));
    }
  }
  std::ofstream out(results_path, std::ios::app);
  check(out.good(), "cannot write \"", results_path, "\"");
  if (!have_header) out << sweep_header << '\n' << std::flush;

  // rows are independent; a bounded pool executes them and a single writer
  // appends. kernels drop to one thread when rows run in parallel.
  int row_workers = o.workers > 0 ? o.workers : worker_count();
  row_workers = std::max(1, std::min<int>(row_workers, static_cast<int>(rows.size())));
  if (row_workers > 1) set_worker_count(1);

  std::mutex io_mutex;
  std::map<std::string, std::shared_ptr<const Dataset<float>>> cache;
  std::atomic<int> next{0};
  std::atomic<int> computed{0}, skipped{0}, failed{0};

  auto load_cached = [&](const SweepDataEntry& d) {
    const std::string cache_key = d.train + "\n" + d.test + "\n" + (d.normalize ? "1" : "0");
    std::lock_guard<std::mutex> lock(io_mutex);
    auto it = cache.find(cache_key);
    if (it != cache.end()) return it->second;
    auto ds = std::make_shared<const Dataset<float>>(
        load_ucr<float>(d.train, d.test, d.normalize));
    cache.emplace(cache_key, ds);
    return ds;
  };

  auto run_row = [&](const SweepRow& row) {
    if (done.count(row.key)) {
      ++skipped;
      return;
    }
    const auto row_t0 = clock_type::now();
    std::ostringstream line;
    auto cfg = row.arch;
    std::string lengths;
    for (std::size_t i = 0; i < cfg.module.filter_lengths.size(); ++i)
      lengths += (i ? " " : "") + std::to_string(cfg.module.filter_lengths[i]);
    std::string status = "ok", epochs, train_acc, test_acc, params = "", rf = "";
    try {
      auto ds = load_cached(row.data);
      cfg.input_channels = ds->channels;
      cfg.num_classes = ds->num_classes;
      rf = std::to_string(receptive_field(cfg));
      Rng rng(row.seed);
      auto net = build_network<float>(cfg, rng);
      params = std::to_string(parameter_count(net));
      TrainConfig tc = tc_base;
      tc.seed = row.seed;
      const auto history = train(net, *ds, tc);
      epochs = std::to_string(history.epochs.size());
      train_acc = format_number(evaluate(net, ds->train, 128));
      test_acc = format_number(evaluate(net, ds->test, 128));
      ++computed;
    } catch (const std::exception& e) {
      status = "failed: " + sanitize_csv_field(e.what());
      ++failed;
    }
    line << row.key << ',' << sanitize_csv_field(row.data.name) << ',' << cfg.depth << ','
         << cfg.module.filters_per_branch << ',' << lengths << ','
         << (cfg.module.use_bottleneck ? cfg.module.bottleneck_size : 0) << ','
         << (cfg.residual_enabled ? 1 : 0) << ',' << (cfg.module.use_maxpool_branch ? 1 : 0)
         << ',' << row.seed << ',' << rf << ',' << params << ',' << epochs << ',' << train_acc
         << ',' << test_acc << ',' << format_number(seconds_since(row_t0)) << ',' << status;
    std::lock_guard<std::mutex> lock(io_mutex);
    out << line.str() << '\n' << std::flush;
    std::cout << "row " << row.key << " (" << row.data.name << ", seed " << row.seed
              << "): " << status << '\n';
  };

  if (row_workers <= 1) {
    for (const auto& row : rows) run_row(row);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < row_workers; ++w)
      pool.emplace_back([&] {
        while (true) {
          const int i = next.fetch_add(1);
          if (i >= static_cast<int>(rows.size())) return;
          run_row(rows[i]);
        }
      });
    for (auto& t : pool) t.join();
  }
  out.close();

  std::vector<std::string> inputs{o.grid};
  for (const auto& d : data) {
    inputs.push_back(d.train);
    inputs.push_back(d.test);
  }
  json args = {{"grid", o.grid}, {"out", o.out}, {"workers", row_workers}};
  write_experiment_manifest((fs::path(o.out) / "experiment.json").string(), "sweep", args,
                            seeds, inputs, {results_path}, seconds_since(t0));
  std::cout << "sweep: " << computed << " computed, " << skipped << " skipped, " << failed
            << " failed -> " << results_path << '\n';
}

// ------------------------------------------------------------------- compare

struct CompareOpts {
  std::string input;
  double alpha = 0.05;
  std::string out;
};

void run_compare(const CompareOpts& o) {
  const auto t0 = clock_type::now();
  const auto m = load_accuracy_csv(o.input);
  const auto report = cd_report(m, o.alpha);

  std::cout << m.classifiers.size() << " classifiers over " << m.datasets.size()
            << " datasets\n";
  if (report.friedman_used)
    std::cout << "friedman chi-square " << report.friedman_statistic << ", p "
              << report.friedman_p << '\n';
  else
    std::cout << "two classifiers: direct signed-rank comparison\n";
  std::vector<int> order(m.classifiers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return report.ranks[a] < report.ranks[b]; });
  for (int c : order)
    std::cout << "  rank " << format_number(report.ranks[c]) << "  " << m.classifiers[c]
              << '\n';
  if (!report.posthoc_ran) {
    std::cout << "no significant differences at alpha " << o.alpha << '\n';
  } else {
    for (const auto& pc : report.pairs)
      std::cout << "  " << m.classifiers[pc.a] << " vs " << m.classifiers[pc.b] << ": p "
                << format_number(pc.p_value) << (pc.significant ? " (significant)" : "")
                << ", win/tie/loss " << pc.record.wins << '/' << pc.record.ties << '/'
                << pc.record.losses << '\n';
  }
  for (const auto& clique : report.cliques) {
    std::cout << "  clique:";
    for (int c : clique) std::cout << ' ' << m.classifiers[c];
    std::cout << '\n';
  }

  if (!o.out.empty()) {
    fs::create_directories(o.out);
    const std::string json_path = (fs::path(o.out) / "report.json").string();
    const std::string csv_path = (fs::path(o.out) / "report.csv").string();
    std::ofstream jf(json_path);
    check(jf.good(), "cannot write \"", json_path, "\"");
    jf << report_to_json(report) << '\n';
    jf.close();
    save_report_csv(report, csv_path);
    json args = {{"input", o.input}, {"alpha", o.alpha}, {"out", o.out}};
    write_experiment_manifest((fs::path(o.out) / "experiment.json").string(), "compare", args,
                              {}, {o.input}, {json_path, csv_path}, seconds_since(t0));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inception-style convolutional ensembles for time series classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TSINCEPTION_VERSION);
  // flags may come from an ini/toml file with one [section] per subcommand;
  // explicit command-line flags win
  app.set_config("--config", "", "read defaults from a config file (sections name subcommands)");
  app.fallthrough();

  GenerateOpts gen;
  auto* cmd_gen = app.add_subcommand("generate", "write a synthetic dataset in label+values text form");
  cmd_gen->add_option("--length", gen.length, "series length")->required();
  cmd_gen->add_option("--classes", gen.classes, "number of classes")->capture_default_str();
  cmd_gen->add_option("--instances", gen.instances, "total training series")->capture_default_str();
  cmd_gen->add_option("--test-instances", gen.test_instances, "total test series")->capture_default_str();
  cmd_gen->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  cmd_gen->add_option("--noise-low", gen.noise_low, "noise floor")->capture_default_str();
  cmd_gen->add_option("--noise-high", gen.noise_high, "noise ceiling")->capture_default_str();
  cmd_gen->add_option("--amplitude", gen.amplitude, "pattern amplitude")->capture_default_str();
  cmd_gen->add_option("--pattern-starts", gen.pattern_starts,
                      "comma-separated window start per class (default: evenly spaced)")
      ->delimiter(',');
  cmd_gen->add_option("--name", gen.name, "dataset name and file prefix")->capture_default_str();
  cmd_gen->add_option("--out", gen.out, "output directory")->capture_default_str();
  cmd_gen->callback([&] { run_generate(gen); });

  TrainOpts tr;
  auto* cmd_tr = app.add_subcommand("train", "train an ensemble and save its checkpoints");
  cmd_tr->add_option("--train", tr.train_path, "training split file")->required();
  cmd_tr->add_option("--test", tr.test_path, "test split file")->required();
  cmd_tr->add_flag("--no-normalize", tr.no_normalize, "skip per-series z-normalization");
  cmd_tr->add_option("--out", tr.out, "model output directory")->required();
  cmd_tr->add_option("--n", tr.n, "ensemble members")->capture_default_str();
  cmd_tr->add_option("--seed", tr.seed, "base seed; member j uses seed+j")->capture_default_str();
  add_arch_flags(cmd_tr, tr.arch);
  cmd_tr->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
  cmd_tr->add_option("--batch-size", tr.batch_size, "mini-batch size")->capture_default_str();
  cmd_tr->add_option("--lr", tr.learning_rate, "initial learning rate")->capture_default_str();
  cmd_tr->add_option("--plateau-factor", tr.plateau_factor, "plateau decay factor")->capture_default_str();
  cmd_tr->add_option("--plateau-patience", tr.plateau_patience, "epochs without improvement before decay")->capture_default_str();
  cmd_tr->add_option("--min-lr", tr.min_learning_rate, "learning-rate floor")->capture_default_str();
  cmd_tr->add_flag("--no-shuffle", tr.no_shuffle, "keep batches in file order");
  cmd_tr->add_flag("--keep-final", tr.keep_final, "keep final-epoch weights instead of the best epoch");
  cmd_tr->add_option("--workers", tr.workers, "worker threads (default: TSINCEPTION_WORKERS or hardware)");
  cmd_tr->callback([&] { run_train(tr); });

  PredictOpts pr;
  auto* cmd_pr = app.add_subcommand("predict", "write per-instance class probabilities");
  cmd_pr->add_option("--model", pr.model, "model directory")->required();
  cmd_pr->add_option("--data", pr.data, "data file")->required();
  cmd_pr->add_flag("--no-normalize", pr.no_normalize, "skip per-series z-normalization");
  cmd_pr->add_option("--out", pr.out, "output directory")->capture_default_str();
  cmd_pr->add_option("--workers", pr.workers, "worker threads");
  cmd_pr->callback(
      [&] { run_either_precision<run_predict_typed<float>, run_predict_typed<double>>(pr); });

  PredictOpts ev;
  auto* cmd_ev = app.add_subcommand("evaluate", "accuracy of a saved model on a data file");
  cmd_ev->add_option("--model", ev.model, "model directory")->required();
  cmd_ev->add_option("--data", ev.data, "data file")->required();
  cmd_ev->add_flag("--no-normalize", ev.no_normalize, "skip per-series z-normalization");
  cmd_ev->add_option("--sizes", ev.sizes, "comma-separated ensemble sizes to also score")
      ->delimiter(',');
  cmd_ev->add_option("--out", ev.out, "also write evaluation.json to this directory");
  cmd_ev->add_option("--workers", ev.workers, "worker threads");
  cmd_ev->callback(
      [&] { run_either_precision<run_evaluate_typed<float>, run_evaluate_typed<double>>(ev); });

  InspectOpts rf;
  auto* cmd_rf = app.add_subcommand("rf", "print the receptive field of an architecture");
  add_arch_flags(cmd_rf, rf.arch);
  cmd_rf->callback([&] { run_rf(rf); });

  InspectOpts pa;
  auto* cmd_pa = app.add_subcommand("params", "print the learnable parameter count");
  add_arch_flags(cmd_pa, pa.arch);
  cmd_pa->add_option("--channels", pa.channels, "input channels")->capture_default_str();
  cmd_pa->add_option("--classes", pa.classes, "output classes")->capture_default_str();
  cmd_pa->add_flag("--breakdown", pa.breakdown, "also list per-tensor counts");
  cmd_pa->callback([&] { run_params(pa); });

  SweepOpts sw;
  auto* cmd_sw = app.add_subcommand("sweep", "train every grid point; resumes by skipping finished rows");
  cmd_sw->add_option("--grid", sw.grid, "grid json file")->required();
  cmd_sw->add_option("--out", sw.out, "output directory")->required();
  cmd_sw->add_option("--workers", sw.workers, "parallel rows (default: TSINCEPTION_WORKERS or hardware)");
  cmd_sw->callback([&] { run_sweep(sw); });

  CompareOpts cp;
  auto* cmd_cp = app.add_subcommand("compare", "rank classifiers from an accuracy table");
  cmd_cp->add_option("--input", cp.input, "accuracy csv (header row of classifier names, dataset name first column)")->required();
  cmd_cp->add_option("--alpha", cp.alpha, "significance level")->capture_default_str();
  cmd_cp->add_option("--out", cp.out, "also write report.json and report.csv to this directory");
  cmd_cp->callback([&] { run_compare(cp); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "tsinception: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
