#include "tsinception/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsinception/error.hpp"

namespace tsinception {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

double parse_field(const std::string& path, int row, int field, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [end, ec] = std::from_chars(first, last, v);
  check(ec == std::errc() && end == last && !text.empty(), "data: ", path, ": row ", row,
        ", field ", field, ": cannot parse \"", text, "\"");
  return v;
}

struct RawRow {
  double label;
  std::vector<double> values;
};

std::vector<RawRow> read_rows(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "data: cannot open \"", path, "\"");
  std::vector<RawRow> rows;
  std::string line;
  int row = 0;
  char sep = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    if (sep == 0) sep = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto fields = split_fields(line, sep);
    check(fields.size() >= 2, "data: ", path, ": row ", row,
          " has no values after the label");
    if (width == 0) width = fields.size();
    check(fields.size() == width, "data: ", path, ": row ", row, " has ",
          fields.size() - 1, " values, expected ", width - 1);
    RawRow r;
    r.label = parse_field(path, row, 1, fields[0]);
    for (std::size_t f = 1; f < fields.size(); ++f)
      r.values.push_back(parse_field(path, row, static_cast<int>(f) + 1, fields[f]));
    rows.push_back(std::move(r));
  }
  check(!rows.empty(), "data: ", path, ": no data rows");
  return rows;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string format_number(float v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

template <typename S>
Tensor<S> z_normalize(const Tensor<S>& series) {
  check(series.rank() == 2, "data: z_normalize expects a [channels, length] tensor, got ",
        shape_str(series.shape));
  const int channels = series.dim(0);
  const int t_len = series.dim(1);
  Tensor<S> out(series.shape);
  for (int c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (int t = 0; t < t_len; ++t) mean += series(c, t);
    mean /= t_len;
    double var = 0.0;
    for (int t = 0; t < t_len; ++t) {
      const double d = series(c, t) - mean;
      var += d * d;
    }
    var /= t_len;
    const double sd = std::sqrt(var);
    if (sd == 0.0) {
      for (int t = 0; t < t_len; ++t) out(c, t) = S(0);
    } else {
      for (int t = 0; t < t_len; ++t)
        out(c, t) = static_cast<S>((series(c, t) - mean) / sd);
    }
  }
  return out;
}

template <typename S>
Dataset<S> load_ucr(const std::string& train_path, const std::string& test_path,
                    bool normalize) {
  const auto train_rows = read_rows(train_path);
  const auto test_rows = read_rows(test_path);
  const std::size_t t_len = train_rows[0].values.size();
  for (std::size_t i = 0; i < test_rows.size(); ++i)
    check(test_rows[i].values.size() == t_len, "data: ", test_path, ": row ", i + 1,
          " has ", test_rows[i].values.size(), " values, the training split has ", t_len);

  std::vector<double> mapping;
  for (const auto& r : train_rows) mapping.push_back(r.label);
  std::sort(mapping.begin(), mapping.end());
  mapping.erase(std::unique(mapping.begin(), mapping.end()), mapping.end());

  auto class_of = [&](double label) {
    auto it = std::lower_bound(mapping.begin(), mapping.end(), label);
    if (it == mapping.end() || *it != label) return 0;
    return static_cast<int>(it - mapping.begin()) + 1;
  };

  Dataset<S> ds;
  ds.num_classes = static_cast<int>(mapping.size());
  ds.channels = 1;
  ds.length = static_cast<int>(t_len);
  ds.label_mapping = mapping;
  ds.name = std::filesystem::path(train_path).stem().string();
  ds.provenance = train_path + " + " + test_path;

  auto to_series = [&](const RawRow& r, int cls) {
    LabeledSeries<S> s;
    s.values = Tensor<S>({1, static_cast<int>(t_len)});
    for (std::size_t t = 0; t < t_len; ++t) s.values.data[t] = static_cast<S>(r.values[t]);
    if (normalize) s.values = z_normalize(s.values);
    s.label = cls;
    return s;
  };
  for (const auto& r : train_rows) ds.train.push_back(to_series(r, class_of(r.label)));
  for (std::size_t i = 0; i < test_rows.size(); ++i) {
    const int cls = class_of(test_rows[i].label);
    check(cls != 0, "data: ", test_path, ": row ", i + 1, ": label ",
          format_number(test_rows[i].label), " does not appear in the training split");
    ds.test.push_back(to_series(test_rows[i], cls));
  }
  return ds;
}

template <typename S>
void save_ucr(const Dataset<S>& ds, const std::string& train_path,
              const std::string& test_path) {
  auto write_split = [&](const std::vector<LabeledSeries<S>>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    check(out.good(), "data: cannot write \"", path, "\"");
    for (const auto& r : rows) {
      check(r.label >= 1 && r.label <= static_cast<int>(ds.label_mapping.size()),
            "data: series label ", r.label, " is outside the recorded mapping");
      out << format_number(ds.label_mapping[r.label - 1]);
      for (S v : r.values.data) out << '\t' << format_number(v);
      out << '\n';
    }
    check(out.good(), "data: write to \"", path, "\" failed");
  };
  write_split(ds.train, train_path);
  write_split(ds.test, test_path);
}

template <typename S>
Dataset<S> generate_synthetic(const SyntheticSpec& spec) {
  check(spec.length >= 10, "data: synthetic series length must be at least 10, got ",
        spec.length, " (the pattern would be empty)");
  check(spec.num_classes >= 1, "data: num_classes must be positive, got ", spec.num_classes);
  check(spec.train_per_class >= 1 && spec.test_per_class >= 1,
        "data: instances per class must be positive");
  check(spec.noise_low <= spec.noise_high, "data: noise range is inverted");
  const int plen = spec.pattern_length();

  std::vector<int> starts = spec.pattern_starts;
  if (starts.empty()) {
    for (int c = 0; c < spec.num_classes; ++c) {
      int s = static_cast<int>(static_cast<long long>(c) * spec.length / spec.num_classes);
      starts.push_back(std::min(s, spec.length - plen));
    }
  }
  check(static_cast<int>(starts.size()) == spec.num_classes,
        "data: expected one pattern start per class (", spec.num_classes, "), got ",
        starts.size());
  for (std::size_t c = 0; c < starts.size(); ++c)
    check(starts[c] >= 0 && starts[c] + plen <= spec.length, "data: class ", c + 1,
          " pattern [", starts[c], ", ", starts[c] + plen, ") falls outside the series");
  for (std::size_t a = 0; a < starts.size(); ++a)
    for (std::size_t b = a + 1; b < starts.size(); ++b)
      check(starts[a] + plen <= starts[b] || starts[b] + plen <= starts[a],
            "data: class ", a + 1, " and class ", b + 1, " pattern windows overlap");

  Rng root(spec.seed);
  Rng train_rng = root.split(0);
  Rng test_rng = root.split(1);

  auto make_split = [&](int per_class, Rng& rng) {
    std::vector<LabeledSeries<S>> rows;
    const int total = per_class * spec.num_classes;
    for (int i = 0; i < total; ++i) {
      const int cls = i % spec.num_classes + 1;
      LabeledSeries<S> s;
      s.label = cls;
      s.values = Tensor<S>({1, spec.length});
      for (int t = 0; t < spec.length; ++t)
        s.values.data[t] = static_cast<S>(rng.uniform(spec.noise_low, spec.noise_high));
      for (int t = starts[cls - 1]; t < starts[cls - 1] + plen; ++t)
        s.values.data[t] = static_cast<S>(spec.amplitude);
      rows.push_back(std::move(s));
    }
    return rows;
  };

  Dataset<S> ds;
  ds.num_classes = spec.num_classes;
  ds.channels = 1;
  ds.length = spec.length;
  ds.name = "synthetic";
  std::ostringstream prov;
  prov << "generated: T=" << spec.length << " C=" << spec.num_classes << " seed=" << spec.seed;
  ds.provenance = prov.str();
  for (int c = 1; c <= spec.num_classes; ++c) ds.label_mapping.push_back(c);
  ds.train = make_split(spec.train_per_class, train_rng);
  ds.test = make_split(spec.test_per_class, test_rng);
  return ds;
}

std::vector<std::vector<int>> batch_iterator(int n, int batch_size, Rng* shuffle) {
  check(batch_size >= 1, "data: batch size must be positive, got ", batch_size);
  check(n >= 0, "data: instance count must be non-negative, got ", n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  if (shuffle) tsinception::shuffle(order, *shuffle);
  std::vector<std::vector<int>> batches;
  for (int b = 0; b < n; b += batch_size) {
    const int hi = std::min(n, b + batch_size);
    batches.emplace_back(order.begin() + b, order.begin() + hi);
  }
  return batches;
}

#define TSINCEPTION_INSTANTIATE_DATASET(S)                                     \
  template Tensor<S> z_normalize<S>(const Tensor<S>&);                         \
  template Dataset<S> load_ucr<S>(const std::string&, const std::string&, bool); \
  template void save_ucr<S>(const Dataset<S>&, const std::string&, const std::string&); \
  template Dataset<S> generate_synthetic<S>(const SyntheticSpec&);

TSINCEPTION_INSTANTIATE_DATASET(float)
TSINCEPTION_INSTANTIATE_DATASET(double)

}  // namespace tsinception
