#include "tsinception/stats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "tsinception/error.hpp"

namespace tsinception {

namespace {

using json = nlohmann::json;

constexpr int stats_schema_version = 1;

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  check(ec == std::errc(), "stats: cannot format number");
  return std::string(buf, end);
}

// rank 1 = largest value; tied values share the mean of their rank span
std::vector<double> rank_descending(const std::vector<double>& values) {
  const int k = static_cast<int>(values.size());
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  std::vector<double> ranks(k, 0.0);
  int i = 0;
  while (i < k) {
    int j = i;
    while (j + 1 < k && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * (i + j) + 1.0;
    for (int t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

// sum of (t^3 - t) over the tie groups of a sorted-by-value rank source
double tie_term(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < values.size()) {
    std::size_t j = i;
    while (j + 1 < values.size() && values[j + 1] == values[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

struct SignedRanks {
  std::vector<double> ranks;  // of |d| over nonzero differences
  std::vector<bool> positive;
  double w_plus = 0.0;
  double w_minus = 0.0;
};

SignedRanks signed_ranks(const std::vector<double>& diffs) {
  std::vector<double> abs_d;
  SignedRanks out;
  for (double d : diffs) {
    if (d == 0.0) continue;
    abs_d.push_back(std::fabs(d));
    out.positive.push_back(d > 0.0);
  }
  const int n = static_cast<int>(abs_d.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return abs_d[a] < abs_d[b]; });
  out.ranks.assign(n, 0.0);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
    const double mean_rank = 0.5 * (i + j) + 1.0;
    for (int t = i; t <= j; ++t) out.ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  for (int t = 0; t < n; ++t)
    (out.positive[t] ? out.w_plus : out.w_minus) += out.ranks[t];
  return out;
}

// null distribution of 2*W+ by convolving (1 + z^{2r}) per rank; doubled
// ranks are integers even when ties produce half ranks
double exact_two_sided_p(const SignedRanks& sr) {
  const int n = static_cast<int>(sr.ranks.size());
  const int total = n * (n + 1);  // sum of doubled ranks
  std::vector<double> counts(total + 1, 0.0);
  counts[0] = 1.0;
  int reach = 0;
  for (double r : sr.ranks) {
    const int dr = static_cast<int>(std::llround(2.0 * r));
    for (int s = reach; s >= 0; --s)
      if (counts[s] != 0.0) counts[s + dr] += counts[s];
    reach += dr;
  }
  const int observed = static_cast<int>(std::llround(2.0 * sr.w_plus));
  double below = 0.0, above = 0.0, all = 0.0;
  for (int s = 0; s <= total; ++s) {
    all += counts[s];
    if (s <= observed) below += counts[s];
    if (s >= observed) above += counts[s];
  }
  return std::min(1.0, 2.0 * std::min(below, above) / all);
}

double approx_two_sided_p(const SignedRanks& sr) {
  const double n = static_cast<double>(sr.ranks.size());
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(sr.ranks) / 48.0;
  check(var > 0.0, "stats: signed-rank variance is zero; every difference is tied");
  double d = sr.w_plus - mu;
  // continuity correction shrinks the observed deviation by half a step
  if (d > 0.5) d -= 0.5;
  else if (d < -0.5) d += 0.5;
  else d = 0.0;
  const double z = d / std::sqrt(var);
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

json clique_list_to_json(const std::vector<std::vector<int>>& cliques) {
  json arr = json::array();
  for (const auto& c : cliques) arr.push_back(c);
  return arr;
}

}  // namespace

void validate(const AccuracyMatrix& m) {
  check(m.classifiers.size() >= 2, "stats: need at least 2 classifiers, got ",
        m.classifiers.size());
  check(!m.datasets.empty(), "stats: need at least 1 dataset");
  check(m.values.size() == m.datasets.size(), "stats: ", m.datasets.size(),
        " dataset names but ", m.values.size(), " value rows");
  for (std::size_t i = 0; i < m.classifiers.size(); ++i) {
    check(!m.classifiers[i].empty(), "stats: classifier ", i + 1, " has an empty name");
    for (std::size_t j = i + 1; j < m.classifiers.size(); ++j)
      check(m.classifiers[i] != m.classifiers[j], "stats: duplicate classifier name \"",
            m.classifiers[i], "\"");
  }
  for (std::size_t d = 0; d < m.values.size(); ++d) {
    check(m.values[d].size() == m.classifiers.size(), "stats: dataset \"", m.datasets[d],
          "\" has ", m.values[d].size(), " values, expected ", m.classifiers.size());
    for (std::size_t c = 0; c < m.values[d].size(); ++c)
      check(m.values[d][c] >= 0.0 && m.values[d][c] <= 1.0, "stats: dataset \"",
            m.datasets[d], "\", classifier \"", m.classifiers[c], "\": accuracy ",
            m.values[d][c], " is outside [0,1]");
  }
}

AccuracyMatrix load_accuracy_csv(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "stats: cannot open \"", path, "\"");
  AccuracyMatrix m;
  std::string line;
  int row = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (!have_header) {
      check(fields.size() >= 3, "stats: ", path, ": header row needs at least 2 classifier names");
      m.classifiers.assign(fields.begin() + 1, fields.end());
      have_header = true;
      continue;
    }
    check(fields.size() == m.classifiers.size() + 1, "stats: ", path, ": row ", row,
          " has ", fields.size() - 1, " values, expected ", m.classifiers.size());
    check(!fields[0].empty(), "stats: ", path, ": row ", row, ": empty dataset name");
    m.datasets.push_back(fields[0]);
    std::vector<double> vals;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      double v = 0.0;
      const char* first = fields[f].data();
      const char* last = first + fields[f].size();
      auto [end, ec] = std::from_chars(first, last, v);
      check(ec == std::errc() && end == last && !fields[f].empty(), "stats: ", path,
            ": row ", row, ", column ", f + 1, ": cannot parse \"", fields[f], "\"");
      vals.push_back(v);
    }
    m.values.push_back(std::move(vals));
  }
  check(have_header, "stats: ", path, ": empty file");
  validate(m);
  return m;
}

void save_accuracy_csv(const AccuracyMatrix& m, const std::string& path) {
  validate(m);
  for (const auto& name : m.classifiers)
    check(name.find(',') == std::string::npos, "stats: classifier name \"", name,
          "\" contains a comma");
  for (const auto& name : m.datasets)
    check(name.find(',') == std::string::npos, "stats: dataset name \"", name,
          "\" contains a comma");
  std::ofstream out(path);
  check(out.good(), "stats: cannot write \"", path, "\"");
  out << "dataset";
  for (const auto& name : m.classifiers) out << ',' << name;
  out << '\n';
  for (std::size_t d = 0; d < m.datasets.size(); ++d) {
    out << m.datasets[d];
    for (double v : m.values[d]) out << ',' << format_number(v);
    out << '\n';
  }
  check(out.good(), "stats: write to \"", path, "\" failed");
}

std::vector<double> average_ranks(const AccuracyMatrix& m) {
  validate(m);
  const std::size_t k = m.classifiers.size();
  std::vector<double> sums(k, 0.0);
  for (const auto& row : m.values) {
    const auto ranks = rank_descending(row);
    for (std::size_t c = 0; c < k; ++c) sums[c] += ranks[c];
  }
  for (double& s : sums) s /= static_cast<double>(m.values.size());
  return sums;
}

double chi2_sf(double x, int dof) {
  check(dof >= 1, "stats: chi-square needs dof >= 1, got ", dof);
  check(std::isfinite(x) && x >= 0.0, "stats: chi-square statistic must be >= 0");
  if (x == 0.0) return 1.0;
  double q;
  int nu;
  if (dof % 2 == 1) {
    q = std::erfc(std::sqrt(0.5 * x));
    nu = 1;
  } else {
    q = std::exp(-0.5 * x);
    nu = 2;
  }
  // Q(x, nu+2) = Q(x, nu) + (x/2)^{nu/2} e^{-x/2} / (nu/2)!
  while (nu + 2 <= dof) {
    q += std::exp(0.5 * nu * std::log(0.5 * x) - 0.5 * x - std::lgamma(0.5 * nu + 1.0));
    nu += 2;
  }
  return std::min(1.0, q);
}

FriedmanResult friedman_test(const AccuracyMatrix& m) {
  validate(m);
  const int k = static_cast<int>(m.classifiers.size());
  check(k >= 3, "stats: the Friedman test needs at least 3 classifiers, got ", k,
        "; compare 2 classifiers with the signed-rank test");
  const int n = static_cast<int>(m.values.size());
  std::vector<double> rank_sums(k, 0.0);
  double ties = 0.0;
  for (const auto& row : m.values) {
    const auto ranks = rank_descending(row);
    for (int c = 0; c < k; ++c) rank_sums[c] += ranks[c];
    ties += tie_term(row);
  }
  double sum_sq = 0.0;
  for (double r : rank_sums) sum_sq += r * r;
  const double kd = k, nd = n;
  double stat = 12.0 / (nd * kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
  const double correction = 1.0 - ties / (nd * kd * (kd * kd - 1.0));
  FriedmanResult out;
  if (correction <= 0.0) return out;  // every row fully tied: no evidence
  stat /= correction;
  if (stat < 0.0) stat = 0.0;  // guard rounding on tie-free all-equal ranks
  out.statistic = stat;
  out.p_value = chi2_sf(stat, k - 1);
  return out;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b, WilcoxonMode mode) {
  check(a.size() == b.size(), "stats: signed-rank inputs differ in length (", a.size(),
        " vs ", b.size(), ")");
  check(!a.empty(), "stats: signed-rank inputs are empty");
  std::vector<double> diffs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
  const auto sr = signed_ranks(diffs);
  WilcoxonResult out;
  out.n_effective = static_cast<int>(sr.ranks.size());
  if (out.n_effective == 0) {
    out.all_zero = true;
    out.exact = true;
    return out;
  }
  out.statistic = std::min(sr.w_plus, sr.w_minus);
  const bool exact = mode == WilcoxonMode::exact ||
                     (mode == WilcoxonMode::automatic && out.n_effective <= 25);
  if (exact) {
    check(out.n_effective <= 30, "stats: exact signed-rank tail is limited to 30 pairs, got ",
          out.n_effective);
    out.exact = true;
    out.p_value = exact_two_sided_p(sr);
  } else {
    out.p_value = approx_two_sided_p(sr);
  }
  return out;
}

std::vector<bool> holm_correction(const std::vector<double>& pvalues, double alpha) {
  check(alpha > 0.0 && alpha < 1.0, "stats: alpha must be in (0,1), got ", alpha);
  const int m = static_cast<int>(pvalues.size());
  for (int i = 0; i < m; ++i)
    check(pvalues[i] >= 0.0 && pvalues[i] <= 1.0, "stats: p-value ", i + 1, " is ",
          pvalues[i], ", outside [0,1]");
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return pvalues[x] < pvalues[y]; });
  std::vector<bool> significant(m, false);
  for (int i = 0; i < m; ++i) {
    if (pvalues[order[i]] > alpha / static_cast<double>(m - i)) break;
    significant[order[i]] = true;
  }
  return significant;
}

std::vector<std::vector<int>> maximal_cliques(const std::vector<std::vector<bool>>& adjacency) {
  const int k = static_cast<int>(adjacency.size());
  check(k >= 1, "stats: clique search needs at least 1 vertex");
  check(k <= 40, "stats: clique search is limited to 40 vertices, got ", k);
  for (int i = 0; i < k; ++i) {
    check(static_cast<int>(adjacency[i].size()) == k, "stats: adjacency row ", i,
          " has ", adjacency[i].size(), " entries, expected ", k);
    for (int j = i + 1; j < k; ++j)
      check(adjacency[i][j] == adjacency[j][i], "stats: adjacency is not symmetric at (",
            i, ",", j, ")");
  }
  std::vector<std::uint64_t> adj(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j && adjacency[i][j]) adj[i] |= std::uint64_t{1} << j;

  std::vector<std::uint64_t> found;
  // Bron-Kerbosch with a max-degree pivot
  auto expand = [&](auto&& self, std::uint64_t r, std::uint64_t p, std::uint64_t x) -> void {
    if (p == 0 && x == 0) {
      found.push_back(r);
      return;
    }
    std::uint64_t px = p | x;
    int pivot = -1, best = -1;
    for (std::uint64_t s = px; s != 0; s &= s - 1) {
      const int v = std::countr_zero(s);
      const int deg = std::popcount(p & adj[v]);
      if (deg > best) best = deg, pivot = v;
    }
    for (std::uint64_t cand = p & ~adj[pivot]; cand != 0; cand &= cand - 1) {
      const int v = std::countr_zero(cand);
      const std::uint64_t bit = std::uint64_t{1} << v;
      self(self, r | bit, p & adj[v], x & adj[v]);
      p &= ~bit;
      x |= bit;
    }
  };
  const std::uint64_t all = k == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1;
  expand(expand, 0, all, 0);

  std::vector<std::vector<int>> cliques;
  for (std::uint64_t mask : found) {
    std::vector<int> c;
    for (std::uint64_t s = mask; s != 0; s &= s - 1) c.push_back(std::countr_zero(s));
    cliques.push_back(std::move(c));
  }
  std::sort(cliques.begin(), cliques.end());
  return cliques;
}

WinTieLoss win_tie_loss(const std::vector<double>& a, const std::vector<double>& b,
                        double tie_tolerance) {
  check(a.size() == b.size(), "stats: win/tie/loss inputs differ in length (", a.size(),
        " vs ", b.size(), ")");
  check(tie_tolerance >= 0.0, "stats: tie tolerance must be >= 0");
  WinTieLoss out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::fabs(a[i] - b[i]) <= tie_tolerance) ++out.ties;
    else if (a[i] > b[i]) ++out.wins;
    else ++out.losses;
  }
  return out;
}

ComparisonReport cd_report(const AccuracyMatrix& m, double alpha) {
  validate(m);
  check(alpha > 0.0 && alpha < 1.0, "stats: alpha must be in (0,1), got ", alpha);
  const int k = static_cast<int>(m.classifiers.size());
  ComparisonReport report;
  report.alpha = alpha;
  report.classifiers = m.classifiers;
  report.ranks = average_ranks(m);

  if (k >= 3) {
    const auto fr = friedman_test(m);
    report.friedman_used = true;
    report.friedman_statistic = fr.statistic;
    report.friedman_p = fr.p_value;
    if (fr.p_value >= alpha) {
      // the omnibus test found nothing; every classifier stays in one clique
      std::vector<int> all(k);
      std::iota(all.begin(), all.end(), 0);
      report.cliques.push_back(std::move(all));
      return report;
    }
  }

  report.posthoc_ran = true;
  std::vector<std::pair<int, int>> index;
  std::vector<double> pvalues;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      std::vector<double> col_a, col_b;
      for (const auto& row : m.values) {
        col_a.push_back(row[i]);
        col_b.push_back(row[j]);
      }
      PairwiseComparison pc;
      pc.a = i;
      pc.b = j;
      pc.p_value = wilcoxon_signed_rank(col_a, col_b).p_value;
      pc.record = win_tie_loss(col_a, col_b);
      report.pairs.push_back(pc);
      index.emplace_back(i, j);
      pvalues.push_back(pc.p_value);
    }
  const auto significant = holm_correction(pvalues, alpha);
  std::vector<std::vector<bool>> not_different(k, std::vector<bool>(k, true));
  for (std::size_t p = 0; p < index.size(); ++p) {
    report.pairs[p].significant = significant[p];
    if (significant[p]) {
      not_different[index[p].first][index[p].second] = false;
      not_different[index[p].second][index[p].first] = false;
    }
  }
  report.cliques = maximal_cliques(not_different);
  return report;
}

std::string report_to_json(const ComparisonReport& report) {
  json pairs = json::array();
  for (const auto& pc : report.pairs)
    pairs.push_back({{"a", pc.a},
                     {"b", pc.b},
                     {"p_value", pc.p_value},
                     {"significant", pc.significant},
                     {"wins", pc.record.wins},
                     {"ties", pc.record.ties},
                     {"losses", pc.record.losses}});
  json doc = {{"schema_version", stats_schema_version},
              {"alpha", report.alpha},
              {"classifiers", report.classifiers},
              {"ranks", report.ranks},
              {"friedman_used", report.friedman_used},
              {"friedman_statistic", report.friedman_statistic},
              {"friedman_p", report.friedman_p},
              {"posthoc_ran", report.posthoc_ran},
              {"pairs", pairs},
              {"cliques", clique_list_to_json(report.cliques)}};
  return doc.dump(2);
}

ComparisonReport report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const std::exception& e) {
    fail("stats: invalid report json: ", e.what());
  }
  check(doc.is_object() && doc.contains("schema_version"), "stats: report json has no schema_version");
  check(doc["schema_version"].is_number_integer() &&
            doc["schema_version"].get<int>() == stats_schema_version,
        "stats: unsupported report schema version");
  ComparisonReport report;
  try {
    report.alpha = doc.at("alpha").get<double>();
    report.classifiers = doc.at("classifiers").get<std::vector<std::string>>();
    report.ranks = doc.at("ranks").get<std::vector<double>>();
    report.friedman_used = doc.at("friedman_used").get<bool>();
    report.friedman_statistic = doc.at("friedman_statistic").get<double>();
    report.friedman_p = doc.at("friedman_p").get<double>();
    report.posthoc_ran = doc.at("posthoc_ran").get<bool>();
    for (const auto& item : doc.at("pairs")) {
      PairwiseComparison pc;
      pc.a = item.at("a").get<int>();
      pc.b = item.at("b").get<int>();
      pc.p_value = item.at("p_value").get<double>();
      pc.significant = item.at("significant").get<bool>();
      pc.record.wins = item.at("wins").get<int>();
      pc.record.ties = item.at("ties").get<int>();
      pc.record.losses = item.at("losses").get<int>();
      report.pairs.push_back(pc);
    }
    report.cliques = doc.at("cliques").get<std::vector<std::vector<int>>>();
  } catch (const std::exception& e) {
    fail("stats: malformed report json: ", e.what());
  }
  return report;
}

void save_report_csv(const ComparisonReport& report, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "stats: cannot write \"", path, "\"");
  out << "kind,name,value\n";
  for (std::size_t c = 0; c < report.classifiers.size(); ++c)
    out << "rank," << report.classifiers[c] << ',' << format_number(report.ranks[c]) << '\n';
  for (std::size_t q = 0; q < report.cliques.size(); ++q) {
    out << "clique," << q + 1 << ',';
    for (std::size_t i = 0; i < report.cliques[q].size(); ++i) {
      if (i) out << ' ';
      out << report.classifiers[report.cliques[q][i]];
    }
    out << '\n';
  }
  check(out.good(), "stats: write to \"", path, "\" failed");
}

}  // namespace tsinception
