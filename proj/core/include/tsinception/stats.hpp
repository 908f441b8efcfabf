#pragma once

#include <string>
#include <vector>

namespace tsinception {

// rows are datasets, columns are classifiers; complete and in [0,1]
struct AccuracyMatrix {
  std::vector<std::string> classifiers;
  std::vector<std::string> datasets;
  std::vector<std::vector<double>> values;  // [dataset][classifier]
};

void validate(const AccuracyMatrix& m);

// csv: header "dataset,<name>,..."; one row per dataset
AccuracyMatrix load_accuracy_csv(const std::string& path);
void save_accuracy_csv(const AccuracyMatrix& m, const std::string& path);

// per dataset, rank 1 = highest accuracy, tied cells share the mean rank;
// result is the mean rank per classifier
std::vector<double> average_ranks(const AccuracyMatrix& m);

// upper tail of the chi-square distribution at integer degrees of freedom
double chi2_sf(double x, int dof);

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// tie-corrected Friedman chi-square over the rank matrix; requires k >= 3
// (the approximation is invalid at k = 2 — compare that pair directly with
// the signed-rank test)
FriedmanResult friedman_test(const AccuracyMatrix& m);

enum class WilcoxonMode { automatic, exact, approximate };

struct WilcoxonResult {
  double p_value = 1.0;
  double statistic = 0.0;  // min(W+, W-) over the nonzero differences
  int n_effective = 0;     // pairs remaining after zero differences drop
  bool exact = false;
  bool all_zero = false;
};

// two-sided signed-rank test; zero differences are dropped, tied absolute
// differences share mean ranks; exact tail by convolution when n <= 25,
// normal approximation with tie and continuity correction beyond
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b,
                                    WilcoxonMode mode = WilcoxonMode::automatic);

// step-down correction: with p sorted ascending, p_(i) is significant iff
// p_(j) <= alpha/(m-j+1) for every j <= i; decisions return in input order
std::vector<bool> holm_correction(const std::vector<double>& pvalues, double alpha = 0.05);

// maximal cliques of the symmetric adjacency matrix, each sorted, the list
// ordered lexicographically; every vertex appears in at least one clique
std::vector<std::vector<int>> maximal_cliques(const std::vector<std::vector<bool>>& adjacency);

struct WinTieLoss {
  int wins = 0;
  int ties = 0;
  int losses = 0;
};

WinTieLoss win_tie_loss(const std::vector<double>& a, const std::vector<double>& b,
                        double tie_tolerance = 0.0);

struct PairwiseComparison {
  int a = 0;  // classifier indices into the report's classifier list
  int b = 0;
  double p_value = 1.0;
  bool significant = false;
  WinTieLoss record;
};

struct ComparisonReport {
  double alpha = 0.05;
  std::vector<std::string> classifiers;
  std::vector<double> ranks;
  bool friedman_used = false;  // false when k = 2 (direct pairwise path)
  double friedman_statistic = 0.0;
  double friedman_p = 1.0;
  bool posthoc_ran = false;  // false when the Friedman gate found nothing
  std::vector<PairwiseComparison> pairs;
  std::vector<std::vector<int>> cliques;
};

// the full protocol: Friedman gate at alpha, then pairwise signed-rank tests
// with the step-down correction, average ranks, and maximal cliques of the
// not-significantly-different graph
ComparisonReport cd_report(const AccuracyMatrix& m, double alpha = 0.05);

std::string report_to_json(const ComparisonReport& report);
ComparisonReport report_from_json(const std::string& text);

// two sections keyed by the first column: "rank,<classifier>,<value>" rows
// followed by "clique,<index>,<space-joined members>" rows
void save_report_csv(const ComparisonReport& report, const std::string& path);

}  // namespace tsinception
