#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dapt {

// One ranked retrieval/classification instance: candidate ids in descending
// score order plus the set of relevant ids.
struct RankedPrediction {
  std::vector<int> ranked;
  std::set<int> gold;
};

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged precision/recall/F1 over all (doc, label) decisions.
// Empty denominators yield 0.
Prf1 prf1_micro(const std::vector<std::set<int>>& predicted,
                const std::vector<std::set<int>>& gold);

// R@K = |gold in top-K| / |gold|; error on empty gold.
double recall_at_k(const RankedPrediction& r, int k);
// P@K = |gold in top-K| / K; defined for empty gold too.
double precision_at_k(const RankedPrediction& r, int k);
// RP@K = |gold in top-K| / min(K, |gold|); error on empty gold.
double r_precision_at_k(const RankedPrediction& r, int k);
// Binary-gain nDCG@K; error on empty gold.
double ndcg_at_k(const RankedPrediction& r, int k);

// Retrieval summary over per-case best-gold ranks (all >= 1). R@K values are
// percentages; the median of an even-length list is the lower-middle element.
struct RankStats {
  double r_at_1 = 0.0, r_at_5 = 0.0, r_at_10 = 0.0;
  double med_rank = 0.0, mean_rank = 0.0;
  int cases = 0;
};
RankStats rank_stats(const std::vector<int>& best_gold_ranks);

// Table-3-style classification row: micro P/R/F1 at a decision threshold
// plus mean @5 ranking metrics. Documents with empty gold are excluded from
// R@K / RP@K / nDCG@K (undefined there) and included in P@K; the exclusion
// count is reported.
struct ClassificationMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double r_at_5 = 0.0, p_at_5 = 0.0, rp_at_5 = 0.0, ndcg_at_5 = 0.0;
  int docs = 0;
  int empty_gold_excluded = 0;
};

ClassificationMetrics classification_metrics(
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::set<int>>& gold, double threshold = 0.5, int k = 5);

// ---------------------------------------------------------------------------
// Improvement arithmetic (Table-5 layout)
// ---------------------------------------------------------------------------

inline constexpr int kClassificationMetricCount = 7;
extern const char* const kClassificationMetricNames[kClassificationMetricCount];

// The seven Table-3 columns as an array, in printed order.
std::array<double, 7> classification_metric_values(const ClassificationMetrics& m);

struct ImprovementRow {
  double ratio = 1.0;
  long long n_train = 0;
  std::array<double, 7> baseline{};
  std::array<double, 7> adapted{};
  std::array<double, 7> abs_diff{};
  // nullopt renders as an em dash: baseline 0 with a nonzero diff.
  std::array<std::optional<double>, 7> rel_pct{};
};

struct ImprovementTable {
  std::vector<ImprovementRow> rows;
};

struct MetricsRatioRow {
  double ratio = 1.0;
  long long n_train = 0;
  std::array<double, 7> metrics{};
};

// Rows must be aligned by ratio; relative% = 100 * diff / baseline, 0 when
// both are 0 and undefined when only the baseline is 0.
ImprovementTable improvement_table(const std::vector<MetricsRatioRow>& baseline,
                                   const std::vector<MetricsRatioRow>& adapted);

// ---------------------------------------------------------------------------
// Prediction files
// ---------------------------------------------------------------------------

struct NamedPrediction {
  std::string id;
  std::vector<std::string> ranked;
  std::vector<std::string> gold;
};

void write_prediction_file(const std::vector<NamedPrediction>& predictions,
                           const std::filesystem::path& path);
std::vector<NamedPrediction> load_prediction_file(
    const std::filesystem::path& path);

}  // namespace dapt
