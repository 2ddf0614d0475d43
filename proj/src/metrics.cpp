#include "dapt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "dapt/common.hpp"
#include "json.hpp"

namespace dapt {

Prf1 prf1_micro(const std::vector<std::set<int>>& predicted,
                const std::vector<std::set<int>>& gold) {
  require(predicted.size() == gold.size(),
          "predicted/gold document count mismatch");
  long long tp = 0, fp = 0, fn = 0;
  for (size_t d = 0; d < predicted.size(); ++d) {
    for (const int label : predicted[d]) {
      if (gold[d].count(label)) ++tp;
      else ++fp;
    }
    for (const int label : gold[d])
      if (!predicted[d].count(label)) ++fn;
  }
  Prf1 out;
  out.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
  out.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  out.f1 = out.precision + out.recall == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

namespace {

void validate_ranked(const RankedPrediction& r) {
  std::unordered_set<int> seen;
  for (const int c : r.ranked)
    require(seen.insert(c).second, "duplicate candidate ", c, " in ranking");
}

int hits_in_top_k(const RankedPrediction& r, int k) {
  const int top = std::min<int>(k, static_cast<int>(r.ranked.size()));
  int hits = 0;
  for (int i = 0; i < top; ++i) hits += r.gold.count(r.ranked[i]) ? 1 : 0;
  return hits;
}

}  // namespace

double recall_at_k(const RankedPrediction& r, int k) {
  require(k >= 1, "k must be >= 1");
  require(!r.gold.empty(), "recall@k undefined for empty gold");
  validate_ranked(r);
  return static_cast<double>(hits_in_top_k(r, k)) /
         static_cast<double>(r.gold.size());
}

double precision_at_k(const RankedPrediction& r, int k) {
  require(k >= 1, "k must be >= 1");
  validate_ranked(r);
  return static_cast<double>(hits_in_top_k(r, k)) / static_cast<double>(k);
}

double r_precision_at_k(const RankedPrediction& r, int k) {
  require(k >= 1, "k must be >= 1");
  require(!r.gold.empty(), "r-precision@k undefined for empty gold");
  validate_ranked(r);
  return static_cast<double>(hits_in_top_k(r, k)) /
         static_cast<double>(std::min<size_t>(k, r.gold.size()));
}

double ndcg_at_k(const RankedPrediction& r, int k) {
  require(k >= 1, "k must be >= 1");
  require(!r.gold.empty(), "ndcg@k undefined for empty gold");
  validate_ranked(r);
  const int top = std::min<int>(k, static_cast<int>(r.ranked.size()));
  double dcg = 0.0;
  for (int i = 0; i < top; ++i)
    if (r.gold.count(r.ranked[i])) dcg += 1.0 / std::log2(i + 2.0);
  const int ideal = std::min<int>(k, static_cast<int>(r.gold.size()));
  double idcg = 0.0;
  for (int i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(i + 2.0);
  return dcg / idcg;
}

RankStats rank_stats(const std::vector<int>& best_gold_ranks) {
  require(!best_gold_ranks.empty(), "rank_stats over an empty list");
  RankStats out;
  out.cases = static_cast<int>(best_gold_ranks.size());
  long long sum = 0;
  int le1 = 0, le5 = 0, le10 = 0;
  for (const int rank : best_gold_ranks) {
    require(rank >= 1, "ranks start at 1, got ", rank);
    sum += rank;
    le1 += rank <= 1;
    le5 += rank <= 5;
    le10 += rank <= 10;
  }
  const double n = static_cast<double>(out.cases);
  out.r_at_1 = 100.0 * le1 / n;
  out.r_at_5 = 100.0 * le5 / n;
  out.r_at_10 = 100.0 * le10 / n;
  out.mean_rank = static_cast<double>(sum) / n;
  std::vector<int> sorted = best_gold_ranks;
  std::sort(sorted.begin(), sorted.end());
  out.med_rank = sorted[(sorted.size() - 1) / 2];  // lower-middle for even n
  return out;
}

ClassificationMetrics classification_metrics(
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::set<int>>& gold, double threshold, int k) {
  require(scores.size() == gold.size(), "scores/gold document count mismatch");
  require(!scores.empty(), "no documents to evaluate");

  ClassificationMetrics out;
  out.docs = static_cast<int>(scores.size());

  std::vector<std::set<int>> predicted(scores.size());
  double sum_r = 0, sum_p = 0, sum_rp = 0, sum_ndcg = 0;
  int with_gold = 0;
  for (size_t d = 0; d < scores.size(); ++d) {
    const std::vector<double>& s = scores[d];
    for (size_t l = 0; l < s.size(); ++l)
      if (s[l] > threshold) predicted[d].insert(static_cast<int>(l));

    RankedPrediction ranked;
    ranked.gold = gold[d];
    ranked.ranked.resize(s.size());
    for (size_t l = 0; l < s.size(); ++l) ranked.ranked[l] = static_cast<int>(l);
    // descending score, index as the deterministic tie-break
    std::stable_sort(ranked.ranked.begin(), ranked.ranked.end(),
                     [&s](int a, int b) { return s[a] > s[b]; });
    sum_p += precision_at_k(ranked, k);
    if (gold[d].empty()) {
      ++out.empty_gold_excluded;
    } else {
      sum_r += recall_at_k(ranked, k);
      sum_rp += r_precision_at_k(ranked, k);
      sum_ndcg += ndcg_at_k(ranked, k);
      ++with_gold;
    }
  }
  const Prf1 prf = prf1_micro(predicted, gold);
  out.precision = prf.precision;
  out.recall = prf.recall;
  out.f1 = prf.f1;
  out.p_at_5 = sum_p / static_cast<double>(scores.size());
  out.r_at_5 = with_gold ? sum_r / with_gold : 0.0;
  out.rp_at_5 = with_gold ? sum_rp / with_gold : 0.0;
  out.ndcg_at_5 = with_gold ? sum_ndcg / with_gold : 0.0;
  return out;
}

const char* const kClassificationMetricNames[kClassificationMetricCount] = {
    "Precision", "Recall", "F1", "R@5", "P@5", "RP@5", "NDCG@5"};

std::array<double, 7> classification_metric_values(const ClassificationMetrics& m) {
  return {m.precision, m.recall, m.f1, m.r_at_5, m.p_at_5, m.rp_at_5, m.ndcg_at_5};
}

ImprovementTable improvement_table(const std::vector<MetricsRatioRow>& baseline,
                                   const std::vector<MetricsRatioRow>& adapted) {
  require(baseline.size() == adapted.size(),
          "baseline/adapted row count mismatch");
  ImprovementTable table;
  for (size_t i = 0; i < baseline.size(); ++i) {
    require(baseline[i].ratio == adapted[i].ratio,
            "misaligned improvement rows: ratio ", baseline[i].ratio, " vs ",
            adapted[i].ratio);
    ImprovementRow row;
    row.ratio = baseline[i].ratio;
    row.n_train = baseline[i].n_train;
    row.baseline = baseline[i].metrics;
    row.adapted = adapted[i].metrics;
    for (int m = 0; m < kClassificationMetricCount; ++m) {
      const double b = row.baseline[static_cast<size_t>(m)];
      const double d = row.adapted[static_cast<size_t>(m)] - b;
      row.abs_diff[static_cast<size_t>(m)] = d;
      if (b == 0.0)
        row.rel_pct[static_cast<size_t>(m)] =
            d == 0.0 ? std::optional<double>(0.0) : std::nullopt;
      else
        row.rel_pct[static_cast<size_t>(m)] = 100.0 * d / b;
    }
    table.rows.push_back(row);
  }
  return table;
}

void write_prediction_file(const std::vector<NamedPrediction>& predictions,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path.string());
  for (const NamedPrediction& p : predictions) {
    nlohmann::json rec;
    rec["id"] = p.id;
    rec["ranked"] = p.ranked;
    rec["gold"] = p.gold;
    out << rec.dump() << '\n';
  }
}

std::vector<NamedPrediction> load_prediction_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path.string());
  std::vector<NamedPrediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      fail(path.string(), " line ", line_no, ": malformed JSON (", e.what(), ")");
    }
    NamedPrediction p;
    p.id = rec.at("id").get<std::string>();
    p.ranked = rec.at("ranked").get<std::vector<std::string>>();
    p.gold = rec.at("gold").get<std::vector<std::string>>();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace dapt
