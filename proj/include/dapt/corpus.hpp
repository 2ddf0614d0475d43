#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dapt {

// ---------------------------------------------------------------------------
// Classification corpus
// ---------------------------------------------------------------------------

struct LabeledDoc {
  std::string id;
  std::string text;                 // cleaned
  std::set<std::string> labels;     // may be empty only in dev/test
};

struct LabeledDocSet {
  std::vector<LabeledDoc> train, dev, test;
  std::set<std::string> label_universe;

  const std::vector<LabeledDoc>& split(const std::string& name) const;
};

// Label frequency buckets computed over the TRAIN split only.
// frequent: count > 50; few_shot: 1 <= count <= 50; zero_shot: count == 0.
// A label seen exactly 50 times lands in few_shot.
struct LabelBuckets {
  std::set<std::string> frequent, few_shot, zero_shot;
  std::map<std::string, int> counts;  // label -> number of train docs
};

// ---------------------------------------------------------------------------
// Retrieval corpus
// ---------------------------------------------------------------------------

struct Case {
  std::string id;
  std::string body;                       // concatenated case sentences
  std::vector<std::string> catchphrases;  // non-empty
};

struct CaseSet {
  std::vector<Case> train, dev, test;
};

struct CaseLoadReport {
  int files_seen = 0;
  int cases_loaded = 0;
  int skipped_no_catchphrases = 0;
  int files_unparseable = 0;
  std::vector<std::string> notes;
};

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

enum class ClassificationFormat { kCanonicalJsonl, kEurlexJsonDir };
enum class CaseFormat { kCanonicalJsonl, kAusXmlDir };

// Canonical JSONL: one object per line with id/text/labels/split.
// eurlex-json-dir: train|dev|test subdirectories of per-document JSON files.
LabeledDocSet load_classification_dataset(const std::filesystem::path& path,
                                          ClassificationFormat format);

// aus-xml-dir carries no split assignment; cases are shuffled with split_seed
// and cut into train / dev / test of sizes N-2*floor(N/10), floor(N/10),
// floor(N/10). Cases without catchphrases are skipped and counted in the
// report.
struct CaseLoadOptions {
  uint64_t split_seed = 0;
};
CaseSet load_case_dataset(const std::filesystem::path& path, CaseFormat format,
                          const CaseLoadOptions& options = {},
                          CaseLoadReport* report = nullptr);

void write_classification_jsonl(const LabeledDocSet& set,
                                const std::filesystem::path& path);
void write_case_jsonl(const CaseSet& set, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

LabelBuckets partition_labels(const LabeledDocSet& set);

// Replaces train with the first floor(ratio * N) elements of a seeded
// permutation. Slices for the same seed are nested across ratios.
LabeledDocSet subsample_train(const LabeledDocSet& set, double ratio,
                              uint64_t seed);

}  // namespace dapt
