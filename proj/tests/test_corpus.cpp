#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>

#include "dapt/corpus.hpp"
#include "dapt/rng.hpp"
#include "dapt/text.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace dapt;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("clean_text collapses whitespace and strips controls") {
  CHECK(clean_text("A\t\tB\n") == "A B");
  CHECK(clean_text("x") == "x");
  CHECK(clean_text("\x01\x02\x07") == "");
  CHECK(clean_text("") == "");
  CHECK(clean_text("  leading and trailing \t ") == "leading and trailing");
  CHECK(clean_text("a\r\nb") == "a b");
  // embedded non-whitespace control is dropped without a separator
  CHECK(clean_text("a\x01"
                   "b") == "ab");
  // NFC: decomposed e + combining acute composes to a single code point
  CHECK(clean_text("Cafe\x65\xcc\x81") == "Cafe\xc3\xa9");
}

TEST_CASE("clean_text is idempotent") {
  const char* samples[] = {"A\t\tB\n", "  x  y  z ", "", "\x01",
                           "mixed \xc3\xa9 unicode space"};
  for (const char* s : samples) {
    const std::string once = clean_text(s);
    CHECK(clean_text(once) == once);
  }
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const int len = static_cast<int>(rng.below(40));
    for (int i = 0; i < len; ++i)
      s += static_cast<char>(1 + rng.below(126));  // ascii incl. controls
    const std::string once = clean_text(s);
    CHECK(clean_text(once) == once);
  }
}

namespace {

std::string three_doc_jsonl() {
  return
      R"({"id":"a","text":"alpha doc","labels":["L1","L2"],"split":"train"})"
      "\n"
      R"({"id":"b","text":"beta  doc","labels":["L1"],"split":"dev"})"
      "\n"
      R"({"id":"c","text":"gamma doc","labels":[],"split":"test"})"
      "\n";
}

}  // namespace

TEST_CASE("canonical jsonl loads three docs with cleaned text") {
  TempDir dir("corpus");
  const auto path = dir.path / "docs.jsonl";
  write_file(path, three_doc_jsonl());
  const LabeledDocSet set =
      load_classification_dataset(path, ClassificationFormat::kCanonicalJsonl);
  REQUIRE(set.train.size() == 1);
  REQUIRE(set.dev.size() == 1);
  REQUIRE(set.test.size() == 1);
  CHECK(set.train[0].labels == std::set<std::string>{"L1", "L2"});
  CHECK(set.dev[0].text == "beta doc");  // whitespace collapsed
  CHECK(set.label_universe == std::set<std::string>{"L1", "L2"});
  CHECK(set.test[0].labels.empty());  // empty labels allowed outside train
}

TEST_CASE("jsonl loader errors carry the line number") {
  TempDir dir("corpus");
  const auto path = dir.path / "bad.jsonl";
  write_file(path,
             R"({"id":"a","text":"x","labels":["L"],"split":"train"})"
             "\n"
             R"({"id":"b","text":"y","split":"dev"})"
             "\n");
  try {
    load_classification_dataset(path, ClassificationFormat::kCanonicalJsonl);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("labels") != std::string::npos);
  }
}

TEST_CASE("duplicate ids are rejected") {
  TempDir dir("corpus");
  const auto path = dir.path / "dup.jsonl";
  write_file(path,
             R"({"id":"a","text":"x","labels":["L"],"split":"train"})"
             "\n"
             R"({"id":"a","text":"y","labels":["L"],"split":"dev"})"
             "\n");
  CHECK_THROWS_WITH_AS(
      load_classification_dataset(path, ClassificationFormat::kCanonicalJsonl),
      doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("classification jsonl round-trips") {
  TempDir dir("corpus");
  const auto path = dir.path / "docs.jsonl";
  write_file(path, three_doc_jsonl());
  const LabeledDocSet set =
      load_classification_dataset(path, ClassificationFormat::kCanonicalJsonl);
  const auto out = dir.path / "copy.jsonl";
  write_classification_jsonl(set, out);
  const LabeledDocSet again =
      load_classification_dataset(out, ClassificationFormat::kCanonicalJsonl);
  REQUIRE(again.train.size() == set.train.size());
  CHECK(again.train[0].id == set.train[0].id);
  CHECK(again.train[0].text == set.train[0].text);
  CHECK(again.train[0].labels == set.train[0].labels);
  CHECK(again.label_universe == set.label_universe);
}

TEST_CASE("eurlex-style directory maps to canonical form") {
  TempDir dir("eurlex");
  for (const char* split : {"train", "dev", "test"})
    std::filesystem::create_directories(dir.path / split);
  write_file(dir.path / "train" / "doc1.json",
             R"({"celex_id":"d1","concepts":["10","20"],"title":"T one",)"
             R"("main_body":["body a","body b"]})");
  write_file(dir.path / "train" / "doc2.json",
             R"({"celex_id":"d2","concepts":["10"],"title":"T two",)"
             R"("main_body":["body"]})");
  write_file(dir.path / "dev" / "doc3.json",
             R"({"celex_id":"d3","concepts":["20"],"title":"T three",)"
             R"("main_body":["body"]})");
  write_file(dir.path / "test" / "doc4.json",
             R"({"celex_id":"d4","concepts":["30"],"title":"T four",)"
             R"("main_body":["body"]})");
  const LabeledDocSet set =
      load_classification_dataset(dir.path, ClassificationFormat::kEurlexJsonDir);
  CHECK(set.train.size() == 2);
  CHECK(set.dev.size() == 1);
  CHECK(set.test.size() == 1);
  CHECK(set.train[0].id == "d1");
  CHECK(set.train[0].text == "T one body a body b");
  CHECK(set.label_universe == std::set<std::string>{"10", "20", "30"});
}

TEST_CASE("aus xml fixture: two cases, catchphrase counts preserved") {
  TempDir dir("aus");
  write_file(dir.path / "case1.xml",
             "<case><name>c1</name><catchphrases>"
             "<catchphrase id=\"c0\">first phrase</catchphrase>"
             "<catchphrase id=\"c1\">second &amp; third</catchphrase>"
             "</catchphrases><sentences>"
             "<sentence id=\"s0\">Sentence one.</sentence>"
             "<sentence id=\"s1\">Sentence two.</sentence>"
             "</sentences></case>");
  write_file(dir.path / "case2.xml",
             "<case><catchphrases>"
             "<catchphrase>alpha</catchphrase><catchphrase>beta</catchphrase>"
             "<catchphrase>gamma</catchphrase>"
             "</catchphrases><sentences>"
             "<sentence>Only sentence.</sentence>"
             "</sentences></case>");
  CaseLoadReport report;
  const CaseSet set =
      load_case_dataset(dir.path, CaseFormat::kAusXmlDir, {}, &report);
  const size_t total = set.train.size() + set.dev.size() + set.test.size();
  CHECK(total == 2);
  CHECK(report.cases_loaded == 2);
  CHECK(report.skipped_no_catchphrases == 0);
  std::vector<Case> all;
  for (const auto* v : {&set.train, &set.dev, &set.test})
    all.insert(all.end(), v->begin(), v->end());
  std::sort(all.begin(), all.end(),
            [](const Case& a, const Case& b) { return a.id < b.id; });
  REQUIRE(all.size() == 2);
  CHECK(all[0].catchphrases.size() == 2);
  CHECK(all[0].catchphrases[1] == "second & third");
  CHECK(all[0].body == "Sentence one. Sentence two.");
  CHECK(all[1].catchphrases.size() == 3);
}

TEST_CASE("aus loader skips cases without catchphrases and reports them") {
  TempDir dir("aus");
  write_file(dir.path / "annotated.xml",
             "<case><catchphrases><catchphrase>x</catchphrase></catchphrases>"
             "<sentences><sentence>Body.</sentence></sentences></case>");
  write_file(dir.path / "bare.xml",
             "<case><sentences><sentence>No annotation.</sentence></sentences>"
             "</case>");
  CaseLoadReport report;
  const CaseSet set =
      load_case_dataset(dir.path, CaseFormat::kAusXmlDir, {}, &report);
  CHECK(set.train.size() + set.dev.size() + set.test.size() == 1);
  CHECK(report.skipped_no_catchphrases == 1);
}

TEST_CASE("malformed xml errors name the file when nothing parses") {
  TempDir dir("aus");
  write_file(dir.path / "broken.xml", "not xml at all");
  try {
    load_case_dataset(dir.path, CaseFormat::kAusXmlDir);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("broken.xml") != std::string::npos);
  }
}

TEST_CASE("partition_labels honors the 50-count boundary") {
  LabeledDocSet set;
  auto doc = [](std::string id, std::set<std::string> labels) {
    return LabeledDoc{std::move(id), "text", std::move(labels)};
  };
  for (int i = 0; i < 100; ++i)
    set.train.push_back(doc("a" + std::to_string(i), {"A"}));
  for (int i = 0; i < 3; ++i)
    set.train.push_back(doc("b" + std::to_string(i), {"B"}));
  set.dev.push_back(doc("c0", {"C"}));
  set.label_universe = {"A", "B", "C"};
  const LabelBuckets buckets = partition_labels(set);
  CHECK(buckets.frequent == std::set<std::string>{"A"});
  CHECK(buckets.few_shot == std::set<std::string>{"B"});
  CHECK(buckets.zero_shot == std::set<std::string>{"C"});
  CHECK(buckets.counts.at("A") == 100);
  CHECK(buckets.counts.at("C") == 0);

  LabeledDocSet boundary;
  for (int i = 0; i < 50; ++i)
    boundary.train.push_back(doc("d" + std::to_string(i), {"D"}));
  boundary.label_universe = {"D"};
  const LabelBuckets b2 = partition_labels(boundary);
  CHECK(b2.few_shot.count("D") == 1);  // exactly 50 lands in few-shot
  CHECK(b2.frequent.empty());
}

TEST_CASE("partition_labels is a disjoint cover of the universe") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    LabeledDocSet set;
    const int n_labels = 1 + static_cast<int>(rng.below(12));
    const int n_docs = static_cast<int>(rng.below(140));
    for (int l = 0; l < n_labels; ++l)
      set.label_universe.insert("L" + std::to_string(l));
    for (int d = 0; d < n_docs; ++d) {
      LabeledDoc doc{"d" + std::to_string(d), "x", {}};
      const int picks = 1 + static_cast<int>(rng.below(3));
      for (int p = 0; p < picks; ++p)
        doc.labels.insert("L" + std::to_string(rng.below(n_labels)));
      set.train.push_back(std::move(doc));
    }
    const LabelBuckets b = partition_labels(set);
    std::set<std::string> unioned;
    unioned.insert(b.frequent.begin(), b.frequent.end());
    unioned.insert(b.few_shot.begin(), b.few_shot.end());
    unioned.insert(b.zero_shot.begin(), b.zero_shot.end());
    CHECK(unioned == set.label_universe);
    CHECK(b.frequent.size() + b.few_shot.size() + b.zero_shot.size() ==
          set.label_universe.size());
    for (const auto& [label, count] : b.counts) {
      if (count > 50) CHECK(b.frequent.count(label) == 1);
      else if (count >= 1) CHECK(b.few_shot.count(label) == 1);
      else CHECK(b.zero_shot.count(label) == 1);
    }
  }
}

TEST_CASE("subsample_train sizes, determinism and nesting") {
  LabeledDocSet set;
  for (int i = 0; i < 45000; ++i)
    set.train.push_back({"d" + std::to_string(i), "x", {"L"}});
  set.label_universe = {"L"};

  const LabeledDocSet ten = subsample_train(set, 0.10, 3);
  CHECK(ten.train.size() == 4500);

  const LabeledDocSet again = subsample_train(set, 0.10, 3);
  for (size_t i = 0; i < ten.train.size(); ++i)
    REQUIRE(ten.train[i].id == again.train[i].id);

  const LabeledDocSet full = subsample_train(set, 1.0, 3);
  CHECK(full.train.size() == set.train.size());
  std::set<std::string> orig_ids, full_ids;
  for (const auto& d : set.train) orig_ids.insert(d.id);
  for (const auto& d : full.train) full_ids.insert(d.id);
  CHECK(orig_ids == full_ids);

  // nesting across the published ratio grid
  const double ratios[] = {0.01, 0.05, 0.10, 0.20, 1.0};
  std::vector<std::set<std::string>> slices;
  for (const double r : ratios) {
    const LabeledDocSet s = subsample_train(set, r, 3);
    CHECK(s.train.size() ==
          static_cast<size_t>(std::floor(r * set.train.size())));
    std::set<std::string> ids;
    for (const auto& d : s.train) ids.insert(d.id);
    slices.push_back(std::move(ids));
  }
  for (size_t i = 0; i + 1 < slices.size(); ++i)
    CHECK(std::includes(slices[i + 1].begin(), slices[i + 1].end(),
                        slices[i].begin(), slices[i].end()));

  CHECK_THROWS_AS(subsample_train(set, 0.0, 3), std::runtime_error);
  CHECK_THROWS_AS(subsample_train(set, 1.2, 3), std::runtime_error);
}

TEST_CASE("eurlex57k integration") {
  const auto root = testutil::dataset_dir("eurlex57k");
  if (!std::filesystem::is_directory(root)) {
    MESSAGE("dataset absent, skipping: ", root.string());
    return;
  }
  const LabeledDocSet set =
      load_classification_dataset(root, ClassificationFormat::kEurlexJsonDir);
  CHECK(set.train.size() == 45000);
  CHECK(set.dev.size() == 6000);
  CHECK(set.test.size() == 6000);
  const LabelBuckets buckets = partition_labels(set);
  CHECK(buckets.frequent.size() == 746);
  CHECK(buckets.few_shot.size() == 3362);
  CHECK(buckets.zero_shot.size() == 163);
}

TEST_CASE("aus corpus integration") {
  const auto root = testutil::dataset_dir("aus_cases");
  if (!std::filesystem::is_directory(root)) {
    MESSAGE("dataset absent, skipping: ", root.string());
    return;
  }
  CaseLoadReport report;
  const CaseSet set =
      load_case_dataset(root, CaseFormat::kAusXmlDir, {0}, &report);
  CHECK(set.train.size() == 2807);
  CHECK(set.dev.size() == 350);
  CHECK(set.test.size() == 350);
}
