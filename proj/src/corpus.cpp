#include "dapt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "dapt/common.hpp"
#include "dapt/rng.hpp"
#include "dapt/text.hpp"
#include "json.hpp"

namespace dapt {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<LabeledDoc>& LabeledDocSet::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  fail("unknown split: ", name);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open ", path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

void validate_doc_set(LabeledDocSet& set) {
  std::unordered_set<std::string> seen;
  auto check_split = [&](const std::vector<LabeledDoc>& docs, const char* name,
                         bool labels_required) {
    for (const LabeledDoc& d : docs) {
      require(!d.id.empty(), "document with empty id in split ", name);
      require(seen.insert(d.id).second, "duplicate document id '", d.id, "'");
      require(!d.text.empty(), "document '", d.id, "' has empty text after cleaning");
      if (labels_required)
        require(!d.labels.empty(), "train document '", d.id, "' has no labels");
      for (const std::string& l : d.labels) set.label_universe.insert(l);
    }
  };
  set.label_universe.clear();
  check_split(set.train, "train", true);
  check_split(set.dev, "dev", false);
  check_split(set.test, "test", false);
}

LabeledDocSet load_classification_jsonl(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path.string());
  LabeledDocSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const std::exception& e) {
      fail(path.string(), " line ", line_no, ": malformed JSON (", e.what(), ")");
    }
    for (const char* key : {"id", "text", "labels", "split"})
      require(rec.contains(key), path.string(), " line ", line_no,
              ": missing key '", key, "'");
    LabeledDoc doc;
    doc.id = rec.at("id").get<std::string>();
    doc.text = clean_text(rec.at("text").get<std::string>());
    for (const auto& l : rec.at("labels"))
      doc.labels.insert(l.get<std::string>());
    const std::string split = rec.at("split").get<std::string>();
    if (split == "train")
      set.train.push_back(std::move(doc));
    else if (split == "dev")
      set.dev.push_back(std::move(doc));
    else if (split == "test")
      set.test.push_back(std::move(doc));
    else
      fail(path.string(), " line ", line_no, ": unknown split '", split, "'");
  }
  validate_doc_set(set);
  return set;
}

// Best-effort mapper for the EURLEX57K release layout: per-document JSON
// files under train/ dev/ test/. Text is the concatenation of whichever of
// title/header/recitals/main_body/attachments are present.
LabeledDocSet load_eurlex_dir(const fs::path& root) {
  require(fs::is_directory(root), root.string(), " is not a directory");
  LabeledDocSet set;
  for (const char* split : {"train", "dev", "test"}) {
    const fs::path dir = root / split;
    require(fs::is_directory(dir), "missing split directory ", dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".json")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    auto& docs = split == std::string("train")  ? set.train
                 : split == std::string("dev") ? set.dev
                                               : set.test;
    for (const fs::path& file : files) {
      json rec;
      try {
        rec = json::parse(read_file(file));
      } catch (const std::exception& e) {
        fail(file.string(), ": malformed JSON (", e.what(), ")");
      }
      LabeledDoc doc;
      if (rec.contains("celex_id"))
        doc.id = rec.at("celex_id").get<std::string>();
      else if (rec.contains("id"))
        doc.id = rec.at("id").get<std::string>();
      else
        doc.id = file.stem().string();

      std::string text;
      auto append = [&text](const json& part) {
        if (part.is_string()) {
          if (!text.empty()) text += ' ';
          text += part.get<std::string>();
        } else if (part.is_array()) {
          for (const auto& item : part)
            if (item.is_string()) {
              if (!text.empty()) text += ' ';
              text += item.get<std::string>();
            }
        }
      };
      if (rec.contains("text")) append(rec.at("text"));
      for (const char* key : {"title", "header", "recitals", "main_body", "attachments"})
        if (rec.contains(key)) append(rec.at(key));
      doc.text = clean_text(text);

      const char* label_key = rec.contains("concepts") ? "concepts" : "labels";
      require(rec.contains(label_key), file.string(), ": no 'concepts' or 'labels' field");
      for (const auto& l : rec.at(label_key)) {
        if (l.is_string())
          doc.labels.insert(l.get<std::string>());
        else
          doc.labels.insert(l.dump());
      }
      docs.push_back(std::move(doc));
    }
    std::sort(docs.begin(), docs.end(),
              [](const LabeledDoc& a, const LabeledDoc& b) { return a.id < b.id; });
  }
  validate_doc_set(set);
  return set;
}

// --- tolerant element scanner for the AUS case XML files -------------------
//
// The raw corpus is known to contain stray ampersands and unterminated tags,
// so this is a scanning extractor rather than a conforming XML parser: it
// pulls the text content of every <sentence> and <catchphrase> element and
// ignores everything else.

std::string unescape_entities(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out += s[i++];
      continue;
    }
    const size_t semi = s.find(';', i);
    if (semi == std::string::npos || semi - i > 10) {
      out += s[i++];
      continue;
    }
    const std::string ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else if (ent.size() > 1 && ent[0] == '#') {
      long cp = 0;
      try {
        cp = (ent[1] == 'x' || ent[1] == 'X') ? std::stol(ent.substr(2), nullptr, 16)
                                              : std::stol(ent.substr(1));
      } catch (const std::exception&) {
        out += s.substr(i, semi - i + 1);
        i = semi + 1;
        continue;
      }
      // encode code point as UTF-8
      if (cp < 0x80) out += static_cast<char>(cp);
      else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
      }
    } else {
      out += s.substr(i, semi - i + 1);
    }
    i = semi + 1;
  }
  return out;
}

// Collects the inner text of every <tag ...>...</tag> occurrence.
std::vector<std::string> extract_elements(const std::string& xml,
                                          const std::string& tag) {
  std::vector<std::string> out;
  const std::string open = "<" + tag;
  const std::string close = "</" + tag + ">";
  size_t pos = 0;
  while (true) {
    const size_t start = xml.find(open, pos);
    if (start == std::string::npos) break;
    const size_t content = xml.find('>', start);
    if (content == std::string::npos) break;
    // reject matches like <sentences> when looking for <sentence>
    const char after = xml[start + open.size()];
    if (after != '>' && after != ' ' && after != '\t' && after != '\n' &&
        after != '\r' && after != '/') {
      pos = start + open.size();
      continue;
    }
    if (content > start && xml[content - 1] == '/') {  // self-closing, no text
      pos = content + 1;
      continue;
    }
    const size_t end = xml.find(close, content);
    if (end == std::string::npos) break;
    std::string inner = xml.substr(content + 1, end - content - 1);
    // drop any nested markup
    std::string stripped;
    stripped.reserve(inner.size());
    bool in_tag = false;
    for (const char c : inner) {
      if (c == '<') in_tag = true;
      else if (c == '>') in_tag = false;
      else if (!in_tag) stripped += c;
    }
    out.push_back(unescape_entities(stripped));
    pos = end + close.size();
  }
  return out;
}

CaseSet load_case_jsonl(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path.string());
  CaseSet set;
  std::string line;
  int line_no = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const std::exception& e) {
      fail(path.string(), " line ", line_no, ": malformed JSON (", e.what(), ")");
    }
    for (const char* key : {"id", "body", "catchphrases", "split"})
      require(rec.contains(key), path.string(), " line ", line_no,
              ": missing key '", key, "'");
    Case c;
    c.id = rec.at("id").get<std::string>();
    require(seen.insert(c.id).second, path.string(), " line ", line_no,
            ": duplicate case id '", c.id, "'");
    c.body = clean_text(rec.at("body").get<std::string>());
    for (const auto& p : rec.at("catchphrases")) {
      const std::string phrase = clean_text(p.get<std::string>());
      if (!phrase.empty()) c.catchphrases.push_back(phrase);
    }
    require(!c.catchphrases.empty(), path.string(), " line ", line_no,
            ": case '", c.id, "' has no catchphrases");
    require(!c.body.empty(), path.string(), " line ", line_no, ": case '", c.id,
            "' has empty body");
    const std::string split = rec.at("split").get<std::string>();
    if (split == "train") set.train.push_back(std::move(c));
    else if (split == "dev") set.dev.push_back(std::move(c));
    else if (split == "test") set.test.push_back(std::move(c));
    else fail(path.string(), " line ", line_no, ": unknown split '", split, "'");
  }
  return set;
}

CaseSet load_aus_dir(const fs::path& path, const CaseLoadOptions& options,
                     CaseLoadReport* report) {
  fs::path root = path;
  if (fs::is_directory(root / "fulltext")) root = root / "fulltext";
  require(fs::is_directory(root), root.string(), " is not a directory");

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".xml")
      files.push_back(entry.path());
  require(!files.empty(), "no .xml files under ", root.string());
  std::sort(files.begin(), files.end());

  CaseLoadReport local;
  CaseLoadReport& rep = report ? *report : local;
  rep.files_seen = static_cast<int>(files.size());

  std::vector<Case> cases;
  for (const fs::path& file : files) {
    const std::string xml = read_file(file);
    std::vector<std::string> sentences = extract_elements(xml, "sentence");
    std::vector<std::string> phrases = extract_elements(xml, "catchphrase");
    if (sentences.empty() && phrases.empty()) {
      ++rep.files_unparseable;
      rep.notes.push_back("unparseable: " + file.string());
      continue;
    }
    Case c;
    c.id = file.stem().string();
    std::string body;
    for (const std::string& s : sentences) {
      const std::string cleaned = clean_text(s);
      if (cleaned.empty()) continue;
      if (!body.empty()) body += ' ';
      body += cleaned;
    }
    c.body = body;
    for (const std::string& p : phrases) {
      const std::string cleaned = clean_text(p);
      if (!cleaned.empty()) c.catchphrases.push_back(cleaned);
    }
    if (c.catchphrases.empty()) {
      ++rep.skipped_no_catchphrases;
      continue;
    }
    if (c.body.empty()) {
      ++rep.files_unparseable;
      rep.notes.push_back("no sentences: " + file.string());
      continue;
    }
    cases.push_back(std::move(c));
  }
  require(!cases.empty(), "no parseable case in ", root.string(),
          " (first file: ", files.front().string(), ")");
  rep.cases_loaded = static_cast<int>(cases.size());

  std::sort(cases.begin(), cases.end(),
            [](const Case& a, const Case& b) { return a.id < b.id; });
  Rng rng(options.split_seed);
  rng.shuffle(cases);

  const size_t n = cases.size();
  const size_t n_eval = n / 10;
  CaseSet set;
  set.train.assign(cases.begin(), cases.end() - 2 * n_eval);
  set.dev.assign(cases.end() - 2 * n_eval, cases.end() - n_eval);
  set.test.assign(cases.end() - n_eval, cases.end());
  auto by_id = [](const Case& a, const Case& b) { return a.id < b.id; };
  std::sort(set.train.begin(), set.train.end(), by_id);
  std::sort(set.dev.begin(), set.dev.end(), by_id);
  std::sort(set.test.begin(), set.test.end(), by_id);
  return set;
}

}  // namespace

LabeledDocSet load_classification_dataset(const fs::path& path,
                                          ClassificationFormat format) {
  require(fs::exists(path), "path does not exist: ", path.string());
  switch (format) {
    case ClassificationFormat::kCanonicalJsonl:
      return load_classification_jsonl(path);
    case ClassificationFormat::kEurlexJsonDir:
      return load_eurlex_dir(path);
  }
  fail("unknown classification format");
}

CaseSet load_case_dataset(const fs::path& path, CaseFormat format,
                          const CaseLoadOptions& options,
                          CaseLoadReport* report) {
  require(fs::exists(path), "path does not exist: ", path.string());
  switch (format) {
    case CaseFormat::kCanonicalJsonl:
      return load_case_jsonl(path);
    case CaseFormat::kAusXmlDir:
      return load_aus_dir(path, options, report);
  }
  fail("unknown case format");
}

void write_classification_jsonl(const LabeledDocSet& set, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path.string());
  auto dump = [&out](const std::vector<LabeledDoc>& docs, const char* split) {
    for (const LabeledDoc& d : docs) {
      json rec;
      rec["id"] = d.id;
      rec["text"] = d.text;
      rec["labels"] = d.labels;
      rec["split"] = split;
      out << rec.dump() << '\n';
    }
  };
  dump(set.train, "train");
  dump(set.dev, "dev");
  dump(set.test, "test");
}

void write_case_jsonl(const CaseSet& set, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path.string());
  auto dump = [&out](const std::vector<Case>& cases, const char* split) {
    for (const Case& c : cases) {
      json rec;
      rec["id"] = c.id;
      rec["body"] = c.body;
      rec["catchphrases"] = c.catchphrases;
      rec["split"] = split;
      out << rec.dump() << '\n';
    }
  };
  dump(set.train, "train");
  dump(set.dev, "dev");
  dump(set.test, "test");
}

LabelBuckets partition_labels(const LabeledDocSet& set) {
  require(!set.label_universe.empty(), "label universe is empty");
  LabelBuckets buckets;
  for (const std::string& label : set.label_universe) buckets.counts[label] = 0;
  for (const LabeledDoc& doc : set.train)
    for (const std::string& label : doc.labels) ++buckets.counts[label];
  for (const auto& [label, count] : buckets.counts) {
    if (count > 50) buckets.frequent.insert(label);
    else if (count >= 1) buckets.few_shot.insert(label);
    else buckets.zero_shot.insert(label);
  }
  return buckets;
}

LabeledDocSet subsample_train(const LabeledDocSet& set, double ratio,
                              uint64_t seed) {
  require(ratio > 0.0 && ratio <= 1.0, "subsample ratio must be in (0, 1], got ",
          ratio);
  LabeledDocSet out = set;
  std::vector<size_t> order(set.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const size_t keep = static_cast<size_t>(
      std::floor(ratio * static_cast<double>(set.train.size())));
  out.train.clear();
  out.train.reserve(keep);
  for (size_t i = 0; i < keep; ++i) out.train.push_back(set.train[order[i]]);
  return out;
}

}  // namespace dapt
