#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "dapt/rng.hpp"
#include "dapt/tokenizer.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace dapt;

namespace {

// Naive BPE reference: full pair recount every round, highest count first,
// lexicographically smallest pair on ties. Kept deliberately independent of
// the incremental implementation in the library.
std::vector<std::string> naive_bpe(const std::vector<std::string>& corpus,
                                   int vocab_size) {
  std::map<std::string, long long> word_counts;
  for (const std::string& line : corpus) {
    size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') ++i;
      size_t j = i;
      while (j < line.size() && line[j] != ' ') ++j;
      if (j > i) ++word_counts[line.substr(i, j - i)];
      i = j;
    }
  }
  std::vector<std::pair<std::vector<std::string>, long long>> words;
  std::set<std::string> alphabet;
  for (const auto& [w, c] : word_counts) {
    std::vector<std::string> syms;
    for (size_t i = 0; i < w.size(); ++i) {
      std::string s(1, w[i]);
      if (i > 0) s = "##" + s;
      syms.push_back(s);
      alphabet.insert(s);
    }
    words.push_back({syms, c});
  }
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                     "[MASK]"};
  tokens.insert(tokens.end(), alphabet.begin(), alphabet.end());
  while (static_cast<int>(tokens.size()) < vocab_size) {
    std::map<std::pair<std::string, std::string>, long long> pairs;
    for (const auto& [syms, count] : words)
      for (size_t i = 0; i + 1 < syms.size(); ++i)
        pairs[{syms[i], syms[i + 1]}] += count;
    if (pairs.empty()) break;
    std::pair<std::string, std::string> best;
    long long best_count = 0;
    for (const auto& [p, c] : pairs)
      if (c > best_count) {
        best = p;
        best_count = c;
      }
    const std::string merged = best.first + best.second.substr(2);
    for (auto& [syms, count] : words) {
      std::vector<std::string> next;
      size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == best.first &&
            syms[i + 1] == best.second) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(syms[i++]);
        }
      }
      syms = next;
    }
    tokens.push_back(merged);
  }
  return tokens;
}

std::vector<std::string> all_tokens(const Vocab& v) {
  std::vector<std::string> out;
  for (int i = 0; i < v.size(); ++i) out.push_back(v.token(i));
  return out;
}

}  // namespace

TEST_CASE("bpe training matches the brute-force merge simulation") {
  const std::vector<std::string> corpus = {"aa aa ab"};
  const Vocab v = train_vocab(corpus, 10, 0);
  CHECK(v.size() == 10);
  CHECK(v.id_of("aa") >= 0);
  CHECK(all_tokens(v) == naive_bpe(corpus, 10));

  const std::vector<std::string> bigger = {
      "the cat sat on the mat", "the bat and the cat", "matters of fact",
      "the the the", "cats bats mats"};
  for (const int size : {24, 30, 45}) {
    const Vocab trained = train_vocab(bigger, size, 0);
    CHECK(all_tokens(trained) == naive_bpe(bigger, size));
  }
}

TEST_CASE("train_vocab rejects empty corpora and tiny sizes") {
  CHECK_THROWS_AS(train_vocab({}, 100, 0), std::runtime_error);
  CHECK_THROWS_AS(train_vocab({"   "}, 100, 0), std::runtime_error);
  // "ab" needs 5 specials + 2 symbols; 7 leaves no room for a merge
  CHECK_THROWS_AS(train_vocab({"ab"}, 7, 0), std::runtime_error);
  CHECK_NOTHROW(train_vocab({"ab"}, 8, 0));
}

TEST_CASE("train_vocab is deterministic") {
  const std::vector<std::string> corpus = {"alpha beta gamma alpha",
                                           "beta beta gentle"};
  const Vocab a = train_vocab(corpus, 40, 1);
  const Vocab b = train_vocab(corpus, 40, 1);
  CHECK(a == b);
}

TEST_CASE("vocab file round-trip keeps ids and specials order") {
  testutil::TempDir dir("vocab");
  const Vocab v = train_vocab({"hello world hello"}, 24, 0);
  const auto path = dir.path / "vocab.txt";
  v.save(path);
  const Vocab loaded = Vocab::load(path);
  CHECK(loaded == v);
  const std::string body = testutil::read_file(path);
  CHECK(body.rfind("[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\n", 0) == 0);
}

TEST_CASE("encode handles empty text, truncation and padding") {
  const Vocab v = train_vocab({"hello world again"}, 30, 0);

  const TokenSeq empty = encode(v, "", 8);
  REQUIRE(empty.ids.size() == 8);
  CHECK(empty.ids[0] == Vocab::kCls);
  CHECK(empty.ids[1] == Vocab::kSep);
  for (int i = 2; i < 8; ++i) CHECK(empty.ids[i] == Vocab::kPad);
  CHECK(empty.num_real() == 2);

  const TokenSeq truncated =
      encode(v, "hello world again hello world again hello", 6);
  REQUIRE(truncated.ids.size() == 6);
  CHECK(truncated.ids[0] == Vocab::kCls);
  CHECK(truncated.ids[5] == Vocab::kSep);  // SEP survives truncation
  CHECK(truncated.num_real() == 6);

  const TokenSeq padded = encode(v, "hello", 10);
  CHECK(padded.ids[0] == Vocab::kCls);
  int sep_pos = -1;
  for (int i = 0; i < padded.length(); ++i)
    if (padded.ids[i] == Vocab::kSep) sep_pos = i;
  REQUIRE(sep_pos > 0);
  for (int i = sep_pos + 1; i < padded.length(); ++i) {
    CHECK(padded.ids[i] == Vocab::kPad);
    CHECK(padded.attention_mask[i] == 0);
  }
}

TEST_CASE("unknown words become a single [UNK]") {
  const Vocab v = train_vocab({"aa ab ba"}, 12, 0);
  const TokenSeq seq = encode(v, "aa zz", 10);
  // [CLS] aa-pieces... [UNK] [SEP]
  bool has_unk = false;
  for (const int32_t id : seq.ids) has_unk |= id == Vocab::kUnk;
  CHECK(has_unk);
  CHECK(decode(v, seq.ids) == "aa");  // specials (incl. UNK) are dropped
}

TEST_CASE("decode basics") {
  const Vocab v = train_vocab({"hello world"}, 30, 0);
  REQUIRE(v.id_of("hello") >= 0);
  CHECK(decode(v, {Vocab::kCls, v.id_of("hello"), Vocab::kSep}) == "hello");
  CHECK(decode(v, {Vocab::kCls, Vocab::kSep}) == "");
  CHECK_THROWS_AS(decode(v, {v.size()}), std::runtime_error);
}

TEST_CASE("round-trip: decode(encode(x)) is whitespace-normalized x") {
  const std::string alphabet = "abc";
  Rng rng(5);
  std::vector<std::string> corpus;
  for (int i = 0; i < 50; ++i) {
    std::string line;
    const int n_words = 1 + static_cast<int>(rng.below(8));
    for (int w = 0; w < n_words; ++w) {
      if (w) line += ' ';
      const int len = 1 + static_cast<int>(rng.below(6));
      for (int c = 0; c < len; ++c)
        line += alphabet[static_cast<size_t>(rng.below(alphabet.size()))];
    }
    corpus.push_back(line);
  }
  const Vocab v = train_vocab(corpus, 64, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    const int n_words = 1 + static_cast<int>(rng.below(6));
    for (int w = 0; w < n_words; ++w) {
      if (w) text += rng.below(2) ? "  " : " ";
      const int len = 1 + static_cast<int>(rng.below(5));
      for (int c = 0; c < len; ++c)
        text += alphabet[static_cast<size_t>(rng.below(alphabet.size()))];
    }
    const TokenSeq seq = encode(v, text, 64);
    std::string normalized;
    bool prev_space = true;
    for (const char c : text) {
      if (c == ' ') {
        if (!prev_space) normalized += ' ';
        prev_space = true;
      } else {
        normalized += c;
        prev_space = false;
      }
    }
    if (!normalized.empty() && normalized.back() == ' ') normalized.pop_back();
    CHECK(decode(v, seq.ids) == normalized);
  }
}

TEST_CASE("encode invariants over random inputs") {
  const Vocab v = train_vocab({"some words to learn from here"}, 48, 0);
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const int len = static_cast<int>(rng.below(30));
    for (int i = 0; i < len; ++i)
      text += static_cast<char>('a' + rng.below(26));
    const int max_len = 2 + static_cast<int>(rng.below(20));
    const TokenSeq seq = encode(v, text, max_len);
    REQUIRE(seq.ids.size() == static_cast<size_t>(max_len));
    REQUIRE(seq.attention_mask.size() == seq.ids.size());
    CHECK(seq.ids[0] == Vocab::kCls);
    for (size_t i = 0; i < seq.ids.size(); ++i) {
      CHECK(seq.ids[i] >= 0);
      CHECK(seq.ids[i] < v.size());
      CHECK(seq.attention_mask[i] == (seq.ids[i] == Vocab::kPad ? 0 : 1));
    }
    // a SEP immediately precedes the padding (or ends the sequence)
    const int real = seq.num_real();
    CHECK(seq.ids[real - 1] == Vocab::kSep);
  }
}

TEST_CASE("mlm masking: selection and replacement statistics") {
  const Vocab v = train_vocab({"a b c d e f g h i j k l m n o p"}, 40, 0);
  const int n = 1'000'000;
  TokenSeq seq;
  seq.ids.assign(n, 0);
  seq.attention_mask.assign(n, 1);
  seq.ids[0] = Vocab::kCls;
  seq.ids[n - 1] = Vocab::kSep;
  Rng fill(3);
  for (int i = 1; i < n - 1; ++i)
    seq.ids[i] =
        Vocab::kNumSpecials + static_cast<int32_t>(fill.below(v.size() - 5));

  const MaskedSeq masked = mask_for_mlm(v, seq, 0.15, 42);
  int selected = 0, became_mask = 0, unchanged = 0, randomized = 0;
  for (int i = 0; i < n; ++i) {
    if (masked.targets[i] == MaskedSeq::kIgnoreTarget) {
      CHECK(masked.input.ids[i] == seq.ids[i]);
      continue;
    }
    ++selected;
    CHECK(masked.targets[i] == seq.ids[i]);
    if (masked.input.ids[i] == Vocab::kMask) ++became_mask;
    else if (masked.input.ids[i] == seq.ids[i]) ++unchanged;
    else ++randomized;
  }
  const double maskable = n - 2;
  CHECK(selected / maskable == doctest::Approx(0.15).epsilon(0.034));
  CHECK(std::abs(selected / maskable - 0.15) < 0.005);
  REQUIRE(selected >= 100'000);
  CHECK(std::abs(became_mask / double(selected) - 0.80) < 0.01);
  CHECK(std::abs(unchanged / double(selected) - 0.10) < 0.011);
  CHECK(std::abs(randomized / double(selected) - 0.10) < 0.011);

  // specials were never selected
  CHECK(masked.targets[0] == MaskedSeq::kIgnoreTarget);
  CHECK(masked.targets[n - 1] == MaskedSeq::kIgnoreTarget);
}

TEST_CASE("mlm masking never touches specials or padding") {
  const Vocab v = train_vocab({"alpha beta gamma"}, 30, 0);
  const TokenSeq seq = encode(v, "alpha beta gamma", 12);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const MaskedSeq m = mask_for_mlm(v, seq, 0.5, seed);
    for (size_t i = 0; i < seq.ids.size(); ++i) {
      const bool maskable = seq.attention_mask[i] && !v.is_special(seq.ids[i]);
      if (!maskable) {
        CHECK(m.targets[i] == MaskedSeq::kIgnoreTarget);
        CHECK(m.input.ids[i] == seq.ids[i]);
      }
      if (m.targets[i] != MaskedSeq::kIgnoreTarget) CHECK(maskable);
    }
  }
}

TEST_CASE("mlm masking degenerate and deterministic cases") {
  const Vocab v = train_vocab({"x y"}, 10, 0);
  const TokenSeq bare = encode(v, "", 4);
  const MaskedSeq m = mask_for_mlm(v, bare, 0.15, 0);
  for (const int32_t t : m.targets) CHECK(t == MaskedSeq::kIgnoreTarget);
  for (size_t i = 0; i < bare.ids.size(); ++i)
    CHECK(m.input.ids[i] == bare.ids[i]);

  const TokenSeq seq = encode(v, "x y x y", 12);
  const MaskedSeq a = mask_for_mlm(v, seq, 0.4, 7);
  const MaskedSeq b = mask_for_mlm(v, seq, 0.4, 7);
  CHECK(a.input.ids == b.input.ids);
  CHECK(a.targets == b.targets);

  CHECK_THROWS_AS(mask_for_mlm(v, seq, 0.0, 0), std::runtime_error);
  CHECK_THROWS_AS(mask_for_mlm(v, seq, 1.0, 0), std::runtime_error);
}
