#include "dapt/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "dapt/common.hpp"
#include "dapt/rng.hpp"

namespace dapt {

namespace {

constexpr const char* kSpecialStrings[Vocab::kNumSpecials] = {
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

constexpr const char* kContinuation = "##";

bool is_continuation(const std::string& token) {
  return token.size() > 2 && token[0] == '#' && token[1] == '#';
}

std::vector<std::string> whitespace_split(const std::string& text) {
  std::vector<std::string> words;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

// Splits a UTF-8 word into code points, continuation pieces prefixed "##".
std::vector<std::string> word_to_symbols(const std::string& word) {
  std::vector<std::string> symbols;
  size_t i = 0;
  while (i < word.size()) {
    size_t len = 1;
    const unsigned char c = static_cast<unsigned char>(word[i]);
    if ((c & 0xE0) == 0xC0) len = 2;
    else if ((c & 0xF0) == 0xE0) len = 3;
    else if ((c & 0xF8) == 0xF0) len = 4;
    len = std::min(len, word.size() - i);
    std::string sym = word.substr(i, len);
    if (!symbols.empty()) sym = kContinuation + sym;
    symbols.push_back(std::move(sym));
    i += len;
  }
  return symbols;
}

}  // namespace

const char* Vocab::special_string(int id) {
  require(id >= 0 && id < kNumSpecials, "not a special id: ", id);
  return kSpecialStrings[id];
}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  require(static_cast<int>(tokens_.size()) >= kNumSpecials,
          "vocabulary must contain the ", kNumSpecials, " special tokens");
  for (int i = 0; i < kNumSpecials; ++i)
    require(tokens_[i] == kSpecialStrings[i], "special token ", i, " must be ",
            kSpecialStrings[i], ", got '", tokens_[i], "'");
  for (size_t i = 0; i < tokens_.size(); ++i) {
    require(!tokens_[i].empty(), "empty token at id ", i);
    require(index_.emplace(tokens_[i], static_cast<int>(i)).second,
            "duplicate token '", tokens_[i], "'");
  }
}

const std::string& Vocab::token(int id) const {
  require(id >= 0 && id < size(), "token id out of range: ", id);
  return tokens_[id];
}

int Vocab::id_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write ", path.string());
  for (const std::string& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open ", path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocab(std::move(tokens));
}

int TokenSeq::num_real() const {
  int n = 0;
  for (const uint8_t m : attention_mask) n += m;
  return n;
}

Vocab train_vocab(const std::vector<std::string>& corpus, int vocab_size,
                  uint64_t /*seed*/) {
  // Word frequencies; std::map keeps iteration deterministic.
  std::map<std::string, long long> word_counts;
  for (const std::string& line : corpus)
    for (const std::string& w : whitespace_split(line)) ++word_counts[w];
  require(!word_counts.empty(), "cannot train a vocabulary on an empty corpus");

  struct Word {
    std::vector<std::string> symbols;
    long long count;
  };
  std::vector<Word> words;
  words.reserve(word_counts.size());
  std::set<std::string> alphabet;
  for (const auto& [word, count] : word_counts) {
    Word w{word_to_symbols(word), count};
    for (const std::string& s : w.symbols) alphabet.insert(s);
    words.push_back(std::move(w));
  }

  const int base = Vocab::kNumSpecials + static_cast<int>(alphabet.size());
  require(vocab_size > base, "vocab_size ", vocab_size,
          " too small: need more than ", base,
          " entries (specials + corpus alphabet)");

  std::vector<std::string> tokens(kSpecialStrings,
                                  kSpecialStrings + Vocab::kNumSpecials);
  tokens.insert(tokens.end(), alphabet.begin(), alphabet.end());
  std::set<std::string> token_set(tokens.begin(), tokens.end());

  // Adjacent-pair counts, updated incrementally per merge.
  using Pair = std::pair<std::string, std::string>;
  std::map<Pair, long long> pair_counts;
  std::map<Pair, std::set<size_t>> pair_words;
  auto add_word_pairs = [&](size_t wi, long long sign) {
    const Word& w = words[wi];
    for (size_t i = 0; i + 1 < w.symbols.size(); ++i) {
      const Pair p{w.symbols[i], w.symbols[i + 1]};
      pair_counts[p] += sign * w.count;
      if (sign > 0) pair_words[p].insert(wi);
    }
  };
  for (size_t wi = 0; wi < words.size(); ++wi) add_word_pairs(wi, +1);

  while (static_cast<int>(tokens.size()) < vocab_size) {
    // Highest count wins; ties break toward the lexicographically smaller
    // pair, making training order-independent.
    const Pair* best = nullptr;
    long long best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (count > best_count) {
        best = &pair;
        best_count = count;
      }
    }
    if (!best) break;  // nothing left to merge

    const Pair merge = *best;
    std::string merged = merge.first;
    merged += is_continuation(merge.second) || merge.second.rfind(kContinuation, 0) == 0
                  ? merge.second.substr(2)
                  : merge.second;

    const std::set<size_t> affected = pair_words[merge];
    for (const size_t wi : affected) {
      add_word_pairs(wi, -1);
      std::vector<std::string>& syms = words[wi].symbols;
      std::vector<std::string> next;
      next.reserve(syms.size());
      size_t i = 0;
      while (i < syms.size()) {
        if (i + 1 < syms.size() && syms[i] == merge.first &&
            syms[i + 1] == merge.second) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(next);
      add_word_pairs(wi, +1);
    }
    pair_counts.erase(merge);
    pair_words.erase(merge);
    for (auto it = pair_counts.begin(); it != pair_counts.end();)
      it = it->second <= 0 ? pair_counts.erase(it) : std::next(it);

    // A merge whose spelling collides with an existing token (e.g. a literal
    // "[MASK]" in the corpus) is applied to the words but adds no entry.
    if (token_set.insert(merged).second) tokens.push_back(merged);
  }

  return Vocab(std::move(tokens));
}

TokenSeq encode(const Vocab& v, const std::string& text, int max_len) {
  require(max_len >= 2, "max_len must be at least 2, got ", max_len);

  std::vector<int32_t> pieces;
  for (const std::string& word : whitespace_split(text)) {
    const int special = v.id_of(word);
    if (special >= 0 && v.is_special(special)) {
      pieces.push_back(special);
      continue;
    }
    // Greedy longest-match; continuation pieces carry the ## prefix. A word
    // with any unmatchable span becomes a single [UNK].
    std::vector<int32_t> word_pieces;
    size_t pos = 0;
    bool ok = true;
    while (pos < word.size()) {
      int match = -1;
      size_t match_len = 0;
      for (size_t len = word.size() - pos; len >= 1; --len) {
        std::string candidate = pos == 0 ? word.substr(0, len)
                                         : kContinuation + word.substr(pos, len);
        const int id = v.id_of(candidate);
        if (id >= 0 && !v.is_special(id)) {
          match = id;
          match_len = len;
          break;
        }
      }
      if (match < 0) {
        ok = false;
        break;
      }
      word_pieces.push_back(match);
      pos += match_len;
    }
    if (ok)
      pieces.insert(pieces.end(), word_pieces.begin(), word_pieces.end());
    else
      pieces.push_back(Vocab::kUnk);
  }

  const size_t budget = static_cast<size_t>(max_len) - 2;
  if (pieces.size() > budget) pieces.resize(budget);

  TokenSeq seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(Vocab::kCls);
  seq.ids.insert(seq.ids.end(), pieces.begin(), pieces.end());
  seq.ids.push_back(Vocab::kSep);
  seq.attention_mask.assign(seq.ids.size(), 1);
  seq.ids.resize(max_len, Vocab::kPad);
  seq.attention_mask.resize(max_len, 0);
  return seq;
}

std::string decode(const Vocab& v, const std::vector<int32_t>& ids) {
  std::string out;
  for (const int32_t id : ids) {
    const std::string& tok = v.token(id);  // validates range
    if (v.is_special(id)) continue;
    if (is_continuation(tok)) {
      out += tok.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += tok;
    }
  }
  return out;
}

MaskedSeq mask_for_mlm(const Vocab& v, const TokenSeq& seq, double mask_rate,
                       uint64_t seed) {
  require(mask_rate > 0.0 && mask_rate < 1.0,
          "mask_rate must be in (0, 1), got ", mask_rate);
  require(seq.ids.size() == seq.attention_mask.size(),
          "ids / attention_mask length mismatch");

  MaskedSeq out;
  out.input = seq;
  out.targets.assign(seq.ids.size(), MaskedSeq::kIgnoreTarget);

  Rng rng(seed);
  const int n_random = v.size() - Vocab::kNumSpecials;
  for (size_t i = 0; i < seq.ids.size(); ++i) {
    if (!seq.attention_mask[i] || v.is_special(seq.ids[i])) continue;
    if (rng.uniform() >= mask_rate) continue;
    out.targets[i] = seq.ids[i];
    const double roll = rng.uniform();
    if (roll < 0.8) {
      out.input.ids[i] = Vocab::kMask;
    } else if (roll < 0.9 && n_random > 0) {
      out.input.ids[i] =
          Vocab::kNumSpecials + static_cast<int32_t>(rng.below(n_random));
    }
    // else: keep the original token
  }
  return out;
}

}  // namespace dapt
