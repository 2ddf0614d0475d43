#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace dapt {

// Subword vocabulary with BPE-style merges. Continuation pieces carry a
// leading "##", WordPiece style, so greedy longest-match encoding and the
// merge construction agree on segmentation.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  static const char* special_string(int id);  // "[PAD]" .. "[MASK]"

  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  // -1 when the token is unknown.
  int id_of(const std::string& token) const;
  bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Fixed-length encoded sequence: [CLS] pieces... [SEP] [PAD]...
struct TokenSeq {
  std::vector<int32_t> ids;
  std::vector<uint8_t> attention_mask;  // 1 on non-PAD positions

  int length() const { return static_cast<int>(ids.size()); }
  int num_real() const;  // positions with attention_mask == 1
};

// MLM view of one sequence: inputs with some ids replaced, and the original
// id at each selected position (kIgnoreTarget elsewhere).
struct MaskedSeq {
  static constexpr int32_t kIgnoreTarget = -100;
  TokenSeq input;
  std::vector<int32_t> targets;
};

// Deterministic BPE training: whitespace pre-tokenization, characters as the
// base alphabet, highest-count pair merged each round (ties broken by token
// pair order). Returns exactly vocab_size entries when enough merges exist;
// a corpus that runs out of mergeable pairs yields a smaller vocabulary.
Vocab train_vocab(const std::vector<std::string>& corpus, int vocab_size,
                  uint64_t seed);

TokenSeq encode(const Vocab& v, const std::string& text, int max_len);
std::string decode(const Vocab& v, const std::vector<int32_t>& ids);

// BERT-style dynamic masking: each maskable position is selected
// independently with probability mask_rate; a selected position becomes
// [MASK] with p=0.8, a random non-special token with p=0.1, and stays
// unchanged with p=0.1.
MaskedSeq mask_for_mlm(const Vocab& v, const TokenSeq& seq, double mask_rate,
                       uint64_t seed);

}  // namespace dapt
