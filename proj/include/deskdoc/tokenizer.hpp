#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "deskdoc/common.hpp"
#include "deskdoc/geometry.hpp"

namespace deskdoc {

// Byte-pair subword vocabulary. Ids are dense: the specials PAD/EOS/UNK,
// the sentinel block <extra_0>..<extra_{n-1}>, the corpus alphabet in byte
// order, then one id per merge in the order the merges were learned.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kFirstSentinel = 3;

  // Greedy highest-frequency merges over the corpus chunks; ties broken by
  // lexicographic (left, right) pair order, so training is reproducible.
  static Vocab train(const std::vector<std::string>& corpus, int vocab_size,
                     int num_sentinels = 100, bool lowercase = true);

  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int num_sentinels() const { return num_sentinels_; }
  bool lowercase() const { return lowercase_; }

  int sentinel_id(int k) const;
  bool is_sentinel(int id) const { return id >= kFirstSentinel && id < kFirstSentinel + num_sentinels_; }
  static std::string sentinel_marker(int k) { return "<extra_" + std::to_string(k) + ">"; }

  // Splits text into chunks (runs of spaces glue to the following word) and
  // applies the learned merges inside each chunk. Characters outside the
  // training alphabet map to UNK.
  std::vector<int> encode(const std::string& text) const;

  // Inverse of encode on in-alphabet text: PAD/EOS/UNK are dropped, sentinel
  // ids render as their <extra_k> markers so corruption targets stay parseable.
  std::string decode(const std::vector<int>& ids) const;

  const std::string& token_text(int id) const;

 private:
  Vocab() = default;

  std::vector<int> encode_chunk(const std::string& chunk) const;

  bool lowercase_ = true;
  int num_sentinels_ = 0;
  std::vector<std::string> id_to_token_;              // specials use display names
  std::unordered_map<std::string, int> token_to_id_;  // alphabet + merge results only
  std::vector<std::pair<std::string, std::string>> merges_;
  std::map<std::pair<std::string, std::string>, int> merge_rank_;
};

// One OCR word after subword encoding; every subword inherits the word box.
struct TokenizedWord {
  int word_index = 0;
  std::vector<int> subword_ids;
  Box box;
};

// Flattened, padded model input built from tokenized words.
struct TokenSequence {
  std::vector<int> ids;         // length max_seq, PAD-filled tail
  std::vector<Box> boxes;       // PAD positions carry the zero box
  std::vector<int> word_index;  // -1 on PAD positions
  int n_real = 0;               // positions before padding
};

// Encodes words and cuts the subword stream at max_seq (mid-word cuts are
// allowed); a word whose subwords were all cut is dropped.
std::vector<TokenizedWord> encode_words(const std::vector<std::pair<std::string, Box>>& words,
                                        const Vocab& vocab, int max_seq);

TokenSequence to_sequence(const std::vector<TokenizedWord>& words, int max_seq);

}  // namespace deskdoc
