#include "deskdoc/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace deskdoc {

namespace {

std::string lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// A chunk is a maximal run of spaces glued to the word that follows it, so
// concatenating chunk texts reproduces the input exactly.
std::vector<std::string> split_chunks(const std::string& text) {
  std::vector<std::string> chunks;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    while (i < text.size() && text[i] == ' ') ++i;
    while (i < text.size() && text[i] != ' ') ++i;
    chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

std::string escape_symbol(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ' ': out += "\\s"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_symbol(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    ++i;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 's': out += ' '; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      default: out += s[i];
    }
  }
  return out;
}

}  // namespace

Vocab Vocab::train(const std::vector<std::string>& corpus, int vocab_size,
                   int num_sentinels, bool lowercase) {
  if (num_sentinels < 0) throw ShapeError("Vocab::train: num_sentinels must be >= 0");

  // Chunk frequency table.
  std::map<std::string, long> chunk_freq;
  for (const std::string& raw : corpus) {
    std::string text = lowercase ? lower_ascii(raw) : raw;
    for (auto& chunk : split_chunks(text)) ++chunk_freq[chunk];
  }
  if (chunk_freq.empty()) throw DataError("Vocab::train: empty corpus");

  std::map<std::string, int> alphabet;  // byte-ordered
  for (const auto& [chunk, freq] : chunk_freq)
    for (char c : chunk) alphabet.emplace(std::string(1, c), 0);

  const int num_specials = kFirstSentinel + num_sentinels;
  if (vocab_size <= num_specials + static_cast<int>(alphabet.size())) {
    throw DataError("Vocab::train: vocab_size " + std::to_string(vocab_size) +
                    " must exceed specials (" + std::to_string(num_specials) + ") + alphabet (" +
                    std::to_string(alphabet.size()) + ")");
  }

  Vocab v;
  v.lowercase_ = lowercase;
  v.num_sentinels_ = num_sentinels;
  v.id_to_token_.push_back("<pad>");
  v.id_to_token_.push_back("<eos>");
  v.id_to_token_.push_back("<unk>");
  for (int k = 0; k < num_sentinels; ++k) v.id_to_token_.push_back(sentinel_marker(k));
  for (auto& [sym, id] : alphabet) {
    id = static_cast<int>(v.id_to_token_.size());
    v.token_to_id_[sym] = id;
    v.id_to_token_.push_back(sym);
  }

  // Symbol sequences per unique chunk, weighted by chunk frequency.
  std::vector<std::pair<std::vector<std::string>, long>> work;
  work.reserve(chunk_freq.size());
  for (const auto& [chunk, freq] : chunk_freq) {
    std::vector<std::string> syms;
    for (char c : chunk) syms.emplace_back(1, c);
    work.push_back({std::move(syms), freq});
  }

  const int max_merges = vocab_size - num_specials - static_cast<int>(alphabet.size());
  for (int step = 0; step < max_merges; ++step) {
    std::map<std::pair<std::string, std::string>, long> pair_count;
    for (const auto& [syms, freq] : work)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i)
        pair_count[{syms[i], syms[i + 1]}] += freq;
    if (pair_count.empty()) break;

    auto best = pair_count.begin();
    for (auto it = std::next(pair_count.begin()); it != pair_count.end(); ++it)
      if (it->second > best->second) best = it;  // map order already breaks ties lexicographically

    const auto [left, right] = best->first;
    std::string merged = left + right;
    if (merged.rfind("<extra_", 0) == 0 || merged == "<pad>" || merged == "<eos>" || merged == "<unk>") {
      // Refuse to synthesize a special token; drop this pair by merging it
      // without registering (can only happen on adversarial corpora).
      break;
    }
    v.merge_rank_[{left, right}] = static_cast<int>(v.merges_.size());
    v.merges_.push_back({left, right});
    if (!v.token_to_id_.count(merged)) {
      v.token_to_id_[merged] = static_cast<int>(v.id_to_token_.size());
      v.id_to_token_.push_back(merged);
    }
    for (auto& [syms, freq] : work) {
      for (std::size_t i = 0; i + 1 < syms.size();) {
        if (syms[i] == left && syms[i + 1] == right) {
          syms[i] = merged;
          syms.erase(syms.begin() + i + 1);
        } else {
          ++i;
        }
      }
    }
  }
  return v;
}

int Vocab::sentinel_id(int k) const {
  if (k < 0 || k >= num_sentinels_) {
    throw ShapeError("sentinel_id: index " + std::to_string(k) + " out of " +
                     std::to_string(num_sentinels_));
  }
  return kFirstSentinel + k;
}

std::vector<int> Vocab::encode_chunk(const std::string& chunk) const {
  std::vector<std::string> syms;
  for (char c : chunk) syms.emplace_back(1, c);
  while (syms.size() > 1) {
    int best_rank = -1;
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      auto it = merge_rank_.find({syms[i], syms[i + 1]});
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank < 0) break;
    const auto& [left, right] = merges_[best_rank];
    for (std::size_t i = best_pos; i + 1 < syms.size();) {
      if (syms[i] == left && syms[i + 1] == right) {
        syms[i] = left + right;
        syms.erase(syms.begin() + i + 1);
      } else {
        ++i;
      }
    }
  }
  std::vector<int> ids;
  ids.reserve(syms.size());
  for (const auto& sym : syms) {
    auto it = token_to_id_.find(sym);
    if (it != token_to_id_.end()) {
      ids.push_back(it->second);
    } else {
      // Unknown symbol: fall back to per-character lookup before UNK.
      for (char c : sym) {
        auto cit = token_to_id_.find(std::string(1, c));
        ids.push_back(cit != token_to_id_.end() ? cit->second : kUnk);
      }
    }
  }
  return ids;
}

std::vector<int> Vocab::encode(const std::string& text) const {
  std::string norm = lowercase_ ? lower_ascii(text) : text;
  std::vector<int> ids;
  for (const auto& chunk : split_chunks(norm)) {
    auto part = encode_chunk(chunk);
    ids.insert(ids.end(), part.begin(), part.end());
  }
  return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= size()) throw ShapeError("decode: id " + std::to_string(id) + " out of range");
    if (id == kPad || id == kEos || id == kUnk) continue;
    out += id_to_token_[id];  // sentinels render as their markers
  }
  return out;
}

const std::string& Vocab::token_text(int id) const {
  if (id < 0 || id >= size()) throw ShapeError("token_text: id " + std::to_string(id) + " out of range");
  return id_to_token_[id];
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes everywhere
  if (!out) throw DataError("Vocab::save: cannot open " + path);
  out << "deskdoc-bpe 1\n";
  out << "lowercase " << (lowercase_ ? 1 : 0) << "\n";
  out << "sentinels " << num_sentinels_ << "\n";
  int alphabet = 0;
  for (const auto& tok : id_to_token_)
    if (static_cast<int>(tok.size()) == 1) ++alphabet;
  // alphabet entries are exactly the single-byte tokens, in id order
  out << "alphabet " << alphabet << "\n";
  for (int id = kFirstSentinel + num_sentinels_; id < size(); ++id) {
    if (id_to_token_[id].size() == 1) out << escape_symbol(id_to_token_[id]) << "\n";
  }
  out << "merges " << merges_.size() << "\n";
  for (const auto& [l, r] : merges_) out << escape_symbol(l) << " " << escape_symbol(r) << "\n";
  if (!out) throw DataError("Vocab::save: write failed for " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("Vocab::load: cannot open " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "deskdoc-bpe" || version != 1) throw DataError("Vocab::load: bad header in " + path);

  Vocab v;
  std::string key;
  int lowercase = 1;
  in >> key >> lowercase;
  if (key != "lowercase") throw DataError("Vocab::load: expected lowercase line");
  v.lowercase_ = lowercase != 0;
  in >> key >> v.num_sentinels_;
  if (key != "sentinels") throw DataError("Vocab::load: expected sentinels line");
  int alphabet = 0;
  in >> key >> alphabet;
  if (key != "alphabet") throw DataError("Vocab::load: expected alphabet line");
  in.ignore();

  v.id_to_token_.push_back("<pad>");
  v.id_to_token_.push_back("<eos>");
  v.id_to_token_.push_back("<unk>");
  for (int k = 0; k < v.num_sentinels_; ++k) v.id_to_token_.push_back(sentinel_marker(k));
  std::string line;
  for (int i = 0; i < alphabet; ++i) {
    if (!std::getline(in, line)) throw DataError("Vocab::load: truncated alphabet");
    std::string sym = unescape_symbol(line);
    v.token_to_id_[sym] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(sym);
  }
  if (!std::getline(in, line)) throw DataError("Vocab::load: missing merges header");
  std::istringstream hdr(line);
  long n_merges = 0;
  hdr >> key >> n_merges;
  if (key != "merges") throw DataError("Vocab::load: expected merges line");
  for (long i = 0; i < n_merges; ++i) {
    if (!std::getline(in, line)) throw DataError("Vocab::load: truncated merges");
    auto sep = line.find(' ');
    if (sep == std::string::npos) throw DataError("Vocab::load: malformed merge line");
    std::string left = unescape_symbol(line.substr(0, sep));
    std::string right = unescape_symbol(line.substr(sep + 1));
    std::string merged = left + right;
    v.merge_rank_[{left, right}] = static_cast<int>(v.merges_.size());
    v.merges_.push_back({left, right});
    if (!v.token_to_id_.count(merged)) {
      v.token_to_id_[merged] = static_cast<int>(v.id_to_token_.size());
      v.id_to_token_.push_back(merged);
    }
  }
  return v;
}

std::vector<TokenizedWord> encode_words(const std::vector<std::pair<std::string, Box>>& words,
                                        const Vocab& vocab, int max_seq) {
  if (max_seq < 1) throw ShapeError("encode_words: max_seq must be >= 1");
  std::vector<TokenizedWord> out;
  int used = 0;
  for (std::size_t w = 0; w < words.size() && used < max_seq; ++w) {
    TokenizedWord tw;
    tw.word_index = static_cast<int>(w);
    tw.box = words[w].second;
    auto ids = vocab.encode(words[w].first);
    for (int id : ids) {
      if (used >= max_seq) break;  // stream cut mid-word; remainder ignored
      tw.subword_ids.push_back(id);
      ++used;
    }
    if (!tw.subword_ids.empty()) out.push_back(std::move(tw));
  }
  return out;
}

TokenSequence to_sequence(const std::vector<TokenizedWord>& words, int max_seq) {
  TokenSequence seq;
  seq.ids.assign(max_seq, Vocab::kPad);
  seq.boxes.assign(max_seq, Box{});
  seq.word_index.assign(max_seq, -1);
  int pos = 0;
  for (const auto& w : words) {
    for (int id : w.subword_ids) {
      if (pos >= max_seq) throw ShapeError("to_sequence: tokenized words exceed max_seq");
      seq.ids[pos] = id;
      seq.boxes[pos] = w.box;
      seq.word_index[pos] = w.word_index;
      ++pos;
    }
  }
  seq.n_real = pos;
  return seq;
}

}  // namespace deskdoc
