#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deskdoc/common.hpp"
#include "deskdoc/geometry.hpp"

namespace deskdoc {

struct Word {
  std::string text;
  double x1 = 0, y1 = 0, x3 = 0, y3 = 0;  // raw pixel coordinates
};

struct QaPair {
  std::string question;
  std::vector<std::string> answers;  // non-empty
};

struct Document {
  std::string id;
  int page_w = 0;
  int page_h = 0;
  std::vector<Word> words;
  std::vector<int> lines;  // optional ground-truth line ids, empty if absent
  std::vector<QaPair> qa;
  std::map<std::string, std::vector<std::string>> entities;  // class -> spans in doc order
  std::vector<std::string> word_labels;                      // optional, one per word

  bool has_qa() const { return !qa.empty(); }
  bool has_entities() const { return !entities.empty(); }
  bool has_word_labels() const { return !word_labels.empty(); }
};

// Normalized boxes for every word, clamped into the page; the clamp counter
// tracks out-of-page coordinates when provided.
std::vector<std::pair<std::string, Box>> normalized_words(const Document& doc,
                                                          long* clamp_count = nullptr);

struct LoadStats {
  long total_lines = 0;
  long skipped = 0;
  std::vector<std::string> diagnostics;  // "line N: reason"
};

struct Corpus {
  std::vector<Document> docs;
  LoadStats stats;
};

// Reads a JSONL corpus; malformed lines are counted and skipped. More than
// 10% malformed lines aborts with a DataError, as does an unreadable file.
Corpus load_corpus(const std::string& path);

// Canonical writer: loading what this produces and saving again is byte
// identical.
void save_corpus(const std::vector<Document>& docs, const std::string& path);

// ---- synthetic documents ----------------------------------------------

enum class LayoutTemplate { kForm, kTable, kReceipt };

LayoutTemplate layout_template_from_name(const std::string& name);
std::string layout_template_name(LayoutTemplate t);

struct SyntheticLayoutConfig {
  LayoutTemplate tmpl = LayoutTemplate::kForm;
  int min_words = 20;
  int max_words = 400;
  int min_rows = 4;
  int max_rows = 16;
  int min_cols = 2;
  int max_cols = 5;
  double min_font = 11.0;
  double max_font = 20.0;
  double noise = 0.0;  // per-word vertical jitter, fraction of the line gap
};

// Deterministic under the rng state. Emits ground-truth line ids, QA pairs,
// entity spans and per-word class labels for the downstream task formats.
Document generate_synthetic_doc(Rng& rng, const SyntheticLayoutConfig& cfg, int index = 0);

std::vector<Document> generate_corpus(std::uint64_t seed, int n, const SyntheticLayoutConfig& cfg);

// ---- rasterization -----------------------------------------------------

struct ImageRaster {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;  // [3, height, width], values in [0,1]
};

// White page with dark pseudo-glyph blocks at the word boxes. out_h/out_w
// must be even (the visual patches are 2x2/stride 2).
ImageRaster render_image(const Document& doc, int out_h, int out_w);

// ---- statistics ---------------------------------------------------------

struct CorpusStats {
  struct Bucket {
    int lo = 0;
    int hi = 0;  // exclusive
    long count = 0;
  };
  std::vector<Bucket> buckets;
  long n_docs = 0;
  double mean = 0, median = 0, p95 = 0;
  int min_words = 0, max_words = 0;
};

CorpusStats corpus_stats(const std::vector<Document>& docs, int bucket_width = 20);
void write_stats_csv(const CorpusStats& stats, const std::string& path);

}  // namespace deskdoc
