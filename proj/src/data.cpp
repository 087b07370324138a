#include "deskdoc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace deskdoc {

using nlohmann::json;

std::vector<std::pair<std::string, Box>> normalized_words(const Document& doc, long* clamp_count) {
  std::vector<std::pair<std::string, Box>> out;
  out.reserve(doc.words.size());
  for (const auto& w : doc.words) {
    out.push_back({w.text, normalize_box(w.x1, w.y1, w.x3, w.y3, doc.page_w, doc.page_h, clamp_count)});
  }
  return out;
}

namespace {

Document parse_document(const json& j) {
  Document d;
  d.id = j.at("id").get<std::string>();
  const auto& page = j.at("page");
  if (!page.is_array() || page.size() != 2) throw DataError("page must be [w,h]");
  d.page_w = page[0].get<int>();
  d.page_h = page[1].get<int>();
  if (d.page_w <= 0 || d.page_h <= 0) throw DataError("page dimensions must be positive");
  for (const auto& jw : j.at("words")) {
    Word w;
    w.text = jw.at("t").get<std::string>();
    const auto& b = jw.at("b");
    if (!b.is_array() || b.size() != 4) throw DataError("word box must be [x1,y1,x3,y3]");
    w.x1 = b[0].get<double>();
    w.y1 = b[1].get<double>();
    w.x3 = b[2].get<double>();
    w.y3 = b[3].get<double>();
    d.words.push_back(std::move(w));
  }
  if (j.contains("lines")) {
    d.lines = j.at("lines").get<std::vector<int>>();
    if (d.lines.size() != d.words.size()) throw DataError("lines must match words");
  }
  if (j.contains("qa")) {
    for (const auto& jq : j.at("qa")) {
      QaPair q;
      q.question = jq.at("q").get<std::string>();
      q.answers = jq.at("a").get<std::vector<std::string>>();
      if (q.answers.empty()) throw DataError("qa entry with empty answer list");
      d.qa.push_back(std::move(q));
    }
  }
  if (j.contains("entities")) {
    for (const auto& [cls, spans] : j.at("entities").items()) {
      d.entities[cls] = spans.get<std::vector<std::string>>();
    }
  }
  if (j.contains("word_labels")) {
    d.word_labels = j.at("word_labels").get<std::vector<std::string>>();
    if (d.word_labels.size() != d.words.size()) throw DataError("word_labels must match words");
  }
  return d;
}

json document_to_json(const Document& d) {
  json j;
  j["id"] = d.id;
  j["page"] = {d.page_w, d.page_h};
  json words = json::array();
  for (const auto& w : d.words) {
    words.push_back({{"t", w.text}, {"b", {w.x1, w.y1, w.x3, w.y3}}});
  }
  j["words"] = std::move(words);
  if (!d.lines.empty()) j["lines"] = d.lines;
  if (!d.qa.empty()) {
    json qa = json::array();
    for (const auto& q : d.qa) qa.push_back({{"q", q.question}, {"a", q.answers}});
    j["qa"] = std::move(qa);
  }
  if (!d.entities.empty()) {
    json ents = json::object();
    for (const auto& [cls, spans] : d.entities) ents[cls] = spans;
    j["entities"] = std::move(ents);
  }
  if (!d.word_labels.empty()) j["word_labels"] = d.word_labels;
  return j;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_corpus: cannot open " + path);
  Corpus corpus;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ++corpus.stats.total_lines;
    try {
      corpus.docs.push_back(parse_document(json::parse(line)));
    } catch (const std::exception& e) {
      ++corpus.stats.skipped;
      corpus.stats.diagnostics.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (corpus.stats.total_lines > 0 &&
      corpus.stats.skipped * 10 > corpus.stats.total_lines) {
    throw DataError("load_corpus: " + std::to_string(corpus.stats.skipped) + " of " +
                    std::to_string(corpus.stats.total_lines) + " lines malformed (>10%) in " + path);
  }
  return corpus;
}

void save_corpus(const std::vector<Document>& docs, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_corpus: cannot open " + path);
  for (const auto& d : docs) out << document_to_json(d).dump() << "\n";
  if (!out) throw DataError("save_corpus: write failed for " + path);
}

// ---- synthetic documents ----------------------------------------------

LayoutTemplate layout_template_from_name(const std::string& name) {
  if (name == "form") return LayoutTemplate::kForm;
  if (name == "table") return LayoutTemplate::kTable;
  if (name == "receipt") return LayoutTemplate::kReceipt;
  throw DataError("unknown layout template: " + name);
}

std::string layout_template_name(LayoutTemplate t) {
  switch (t) {
    case LayoutTemplate::kForm: return "form";
    case LayoutTemplate::kTable: return "table";
    case LayoutTemplate::kReceipt: return "receipt";
  }
  return "form";
}

namespace {

const std::vector<std::string>& key_pool() {
  static const std::vector<std::string> pool = {
      "name",   "date",   "total",  "invoice", "address", "phone",  "amount", "status",
      "vendor", "order",  "ref",    "email",   "account", "city",   "state",  "zip",
      "tax",    "due",    "issued", "contact", "company", "branch", "item",   "terms"};
  return pool;
}

const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> pool = {
      "acme",  "north", "main",  "supply", "west",  "office", "box",    "paid",
      "open",  "llc",   "corp",  "street", "park",  "lane",   "east",   "unit",
      "south", "plaza", "group", "labs",   "global", "retail", "market", "store"};
  return pool;
}

const std::vector<std::string>& item_pool() {
  static const std::vector<std::string> pool = {
      "coffee", "tea",    "bread", "milk",  "soap",  "rice",  "eggs",   "juice",
      "pasta",  "cheese", "apple", "spice", "honey", "water", "butter", "salad"};
  return pool;
}

std::string random_number_word(Rng& rng) {
  int kind = uniform_int(rng, 0, 2);
  if (kind == 0) return std::to_string(uniform_int(rng, 1, 9999));
  if (kind == 1) {
    return "$" + std::to_string(uniform_int(rng, 0, 99)) + "." +
           (uniform_int(rng, 0, 9) < 5 ? "0" : "") + std::to_string(uniform_int(rng, 10, 99));
  }
  return std::to_string(uniform_int(rng, 1, 12)) + "/" + std::to_string(uniform_int(rng, 1, 28)) +
         "/" + std::to_string(uniform_int(rng, 2015, 2026));
}

std::string pick(Rng& rng, const std::vector<std::string>& pool) {
  return pool[uniform_u64(rng, pool.size())];
}

// Incrementally places words left-to-right, starting new visual lines as
// needed; keeps boxes inside the page and non-overlapping within a line.
struct PageWriter {
  Document& doc;
  double font;
  double line_gap;
  double y = 0;
  double x = 0;
  int line_id = -1;
  double margin = 24;
  double page_w, page_h;
  Rng& rng;
  double noise;

  PageWriter(Document& d, double font_px, Rng& r, double noise_level)
      : doc(d), font(font_px), line_gap(font_px * 1.9), page_w(d.page_w), page_h(d.page_h),
        rng(r), noise(noise_level) {
    y = margin;
    x = margin;
    line_id = -1;
  }

  bool page_full() const { return y + font + margin > page_h; }

  void new_line(double x_start = -1) {
    y += (line_id < 0) ? 0 : line_gap;
    x = x_start < 0 ? margin : x_start;
    ++line_id;
  }

  // Returns false when the word does not fit on the page anymore.
  bool put_word(const std::string& text, const std::string& label) {
    double w = std::max(4.0, 0.55 * font * static_cast<double>(text.size()));
    double gap = 0.5 * font;
    if (x + w + margin > page_w) {
      if (page_full()) return false;
      new_line();
    }
    if (y + font + margin > page_h) return false;
    double jitter = noise > 0 ? (uniform_real(rng) - 0.5) * noise * line_gap : 0.0;
    Word word;
    word.text = text;
    word.x1 = x;
    word.y1 = y + jitter;
    word.x3 = x + w;
    word.y3 = y + font + jitter;
    doc.words.push_back(std::move(word));
    doc.lines.push_back(line_id);
    doc.word_labels.push_back(label);
    x += w + gap;
    return true;
  }

  void move_to_column(double col_x) { x = std::max(x, col_x); }
};

void add_entity(Document& doc, const std::string& cls, const std::string& text) {
  doc.entities[cls].push_back(text);
}

void generate_form(Rng& rng, const SyntheticLayoutConfig& cfg, Document& doc, int target_words,
                   double font) {
  PageWriter page(doc, font, rng, cfg.noise);
  page.new_line();
  int header_words = uniform_int(rng, 2, 3);
  std::string header_text;
  for (int i = 0; i < header_words; ++i) {
    std::string w = pick(rng, word_pool());
    page.put_word(w, "header");
    header_text += (i ? " " : "") + w;
  }
  add_entity(doc, "header", header_text);

  std::vector<std::string> used_keys;
  while (static_cast<int>(doc.words.size()) < target_words && !page.page_full()) {
    if (uniform_int(rng, 0, 5) == 0) {
      // Filler line.
      page.new_line();
      int n = uniform_int(rng, 2, 5);
      for (int i = 0; i < n; ++i) page.put_word(pick(rng, word_pool()), "other");
      continue;
    }
    std::string key = pick(rng, key_pool());
    page.new_line();
    if (!page.put_word(key + ":", "question")) break;
    int value_words = uniform_int(rng, 1, 3);
    std::string value_text;
    for (int i = 0; i < value_words; ++i) {
      std::string w = (uniform_int(rng, 0, 2) == 0) ? random_number_word(rng) : pick(rng, word_pool());
      if (!page.put_word(w, "answer")) break;
      value_text += (i ? " " : "") + w;
    }
    if (value_text.empty()) break;
    add_entity(doc, "key", key + ":");
    add_entity(doc, "value", value_text);
    if (std::find(used_keys.begin(), used_keys.end(), key) == used_keys.end()) {
      used_keys.push_back(key);
      doc.qa.push_back({"what is " + key + "?", {value_text}});
    }
  }
}

void generate_table(Rng& rng, const SyntheticLayoutConfig& cfg, Document& doc, int target_words,
                    double font) {
  PageWriter page(doc, font, rng, cfg.noise);
  int cols = uniform_int(rng, cfg.min_cols, cfg.max_cols);
  int max_rows_fit = std::max(1, static_cast<int>((doc.page_h - 2 * page.margin) / page.line_gap) - 1);
  int rows = std::min(std::max(cfg.min_rows, (target_words - cols) / cols), max_rows_fit);
  rows = std::min(rows, cfg.max_rows);
  double col_width = (doc.page_w - 2 * page.margin) / cols;

  std::vector<std::string> headers;
  page.new_line();
  for (int c = 0; c < cols; ++c) {
    page.move_to_column(page.margin + c * col_width);
    std::string h = pick(rng, key_pool());
    page.put_word(h, "header");
    headers.push_back(h);
    add_entity(doc, "header", h);
  }
  for (int r = 0; r < rows; ++r) {
    page.new_line();
    for (int c = 0; c < cols; ++c) {
      page.move_to_column(page.margin + c * col_width);
      std::string cell = (c == 0) ? pick(rng, word_pool()) : random_number_word(rng);
      page.put_word(cell, "other");
      if (r == 0) {
        doc.qa.push_back({"what is " + headers[c] + " in the first row?", {cell}});
      }
    }
  }
}

void generate_receipt(Rng& rng, const SyntheticLayoutConfig& cfg, Document& doc, int target_words,
                      double font) {
  PageWriter page(doc, font, rng, cfg.noise);
  page.new_line();
  std::string shop = pick(rng, word_pool());
  page.put_word(shop, "header");
  page.put_word(pick(rng, word_pool()), "header");
  add_entity(doc, "header", shop);

  double price_col = doc.page_w * 0.62;
  double total_cents = 0;
  while (static_cast<int>(doc.words.size()) + 4 < target_words && !page.page_full()) {
    page.new_line();
    std::string item = pick(rng, item_pool());
    if (!page.put_word(item, "answer")) break;
    if (uniform_int(rng, 0, 2) == 0) {
      std::string extra = pick(rng, word_pool());
      page.put_word(extra, "answer");
      item += " " + extra;
    }
    int cents = uniform_int(rng, 100, 4999);
    total_cents += cents;
    std::ostringstream price;
    price << "$" << cents / 100 << "." << (cents % 100 < 10 ? "0" : "") << cents % 100;
    page.move_to_column(price_col);
    page.put_word(price.str(), "other");
    add_entity(doc, "menu", item);
    add_entity(doc, "price", price.str());
  }
  page.new_line();
  page.put_word("total:", "question");
  std::ostringstream total;
  long t = static_cast<long>(total_cents);
  total << "$" << t / 100 << "." << (t % 100 < 10 ? "0" : "") << t % 100;
  page.put_word(total.str(), "answer");
  add_entity(doc, "total", total.str());
  doc.qa.push_back({"what is the total?", {total.str()}});
}

}  // namespace

Document generate_synthetic_doc(Rng& rng, const SyntheticLayoutConfig& cfg, int index) {
  if (cfg.min_words < 1 || cfg.max_words < cfg.min_words) {
    throw ShapeError("generate_synthetic_doc: bad word count range");
  }
  Document doc;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth-%06d", index);
  doc.id = buf;
  if (cfg.tmpl == LayoutTemplate::kReceipt) {
    doc.page_w = 420 + uniform_int(rng, 0, 60);
    doc.page_h = 900 + uniform_int(rng, 0, 300);
  } else {
    doc.page_w = 900 + uniform_int(rng, 0, 200);
    doc.page_h = 1200 + uniform_int(rng, 0, 240);
  }
  double font = cfg.min_font + uniform_real(rng) * (cfg.max_font - cfg.min_font);
  int target_words = uniform_int(rng, cfg.min_words, cfg.max_words);

  switch (cfg.tmpl) {
    case LayoutTemplate::kForm: generate_form(rng, cfg, doc, target_words, font); break;
    case LayoutTemplate::kTable: generate_table(rng, cfg, doc, target_words, font); break;
    case LayoutTemplate::kReceipt: generate_receipt(rng, cfg, doc, target_words, font); break;
  }

  // Enforce the configured word-count range: trim overshoot, top up with a
  // filler block when the template came out short.
  while (static_cast<int>(doc.words.size()) > cfg.max_words) {
    doc.words.pop_back();
    doc.lines.pop_back();
    doc.word_labels.pop_back();
  }
  if (static_cast<int>(doc.words.size()) < cfg.min_words) {
    PageWriter page(doc, font, rng, cfg.noise);
    page.y = doc.words.empty() ? page.margin : doc.words.back().y3 + page.line_gap - font;
    page.line_id = doc.lines.empty() ? -1 : doc.lines.back();
    while (static_cast<int>(doc.words.size()) < cfg.min_words) {
      page.new_line();
      if (!page.put_word(pick(rng, word_pool()), "other")) {
        // Page exhausted: recycle rows upward is not possible, shrink demand.
        break;
      }
    }
  }
  return doc;
}

std::vector<Document> generate_corpus(std::uint64_t seed, int n, const SyntheticLayoutConfig& cfg) {
  std::vector<Document> docs;
  docs.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "synth-" + std::to_string(i)));
    SyntheticLayoutConfig doc_cfg = cfg;
    docs.push_back(generate_synthetic_doc(rng, doc_cfg, i));
  }
  return docs;
}

// ---- rasterization -----------------------------------------------------

ImageRaster render_image(const Document& doc, int out_h, int out_w) {
  if (out_h < 2 || out_w < 2 || out_h % 2 != 0 || out_w % 2 != 0) {
    throw ShapeError("render_image: output dims must be even and >= 2, got " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  ImageRaster img;
  img.height = out_h;
  img.width = out_w;
  img.pixels.assign(static_cast<std::size_t>(3) * out_h * out_w, 1.0f);
  if (doc.page_w <= 0 || doc.page_h <= 0) return img;

  long clamps = 0;
  for (const auto& w : doc.words) {
    Box b = normalize_box(w.x1, w.y1, w.x3, w.y3, doc.page_w, doc.page_h, &clamps);
    int rx1 = static_cast<int>(std::floor(b.x1 * out_w));
    int ry1 = static_cast<int>(std::floor(b.y1 * out_h));
    int rx3 = std::max(rx1 + 1, static_cast<int>(std::ceil(b.x3 * out_w)));
    int ry3 = std::max(ry1 + 1, static_cast<int>(std::ceil(b.y3 * out_h)));
    rx3 = std::min(rx3, out_w);
    ry3 = std::min(ry3, out_h);
    rx1 = std::min(rx1, out_w - 1);
    ry1 = std::min(ry1, out_h - 1);
    for (int y = ry1; y < ry3; ++y) {
      for (int x = rx1; x < rx3; ++x) {
        // Alternating column strength keeps a glyph-like texture.
        float v = (x % 2 == 0) ? 0.15f : 0.35f;
        for (int c = 0; c < 3; ++c) {
          img.pixels[(static_cast<std::size_t>(c) * out_h + y) * out_w + x] = v;
        }
      }
    }
  }
  return img;
}

// ---- statistics ---------------------------------------------------------

CorpusStats corpus_stats(const std::vector<Document>& docs, int bucket_width) {
  if (docs.empty()) throw DataError("corpus_stats: empty corpus");
  if (bucket_width < 1) throw ShapeError("corpus_stats: bucket_width must be >= 1");
  CorpusStats st;
  st.n_docs = static_cast<long>(docs.size());
  std::vector<int> counts;
  counts.reserve(docs.size());
  for (const auto& d : docs) counts.push_back(static_cast<int>(d.words.size()));
  std::sort(counts.begin(), counts.end());
  st.min_words = counts.front();
  st.max_words = counts.back();
  st.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
  st.median = counts[counts.size() / 2];
  st.p95 = counts[static_cast<std::size_t>(0.95 * (counts.size() - 1))];

  int first_bucket = (st.min_words / bucket_width) * bucket_width;
  int last_bucket = (st.max_words / bucket_width) * bucket_width;
  for (int lo = first_bucket; lo <= last_bucket; lo += bucket_width) {
    st.buckets.push_back({lo, lo + bucket_width, 0});
  }
  for (int c : counts) st.buckets[(c - first_bucket) / bucket_width].count += 1;
  return st;
}

void write_stats_csv(const CorpusStats& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_stats_csv: cannot open " + path);
  out << "bucket_lo,bucket_hi,count\n";
  for (const auto& b : stats.buckets) out << b.lo << "," << b.hi << "," << b.count << "\n";
  if (!out) throw DataError("write_stats_csv: write failed for " + path);
}

}  // namespace deskdoc
