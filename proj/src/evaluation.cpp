#include "deskdoc/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace deskdoc {

std::string normalize_answer(const std::string& s) {
  std::string out;
  bool in_space = true;  // swallow leading whitespace
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double anls(const std::string& prediction, const std::vector<std::string>& golds, double tau) {
  if (golds.empty()) throw DataError("anls: gold answer set must be non-empty");
  std::string pred = normalize_answer(prediction);
  double best = 0.0;
  for (const auto& g : golds) {
    std::string gold = normalize_answer(g);
    std::size_t longer = std::max(pred.size(), gold.size());
    double nl = longer == 0 ? 0.0 : static_cast<double>(levenshtein(pred, gold)) / longer;
    double score = nl < tau ? 1.0 - nl : 0.0;
    best = std::max(best, score);
  }
  return best;
}

F1Score entity_f1(const std::vector<std::pair<std::string, std::string>>& pred,
                  const std::vector<std::pair<std::string, std::string>>& gold) {
  if (pred.empty() && gold.empty()) return {1.0, 1.0, 1.0};
  if (pred.empty() || gold.empty()) return {0.0, 0.0, 0.0};
  std::map<std::pair<std::string, std::string>, long> gold_count;
  for (const auto& [cls, text] : gold) ++gold_count[{normalize_answer(cls), normalize_answer(text)}];
  long matches = 0;
  for (const auto& [cls, text] : pred) {
    auto it = gold_count.find({normalize_answer(cls), normalize_answer(text)});
    if (it != gold_count.end() && it->second > 0) {
      --it->second;
      ++matches;
    }
  }
  F1Score s;
  s.precision = static_cast<double>(matches) / pred.size();
  s.recall = static_cast<double>(matches) / gold.size();
  s.f1 = (s.precision + s.recall) > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
  if (preds.size() != golds.size()) throw ShapeError("accuracy: length mismatch");
  if (preds.empty()) return 0.0;
  long hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (normalize_answer(preds[i]) == normalize_answer(golds[i])) ++hits;
  }
  return static_cast<double>(hits) / preds.size();
}

// ---- task formats ------------------------------------------------------

TaskKind task_from_name(const std::string& name) {
  if (name == "vqa") return TaskKind::kVqa;
  if (name == "entity" || name == "entity_extraction") return TaskKind::kEntityExtraction;
  if (name == "label" || name == "sequence_labeling") return TaskKind::kSequenceLabeling;
  throw DataError("unknown task: " + name + " (expected vqa|entity|label)");
}

std::string task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kVqa: return "vqa";
    case TaskKind::kEntityExtraction: return "entity";
    case TaskKind::kSequenceLabeling: return "label";
  }
  return "vqa";
}

std::string separator_marker(const Vocab& vocab) {
  if (vocab.num_sentinels() < 2) throw DataError("separator_marker: vocab has no spare sentinel");
  return Vocab::sentinel_marker(vocab.num_sentinels() - 1);
}

std::vector<int> encode_target(const std::string& text, const Vocab& vocab) {
  std::vector<int> ids;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find("<extra_", pos);
    if (open == std::string::npos) {
      auto tail = vocab.encode(text.substr(pos));
      ids.insert(ids.end(), tail.begin(), tail.end());
      break;
    }
    std::size_t close = text.find('>', open);
    if (close == std::string::npos) {
      auto tail = vocab.encode(text.substr(pos));
      ids.insert(ids.end(), tail.begin(), tail.end());
      break;
    }
    if (open > pos) {
      auto part = vocab.encode(text.substr(pos, open - pos));
      ids.insert(ids.end(), part.begin(), part.end());
    }
    int k = -1;
    try {
      k = std::stoi(text.substr(open + 7, close - open - 7));
    } catch (...) {
      k = -1;
    }
    if (k >= 0 && k < vocab.num_sentinels()) {
      ids.push_back(vocab.sentinel_id(k));
    } else {
      auto part = vocab.encode(text.substr(open, close - open + 1));
      ids.insert(ids.end(), part.begin(), part.end());
    }
    pos = close + 1;
  }
  return ids;
}

namespace {

void append_prompt_words(std::vector<std::pair<std::string, Box>>& out, const std::string& prompt) {
  std::istringstream ss(prompt);
  std::string w;
  while (ss >> w) out.push_back({w, Box{}});
}

void append_document_words(std::vector<std::pair<std::string, Box>>& out, const Document& doc) {
  auto words = normalized_words(doc);
  out.insert(out.end(), words.begin(), words.end());
}

}  // namespace

TaskExample format_vqa(const Document& doc, std::size_t qa_index, const Vocab& vocab) {
  (void)vocab;
  if (!doc.has_qa()) throw DataError("format_vqa: document " + doc.id + " has no qa annotations");
  if (qa_index >= doc.qa.size()) throw DataError("format_vqa: qa index out of range");
  const QaPair& qa = doc.qa[qa_index];
  TaskExample ex;
  append_prompt_words(ex.input_words, "question: " + qa.question + " context:");
  append_document_words(ex.input_words, doc);
  ex.target_text = qa.answers.front();
  ex.golds = qa.answers;
  ex.key = "qa" + std::to_string(qa_index);
  return ex;
}

TaskExample format_entity_extraction(const Document& doc, const std::string& entity_class,
                                     const Vocab& vocab) {
  if (!doc.has_entities()) {
    throw DataError("format_entity_extraction: document " + doc.id + " has no entities");
  }
  TaskExample ex;
  append_prompt_words(ex.input_words, "what are entities of " + entity_class + "?");
  append_document_words(ex.input_words, doc);
  std::string sep = separator_marker(vocab);
  auto it = doc.entities.find(entity_class);
  std::string target;
  if (it != doc.entities.end()) {
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (i) target += " " + sep + " ";
      target += it->second[i];
      ex.golds.push_back(it->second[i]);
    }
  }
  ex.target_text = target;  // empty when the class has no entities
  ex.key = entity_class;
  return ex;
}

std::vector<std::string> parse_entities(const std::string& decoded, const Vocab& vocab) {
  std::string sep = separator_marker(vocab);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t hit = decoded.find(sep, pos);
    std::string piece =
        hit == std::string::npos ? decoded.substr(pos) : decoded.substr(pos, hit - pos);
    std::string trimmed = normalize_answer(piece);
    if (!trimmed.empty()) out.push_back(trimmed);
    if (hit == std::string::npos) break;
    pos = hit + sep.size();
  }
  return out;
}

std::vector<LabeledEntity> extract_labeled_entities(const Document& doc) {
  if (!doc.has_word_labels()) {
    throw DataError("extract_labeled_entities: document " + doc.id + " has no word_labels");
  }
  std::vector<LabeledEntity> out;
  std::size_t i = 0;
  while (i < doc.words.size()) {
    const std::string& label = doc.word_labels[i];
    if (label == "other") {
      ++i;
      continue;
    }
    LabeledEntity ent;
    ent.label = label;
    ent.first_word = static_cast<int>(i);
    while (i < doc.words.size() && doc.word_labels[i] == label) {
      if (!ent.text.empty()) ent.text += " ";
      ent.text += doc.words[i].text;
      ent.last_word = static_cast<int>(i);
      ++i;
    }
    out.push_back(std::move(ent));
  }
  return out;
}

TaskExample format_sequence_labeling(const Document& doc, const LabeledEntity& entity,
                                     const Vocab& vocab) {
  TaskExample ex;
  auto words = normalized_words(doc);
  for (int w = entity.first_word; w <= entity.last_word; ++w) {
    ex.input_words.push_back(words[w]);  // prompt keeps the entity's own boxes
  }
  for (const auto& w : words) ex.input_words.push_back(w);
  ex.target_text = entity.text + " " + separator_marker(vocab) + " " + entity.label;
  ex.golds = {entity.label};
  ex.key = "w" + std::to_string(entity.first_word);
  ex.prompt_text = entity.text;
  return ex;
}

std::pair<std::string, std::string> parse_label_output(const std::string& decoded,
                                                       const Vocab& vocab) {
  std::string sep = separator_marker(vocab);
  std::size_t hit = decoded.rfind(sep);
  if (hit == std::string::npos) return {normalize_answer(decoded), ""};
  return {normalize_answer(decoded.substr(0, hit)),
          normalize_answer(decoded.substr(hit + sep.size()))};
}

std::vector<TaskExample> build_task_examples(const Document& doc, TaskKind kind, const Vocab& vocab) {
  std::vector<TaskExample> out;
  switch (kind) {
    case TaskKind::kVqa: {
      if (!doc.has_qa()) throw DataError("task vqa: document " + doc.id + " has no qa annotations");
      for (std::size_t i = 0; i < doc.qa.size(); ++i) out.push_back(format_vqa(doc, i, vocab));
      break;
    }
    case TaskKind::kEntityExtraction: {
      if (!doc.has_entities()) {
        throw DataError("task entity: document " + doc.id + " has no entities");
      }
      for (const auto& [cls, spans] : doc.entities) {
        out.push_back(format_entity_extraction(doc, cls, vocab));
      }
      break;
    }
    case TaskKind::kSequenceLabeling: {
      for (const auto& ent : extract_labeled_entities(doc)) {
        out.push_back(format_sequence_labeling(doc, ent, vocab));
      }
      break;
    }
  }
  return out;
}

// ---- OCR noise injection -------------------------------------------------

namespace {

char confusion_for(char c, Rng& rng) {
  switch (c) {
    case 'o': return '0';
    case '0': return 'o';
    case 'l': return '1';
    case '1': return 'l';
    case 's': return '5';
    case '5': return 's';
    case 'a': return '4';
    case '4': return 'a';
    case 'e': return '3';
    case '3': return 'e';
    default: {
      static const char letters[] = "abcdefghijklmnopqrstuvwxyz";
      char pick = letters[uniform_u64(rng, 26)];
      if (pick == c) pick = letters[(pick - 'a' + 1) % 26];
      return pick;
    }
  }
}

}  // namespace

std::vector<Word> inject_ocr_noise(const std::vector<Word>& words, double p, Rng& rng) {
  if (p < 0.0 || p > 1.0) throw ShapeError("inject_ocr_noise: p must be in [0,1]");
  std::vector<Word> out = words;
  if (p == 0.0) return out;
  for (auto& w : out) {
    for (std::size_t i = 0; i < w.text.size(); ++i) {
      if (uniform_real(rng) < p) {
        w.text[i] = confusion_for(w.text[i], rng);
        break;  // at most one error per word
      }
    }
  }
  return out;
}

Document with_ocr_noise(const Document& doc, double p, Rng& rng) {
  Document out = doc;
  out.words = inject_ocr_noise(doc.words, p, rng);
  return out;
}

}  // namespace deskdoc
