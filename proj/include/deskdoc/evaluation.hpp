#pragma once

#include <string>
#include <utility>
#include <vector>

#include "deskdoc/common.hpp"
#include "deskdoc/data.hpp"
#include "deskdoc/tokenizer.hpp"

namespace deskdoc {

// ---- metrics ---------------------------------------------------------------

// Lowercases and collapses runs of whitespace; the comparison form for all
// string metrics.
std::string normalize_answer(const std::string& s);

std::size_t levenshtein(const std::string& a, const std::string& b);

// Per-question score: max over golds of 1 - NL when NL < tau, else 0, where
// NL is the normalized edit distance between the lowercased strings.
double anls(const std::string& prediction, const std::vector<std::string>& golds,
            double tau = 0.5);

struct F1Score {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Exact-match (class, normalized text) pairing with multiset semantics.
// Both sides empty scores (1,1,1); exactly one side empty scores zeros.
F1Score entity_f1(const std::vector<std::pair<std::string, std::string>>& pred,
                  const std::vector<std::pair<std::string, std::string>>& gold);

// Exact string match after normalization.
double accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds);

// ---- task formats ------------------------------------------------------

enum class TaskKind { kVqa, kEntityExtraction, kSequenceLabeling };

TaskKind task_from_name(const std::string& name);
std::string task_name(TaskKind kind);

// The decoder-side list separator: the last sentinel, rendered by decode as
// its <extra_k> marker.
std::string separator_marker(const Vocab& vocab);

// One teacher-forcing / evaluation example. target_text may contain sentinel
// markers (the separator); encode_target turns it into ids.
struct TaskExample {
  std::vector<std::pair<std::string, Box>> input_words;  // prompts carry stated boxes
  std::string target_text;
  std::vector<std::string> golds;  // gold strings for scoring
  std::string key;                 // grouping key (question index / entity class)
  std::string prompt_text;         // sequence labeling: the prompted entity text
};

// Splits on sentinel markers so the separator becomes a real sentinel id.
std::vector<int> encode_target(const std::string& text, const Vocab& vocab);

// "question: {q} context:" prompt (zero boxes) followed by the document
// words; the stream-cut truncation later keeps the question, trailing
// context is dropped first.
TaskExample format_vqa(const Document& doc, std::size_t qa_index, const Vocab& vocab);

// "what are entities of {class}?" prompt; target joins the class's entities
// with the separator, in document order.
TaskExample format_entity_extraction(const Document& doc, const std::string& entity_class,
                                     const Vocab& vocab);

std::vector<std::string> parse_entities(const std::string& decoded, const Vocab& vocab);

// Maximal runs of identically-labelled words, skipping the "other" class.
struct LabeledEntity {
  std::string text;
  std::string label;
  int first_word = 0;
  int last_word = 0;
};
std::vector<LabeledEntity> extract_labeled_entities(const Document& doc);

// Entity text as the prompt (with its word boxes) plus the full document;
// target is "{entity text} {sep} {label}".
TaskExample format_sequence_labeling(const Document& doc, const LabeledEntity& entity,
                                     const Vocab& vocab);

// Label is whatever follows the last separator in the decoded output.
std::pair<std::string, std::string> parse_label_output(const std::string& decoded,
                                                       const Vocab& vocab);

std::vector<TaskExample> build_task_examples(const Document& doc, TaskKind kind, const Vocab& vocab);

// ---- OCR noise injection -------------------------------------------------

// Walks each word's characters; with probability p a character is replaced
// by a visually-plausible confusion (o/0, l/1, s/5, a/4, e/3, uniform letter
// otherwise) and the rest of the word is left alone, so a word never takes
// more than one edit. Boxes and word count are untouched.
std::vector<Word> inject_ocr_noise(const std::vector<Word>& words, double p, Rng& rng);

Document with_ocr_noise(const Document& doc, double p, Rng& rng);

}  // namespace deskdoc
