#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deskdoc/common.hpp"
#include "deskdoc/data.hpp"
#include "deskdoc/evaluation.hpp"
#include "deskdoc/model.hpp"
#include "deskdoc/tensor.hpp"
#include "deskdoc/tokenizer.hpp"

namespace deskdoc {

// ---- span corruption -------------------------------------------------------

struct Span {
  int start = 0;
  int len = 0;
};

struct SpanCorruption {
  std::vector<int> input_ids;         // corrupted stream (each span collapsed to a sentinel)
  std::vector<int> origin;            // original stream index per position (span start for sentinels)
  std::vector<std::uint8_t> masked;   // 1 on sentinel positions
  std::vector<int> target_ids;        // <extra_0> span0 <extra_1> span1 ... <eos>
};

// Replaces the given (sorted, disjoint) spans with sentinels and builds the
// sentinel-delimited reconstruction target.
SpanCorruption apply_spans(const std::vector<int>& ids, const std::vector<Span>& spans,
                           const Vocab& vocab);

// T5-style segmentation: noise_density of the tokens is covered by
// round(count / mean_span_len) contiguous spans at random positions.
std::vector<Span> sample_spans(int length, double noise_density, double mean_span_len,
                               int max_spans, Rng& rng);

SpanCorruption corrupt_spans(const std::vector<int>& ids, double noise_density,
                             double mean_span_len, const Vocab& vocab, Rng& rng);

// Replaces the six spatial indices of every masked position with the
// reserved null bin (index n_bins), whose embedding contribution is a frozen
// zero.
void mask_spatial(std::vector<SpatialIndices>& spatial, const std::vector<std::uint8_t>& masked,
                  int n_bins);

// ---- batches ---------------------------------------------------------------

struct LossWeights {
  double k = 1.0;       // token-to-line
  double l = 1.0;       // token-to-grid
  double m_coef = 1.0;  // denoising LM
  void validate() const;
};

struct PretrainBatch {
  std::string doc_id;
  TextInput text;                     // corrupted ids, spatial (masked positions nulled), valid
  std::vector<std::uint8_t> masked;   // per text position
  std::vector<int> grid_targets;      // per text position, kGridIgnored/-1 excluded from loss
  std::vector<TokenPair> line_pairs;  // sampled pairs with line-distance classes
  std::vector<int> decoder_input;     // PAD-as-BOS + target[:-1]
  std::vector<int> decoder_targets;
  ImageRaster image;                  // empty when the model has no visual branch
};

struct BatchOptions {
  double noise_density = 0.15;
  double mean_span_len = 3.0;
  int max_pairs = 32;
  bool class_balanced_pairs = true;
};

// Labels come from pre-corruption geometry: a sentinel inherits the box and
// line of the first token of its span while its spatial inputs are nulled.
PretrainBatch build_pretrain_batch(const Document& doc, const Vocab& vocab, const ModelConfig& cfg,
                                   const BatchOptions& opt, Rng& rng);

// Uncorrupted input for fine-tuning and evaluation.
TextInput text_input_from_words(const std::vector<std::pair<std::string, Box>>& words,
                                const Vocab& vocab, const ModelConfig& cfg);

// ---- losses and steps --------------------------------------------------

template <typename S>
struct PretrainLosses {
  Tensor<S> tol, tog, dlm, final_loss;
  long grid_correct = 0, grid_total = 0;
  long line_correct = 0, line_total = 0;
};

template <typename S>
PretrainLosses<S> compute_pretrain_losses(const Model<S>& model, const PretrainBatch& batch,
                                          const LossWeights& w);

struct StepResult {
  double l_tol = 0, l_tog = 0, l_dlm = 0, l_final = 0;
  double grid_acc = -1, line_acc = -1;  // -1 when the batch had no targets
  bool applied = false;
};

// One training step: forward, combined backward, clipped AdamW update.
// A non-finite loss or gradient refuses the update (applied = false) and
// leaves model and optimizer state untouched.
template <typename S>
StepResult pretrain_step(Model<S>& model, const PretrainBatch& batch, const LossWeights& w,
                         AdamW<S>& opt);

// ---- loops -----------------------------------------------------------------

struct PretrainHyper {
  double lr = 5e-5;
  int warmup = 1000;  // linear warm-up steps, then constant
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  int steps = 2000;
  std::uint64_t seed = 0;
  BatchOptions batch;
  LossWeights weights;
  int checkpoint_every = 0;  // 0: only the final checkpoint
};

struct LogRow {
  int step = 0;
  StepResult result;
  double lr = 0;
};

using StepCallback = std::function<void(const LogRow&, Model<float>&)>;

// Epochs over the seeded-shuffled corpus until the step budget is reached.
// Per-document rngs derive from (seed, doc id), so runs are reproducible.
Model<float> run_pretrain_loop(const std::vector<Document>& corpus, const Vocab& vocab,
                               const ModelConfig& cfg, const PretrainHyper& hyper,
                               const StepCallback& on_step);

// run_pretrain_loop plus artifacts: <out_dir>/log.csv and checkpoint
// directories (ckpt-final, optional ckpt-step-NNNNNN) with vocab.txt inside.
std::string pretrain(const std::vector<Document>& corpus, const Vocab& vocab,
                     const ModelConfig& cfg, const PretrainHyper& hyper,
                     const std::string& out_dir);

struct FinetuneHyper {
  double lr = 1e-5;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  int steps = 1000;
  std::uint64_t seed = 0;
};

using FinetuneCallback = std::function<void(int step, double loss)>;

// Seq2seq cross-entropy on teacher-forced targets from the task formatters.
void finetune(Model<float>& model, const Vocab& vocab, const std::vector<Document>& dataset,
              TaskKind kind, const FinetuneHyper& hyper, const FinetuneCallback& on_step = {});

// ---- inference / evaluation ----------------------------------------------

template <typename S>
std::vector<int> greedy_decode(const Model<S>& model, const Tensor<S>& encoder_states,
                               const std::vector<std::uint8_t>& encoder_valid, int max_len);

template <typename S>
Tensor<S> encode_document_input(const Model<S>& model, const TextInput& text,
                                const ImageRaster& image, std::vector<std::uint8_t>* valid_out);

struct PredictionRow {
  std::string id;
  std::string pred;
  std::string gold;
  double score = 0;
};

struct EvalSummary {
  std::string metric_name;
  double metric_value = 0;
  long n_examples = 0;
  std::vector<PredictionRow> rows;
};

// Greedy-decodes every task example and scores per task: mean ANLS for vqa,
// entity-level F1 for entity extraction and sequence labeling. noise_p > 0
// corrupts the OCR words of the evaluation inputs only.
EvalSummary evaluate_task(Model<float>& model, const Vocab& vocab,
                          const std::vector<Document>& dataset, TaskKind kind, double noise_p,
                          std::uint64_t seed);

void write_predictions_jsonl(const EvalSummary& summary, const std::string& path);
void write_summary_csv(const EvalSummary& summary, const std::string& path);

}  // namespace deskdoc
