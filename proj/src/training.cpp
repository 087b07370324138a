#include "deskdoc/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace deskdoc {

namespace fs = std::filesystem;

// ---- span corruption -------------------------------------------------------

SpanCorruption apply_spans(const std::vector<int>& ids, const std::vector<Span>& spans,
                           const Vocab& vocab) {
  if (static_cast<int>(spans.size()) > vocab.num_sentinels()) {
    throw ShapeError("apply_spans: more spans than sentinel tokens");
  }
  const int n = static_cast<int>(ids.size());
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const Span& s = spans[k];
    if (s.start < 0 || s.len < 1 || s.start + s.len > n) throw ShapeError("apply_spans: span out of range");
    if (k > 0 && spans[k - 1].start + spans[k - 1].len > s.start) {
      throw ShapeError("apply_spans: spans must be sorted and disjoint");
    }
  }
  SpanCorruption out;
  std::size_t next_span = 0;
  for (int i = 0; i < n;) {
    if (next_span < spans.size() && spans[next_span].start == i) {
      out.input_ids.push_back(vocab.sentinel_id(static_cast<int>(next_span)));
      out.origin.push_back(i);
      out.masked.push_back(1);
      out.target_ids.push_back(vocab.sentinel_id(static_cast<int>(next_span)));
      for (int j = 0; j < spans[next_span].len; ++j) out.target_ids.push_back(ids[i + j]);
      i += spans[next_span].len;
      ++next_span;
    } else {
      out.input_ids.push_back(ids[i]);
      out.origin.push_back(i);
      out.masked.push_back(0);
      ++i;
    }
  }
  out.target_ids.push_back(Vocab::kEos);
  return out;
}

namespace {

// Random partition of n items into k non-empty ordered parts.
std::vector<int> random_partition(int n, int k, Rng& rng) {
  std::vector<int> cuts;  // k-1 distinct cut points in [1, n-1]
  if (k > 1) {
    std::vector<int> candidates(n - 1);
    std::iota(candidates.begin(), candidates.end(), 1);
    shuffle_vec(candidates, rng);
    cuts.assign(candidates.begin(), candidates.begin() + (k - 1));
    std::sort(cuts.begin(), cuts.end());
  }
  std::vector<int> parts;
  int prev = 0;
  for (int c : cuts) {
    parts.push_back(c - prev);
    prev = c;
  }
  parts.push_back(n - prev);
  return parts;
}

}  // namespace

std::vector<Span> sample_spans(int length, double noise_density, double mean_span_len,
                               int max_spans, Rng& rng) {
  if (noise_density < 0.0 || noise_density >= 1.0) {
    throw ShapeError("sample_spans: noise_density must be in [0, 1)");
  }
  if (mean_span_len < 1.0) throw ShapeError("sample_spans: mean_span_len must be >= 1");
  if (length <= 1 || noise_density == 0.0) return {};

  int num_noise = static_cast<int>(std::lround(length * noise_density));
  num_noise = std::clamp(num_noise, noise_density > 0.0 ? 1 : 0, length - 1);
  int num_spans = std::max(1, static_cast<int>(std::lround(num_noise / mean_span_len)));
  num_spans = std::min({num_spans, num_noise, length - num_noise, max_spans});
  if (num_spans < 1) return {};

  std::vector<int> noise_parts = random_partition(num_noise, num_spans, rng);
  std::vector<int> clear_parts = random_partition(length - num_noise, num_spans, rng);
  std::vector<Span> spans;
  int pos = 0;
  for (int s = 0; s < num_spans; ++s) {
    pos += clear_parts[s];
    spans.push_back({pos, noise_parts[s]});
    pos += noise_parts[s];
  }
  return spans;
}

SpanCorruption corrupt_spans(const std::vector<int>& ids, double noise_density,
                             double mean_span_len, const Vocab& vocab, Rng& rng) {
  auto spans = sample_spans(static_cast<int>(ids.size()), noise_density, mean_span_len,
                            vocab.num_sentinels(), rng);
  return apply_spans(ids, spans, vocab);
}

void mask_spatial(std::vector<SpatialIndices>& spatial, const std::vector<std::uint8_t>& masked,
                  int n_bins) {
  if (spatial.size() != masked.size()) throw ShapeError("mask_spatial: size mismatch");
  for (std::size_t i = 0; i < spatial.size(); ++i) {
    if (!masked[i]) continue;
    spatial[i] = SpatialIndices{n_bins, n_bins, n_bins, n_bins, n_bins, n_bins};
  }
}

// ---- batches ---------------------------------------------------------------

void LossWeights::validate() const {
  if (k < 0 || l < 0 || m_coef < 0) throw ShapeError("LossWeights: weights must be nonnegative");
  if (k == 0 && l == 0 && m_coef == 0) throw ShapeError("LossWeights: at least one weight must be positive");
}

TextInput text_input_from_words(const std::vector<std::pair<std::string, Box>>& words,
                                const Vocab& vocab, const ModelConfig& cfg) {
  auto tokenized = encode_words(words, vocab, cfg.max_seq);
  TokenSequence seq = to_sequence(tokenized, cfg.max_seq);
  TextInput text;
  text.ids = seq.ids;
  text.valid.assign(cfg.max_seq, 0);
  text.spatial.resize(cfg.max_seq);
  for (int i = 0; i < cfg.max_seq; ++i) {
    text.valid[i] = i < seq.n_real ? 1 : 0;
    text.spatial[i] = quantize_spatial(seq.boxes[i], cfg.n_bins);
  }
  return text;
}

PretrainBatch build_pretrain_batch(const Document& doc, const Vocab& vocab, const ModelConfig& cfg,
                                   const BatchOptions& opt, Rng& rng) {
  PretrainBatch batch;
  batch.doc_id = doc.id;

  auto words = normalized_words(doc);
  std::vector<Box> word_boxes;
  word_boxes.reserve(words.size());
  for (const auto& [text, box] : words) word_boxes.push_back(box);
  std::vector<int> word_lines = assign_lines(word_boxes);

  auto tokenized = encode_words(words, vocab, cfg.max_seq);
  std::vector<int> stream_ids;
  std::vector<Box> stream_boxes;
  std::vector<int> stream_lines;
  for (const auto& tw : tokenized) {
    for (int id : tw.subword_ids) {
      stream_ids.push_back(id);
      stream_boxes.push_back(tw.box);
      stream_lines.push_back(word_lines.empty() ? 0 : word_lines[tw.word_index]);
    }
  }

  SpanCorruption corr =
      corrupt_spans(stream_ids, opt.noise_density, opt.mean_span_len, vocab, rng);
  const int n_real = static_cast<int>(corr.input_ids.size());

  batch.text.ids.assign(cfg.max_seq, Vocab::kPad);
  batch.text.valid.assign(cfg.max_seq, 0);
  batch.text.spatial.assign(cfg.max_seq, SpatialIndices{});
  batch.masked.assign(cfg.max_seq, 0);
  batch.grid_targets.assign(cfg.max_seq, kGridIgnored);

  std::vector<int> position_lines(n_real, 0);
  for (int i = 0; i < n_real; ++i) {
    batch.text.ids[i] = corr.input_ids[i];
    batch.text.valid[i] = 1;
    batch.masked[i] = corr.masked[i];
    const Box& box = stream_boxes[corr.origin[i]];  // pre-corruption geometry
    batch.text.spatial[i] = quantize_spatial(box, cfg.n_bins);
    batch.grid_targets[i] = grid_label(box, cfg.grid);
    position_lines[i] = stream_lines[corr.origin[i]];
  }
  for (int i = n_real; i < cfg.max_seq; ++i) {
    batch.text.spatial[i] = quantize_spatial(Box{}, cfg.n_bins);  // PAD: zero box
  }
  mask_spatial(batch.text.spatial, batch.masked, cfg.n_bins);

  if (n_real >= 2 && opt.max_pairs > 0) {
    batch.line_pairs =
        sample_token_pairs(position_lines, opt.max_pairs, rng, opt.class_balanced_pairs);
  }

  // Teacher forcing with PAD as the start token.
  std::vector<int> target = corr.target_ids;
  if (static_cast<int>(target.size()) > cfg.max_seq) {
    target.resize(cfg.max_seq);
    target.back() = Vocab::kEos;
  }
  batch.decoder_targets = target;
  batch.decoder_input.assign(1, Vocab::kPad);
  batch.decoder_input.insert(batch.decoder_input.end(), target.begin(), target.end() - 1);

  if (cfg.image_tokens > 0) batch.image = render_image(doc, cfg.raster_h, cfg.raster_w);
  return batch;
}

// ---- losses and steps --------------------------------------------------

template <typename S>
Tensor<S> encode_document_input(const Model<S>& model, const TextInput& text,
                                const ImageRaster& image, std::vector<std::uint8_t>* valid_out) {
  Tensor<S> t_rows = model.embed_text(text);
  AssembledInput<S> assembled;
  if (model.config().image_tokens > 0) {
    assembled = model.assemble_input(t_rows, model.embed_visual(image), text.valid);
  } else {
    assembled = model.assemble_text_only(t_rows, text.valid);
  }
  if (valid_out) *valid_out = assembled.valid;
  return model.encode(assembled);
}

template <typename S>
PretrainLosses<S> compute_pretrain_losses(const Model<S>& model, const PretrainBatch& batch,
                                          const LossWeights& w) {
  w.validate();
  const ModelConfig& cfg = model.config();
  PretrainLosses<S> out;

  std::vector<std::uint8_t> enc_valid;
  Tensor<S> states = encode_document_input(model, batch.text, batch.image, &enc_valid);

  // Token-to-grid.
  Tensor<S> grid_logits = model.head_token_to_grid(states, cfg.max_seq);
  out.tog = cross_entropy(grid_logits, batch.grid_targets, kGridIgnored);
  {
    const auto& lv = grid_logits.values();
    const int cells = cfg.grid.cells();
    for (int i = 0; i < cfg.max_seq; ++i) {
      if (batch.grid_targets[i] == kGridIgnored) continue;
      int arg = 0;
      for (int c = 1; c < cells; ++c) {
        if (lv[static_cast<std::size_t>(i) * cells + c] > lv[static_cast<std::size_t>(i) * cells + arg]) arg = c;
      }
      ++out.grid_total;
      if (arg == batch.grid_targets[i]) ++out.grid_correct;
    }
  }

  // Token-to-line over the sampled pairs.
  if (!batch.line_pairs.empty()) {
    Tensor<S> line_logits = model.head_token_to_line(states, batch.line_pairs, cfg.max_seq);
    std::vector<int> classes;
    classes.reserve(batch.line_pairs.size());
    for (const auto& p : batch.line_pairs) classes.push_back(p.cls);
    out.tol = cross_entropy(line_logits, classes, -1);
    const auto& lv = line_logits.values();
    for (std::size_t i = 0; i < classes.size(); ++i) {
      int arg = 0;
      for (int c = 1; c < 3; ++c)
        if (lv[i * 3 + c] > lv[i * 3 + arg]) arg = c;
      ++out.line_total;
      if (arg == classes[i]) ++out.line_correct;
    }
  } else {
    out.tol = Tensor<S>::scalar(S(0));
  }

  // Denoising LM.
  Tensor<S> lm_logits = model.decode(states, enc_valid, batch.decoder_input);
  out.dlm = cross_entropy(lm_logits, batch.decoder_targets, -1);

  out.final_loss = add(add(scale(out.tol, static_cast<S>(w.k)), scale(out.tog, static_cast<S>(w.l))),
                       scale(out.dlm, static_cast<S>(w.m_coef)));
  return out;
}

template <typename S>
StepResult pretrain_step(Model<S>& model, const PretrainBatch& batch, const LossWeights& w,
                         AdamW<S>& opt) {
  StepResult res;
  PretrainLosses<S> losses = compute_pretrain_losses(model, batch, w);
  res.l_tol = static_cast<double>(losses.tol.item());
  res.l_tog = static_cast<double>(losses.tog.item());
  res.l_dlm = static_cast<double>(losses.dlm.item());
  res.l_final = static_cast<double>(losses.final_loss.item());
  if (losses.grid_total > 0) res.grid_acc = static_cast<double>(losses.grid_correct) / losses.grid_total;
  if (losses.line_total > 0) res.line_acc = static_cast<double>(losses.line_correct) / losses.line_total;
  if (!std::isfinite(res.l_final)) {
    res.applied = false;  // state untouched
    return res;
  }
  model.zero_grad();
  backward(losses.final_loss);
  auto params = model.parameters();
  res.applied = opt.step(params);
  return res;
}

// ---- loops -----------------------------------------------------------------

Model<float> run_pretrain_loop(const std::vector<Document>& corpus, const Vocab& vocab,
                               const ModelConfig& cfg, const PretrainHyper& hyper,
                               const StepCallback& on_step) {
  if (corpus.empty()) throw DataError("pretrain: corpus is empty");
  hyper.weights.validate();
  if (cfg.vocab_size != vocab.size()) {
    throw ShapeError("pretrain: cfg.vocab_size does not match the tokenizer");
  }

  Rng init_rng(derive_seed(hyper.seed, "model-init"));
  Model<float> model(cfg, init_rng);

  AdamWOptions<float> opts;
  opts.lr = static_cast<float>(hyper.lr);
  opts.weight_decay = static_cast<float>(hyper.weight_decay);
  opts.clip_norm = static_cast<float>(hyper.clip_norm);
  AdamW<float> opt(opts);

  int step = 0;
  for (int epoch = 0; step < hyper.steps; ++epoch) {
    std::vector<int> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    Rng epoch_rng(derive_seed(hyper.seed, "epoch-" + std::to_string(epoch)));
    shuffle_vec(order, epoch_rng);
    for (int idx : order) {
      if (step >= hyper.steps) break;
      ++step;
      const Document& doc = corpus[idx];
      Rng doc_rng(derive_seed(hyper.seed, doc.id));
      PretrainBatch batch = build_pretrain_batch(doc, vocab, cfg, hyper.batch, doc_rng);

      double lr = hyper.lr;
      if (hyper.warmup > 0 && step < hyper.warmup) lr = hyper.lr * step / hyper.warmup;
      opt.options().lr = static_cast<float>(lr);

      StepResult res = pretrain_step(model, batch, hyper.weights, opt);
      if (!res.applied) {
        throw NumericError("pretrain: non-finite loss or gradient at step " + std::to_string(step) +
                           " on document " + doc.id + "; step refused");
      }
      if (on_step) on_step(LogRow{step, res, lr}, model);
    }
  }
  return model;
}

namespace {

std::string format_metric(double v) {
  std::ostringstream ss;
  ss.precision(10);
  ss << v;
  return ss.str();
}

}  // namespace

std::string pretrain(const std::vector<Document>& corpus, const Vocab& vocab,
                     const ModelConfig& cfg, const PretrainHyper& hyper,
                     const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream log(fs::path(out_dir) / "log.csv", std::ios::binary);
  if (!log) throw DataError("pretrain: cannot write log in " + out_dir);
  log << "step,L_tol,L_tog,L_dlm,L_final,grid_acc,line_acc,lr\n";

  auto save_with_vocab = [&](Model<float>& model, const std::string& name, int step) {
    std::string dir = (fs::path(out_dir) / name).string();
    save_checkpoint(model, dir, step);
    vocab.save((fs::path(dir) / "vocab.txt").string());
  };

  Model<float> model = run_pretrain_loop(
      corpus, vocab, cfg, hyper, [&](const LogRow& row, Model<float>& m) {
        log << row.step << "," << format_metric(row.result.l_tol) << ","
            << format_metric(row.result.l_tog) << "," << format_metric(row.result.l_dlm) << ","
            << format_metric(row.result.l_final) << "," << format_metric(row.result.grid_acc) << ","
            << format_metric(row.result.line_acc) << "," << format_metric(row.lr) << "\n";
        if (hyper.checkpoint_every > 0 && row.step % hyper.checkpoint_every == 0 &&
            row.step < hyper.steps) {
          char name[40];
          std::snprintf(name, sizeof(name), "ckpt-step-%06d", row.step);
          save_with_vocab(m, name, row.step);
        }
      });
  log.close();
  save_with_vocab(model, "ckpt-final", hyper.steps);
  return (fs::path(out_dir) / "ckpt-final").string();
}

void finetune(Model<float>& model, const Vocab& vocab, const std::vector<Document>& dataset,
              TaskKind kind, const FinetuneHyper& hyper, const FinetuneCallback& on_step) {
  if (dataset.empty()) throw DataError("finetune: dataset is empty");
  const ModelConfig& cfg = model.config();

  struct Prepared {
    TextInput text;
    int doc_index = 0;
    std::vector<int> dec_input, dec_targets;
  };
  std::vector<Prepared> examples;
  std::vector<ImageRaster> images(dataset.size());
  for (std::size_t d = 0; d < dataset.size(); ++d) {
    if (cfg.image_tokens > 0) images[d] = render_image(dataset[d], cfg.raster_h, cfg.raster_w);
    for (const auto& ex : build_task_examples(dataset[d], kind, vocab)) {
      Prepared p;
      p.doc_index = static_cast<int>(d);
      p.text = text_input_from_words(ex.input_words, vocab, cfg);
      std::vector<int> target = encode_target(ex.target_text, vocab);
      target.push_back(Vocab::kEos);
      if (static_cast<int>(target.size()) > cfg.max_seq) {
        target.resize(cfg.max_seq);
        target.back() = Vocab::kEos;
      }
      p.dec_targets = target;
      p.dec_input.assign(1, Vocab::kPad);
      p.dec_input.insert(p.dec_input.end(), target.begin(), target.end() - 1);
      examples.push_back(std::move(p));
    }
  }
  if (examples.empty()) throw DataError("finetune: no examples for task " + task_name(kind));

  AdamWOptions<float> opts;
  opts.lr = static_cast<float>(hyper.lr);
  opts.weight_decay = static_cast<float>(hyper.weight_decay);
  opts.clip_norm = static_cast<float>(hyper.clip_norm);
  AdamW<float> opt(opts);

  int step = 0;
  for (int epoch = 0; step < hyper.steps; ++epoch) {
    std::vector<int> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng epoch_rng(derive_seed(hyper.seed, "ft-epoch-" + std::to_string(epoch)));
    shuffle_vec(order, epoch_rng);
    for (int idx : order) {
      if (step >= hyper.steps) break;
      ++step;
      const Prepared& ex = examples[idx];
      std::vector<std::uint8_t> enc_valid;
      Tensor<float> states = encode_document_input(model, ex.text, images[ex.doc_index], &enc_valid);
      Tensor<float> logits = model.decode(states, enc_valid, ex.dec_input);
      Tensor<float> loss = cross_entropy(logits, ex.dec_targets, -1);
      double loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value)) {
        throw NumericError("finetune: non-finite loss at step " + std::to_string(step));
      }
      model.zero_grad();
      backward(loss);
      auto params = model.parameters();
      if (!opt.step(params)) {
        throw NumericError("finetune: non-finite gradients at step " + std::to_string(step));
      }
      if (on_step) on_step(step, loss_value);
    }
  }
}

// ---- inference / evaluation ----------------------------------------------

template <typename S>
std::vector<int> greedy_decode(const Model<S>& model, const Tensor<S>& encoder_states,
                               const std::vector<std::uint8_t>& encoder_valid, int max_len) {
  std::vector<int> prefix{Vocab::kPad};
  std::vector<int> out;
  for (int t = 0; t < max_len && static_cast<int>(prefix.size()) < model.config().max_seq; ++t) {
    Tensor<S> logits = model.decode_step(encoder_states, encoder_valid, prefix);
    const auto& lv = logits.values();
    int arg = 0;
    for (std::size_t c = 1; c < lv.size(); ++c)
      if (lv[c] > lv[arg]) arg = static_cast<int>(c);
    if (arg == Vocab::kEos) break;
    out.push_back(arg);
    prefix.push_back(arg);
  }
  return out;
}

EvalSummary evaluate_task(Model<float>& model, const Vocab& vocab,
                          const std::vector<Document>& dataset, TaskKind kind, double noise_p,
                          std::uint64_t seed) {
  const ModelConfig& cfg = model.config();
  EvalSummary summary;
  double anls_sum = 0;
  long anls_n = 0;
  std::vector<std::pair<std::string, std::string>> pred_items, gold_items;

  for (const Document& original : dataset) {
    Document doc = original;
    if (noise_p > 0) {
      Rng noise_rng(derive_seed(seed, original.id + "#noise"));
      doc = with_ocr_noise(original, noise_p, noise_rng);
    }
    ImageRaster image;
    if (cfg.image_tokens > 0) image = render_image(doc, cfg.raster_h, cfg.raster_w);

    for (const auto& ex : build_task_examples(doc, kind, vocab)) {
      TextInput text = text_input_from_words(ex.input_words, vocab, cfg);
      std::vector<std::uint8_t> enc_valid;
      Tensor<float> states = encode_document_input(model, text, image, &enc_valid);
      std::string pred = vocab.decode(greedy_decode(model, states, enc_valid, cfg.max_seq - 1));

      PredictionRow row;
      row.id = doc.id + "#" + ex.key;
      row.pred = pred;
      switch (kind) {
        case TaskKind::kVqa: {
          row.gold = ex.golds.front();
          row.score = anls(pred, ex.golds);
          anls_sum += row.score;
          ++anls_n;
          break;
        }
        case TaskKind::kEntityExtraction: {
          row.gold = ex.target_text;
          std::vector<std::pair<std::string, std::string>> p_items, g_items;
          for (const auto& e : parse_entities(pred, vocab)) p_items.push_back({ex.key, e});
          for (const auto& g : ex.golds) g_items.push_back({ex.key, g});
          row.score = entity_f1(p_items, g_items).f1;
          pred_items.insert(pred_items.end(), p_items.begin(), p_items.end());
          gold_items.insert(gold_items.end(), g_items.begin(), g_items.end());
          break;
        }
        case TaskKind::kSequenceLabeling: {
          row.gold = ex.golds.front();
          auto [entity_text, label] = parse_label_output(pred, vocab);
          (void)entity_text;
          row.score = (label == normalize_answer(ex.golds.front())) ? 1.0 : 0.0;
          pred_items.push_back({label, normalize_answer(ex.prompt_text)});
          gold_items.push_back({normalize_answer(ex.golds.front()), normalize_answer(ex.prompt_text)});
          break;
        }
      }
      summary.rows.push_back(std::move(row));
    }
  }

  switch (kind) {
    case TaskKind::kVqa:
      summary.metric_name = "anls";
      summary.metric_value = anls_n > 0 ? anls_sum / anls_n : 0.0;
      break;
    case TaskKind::kEntityExtraction:
      summary.metric_name = "entity_f1";
      summary.metric_value = entity_f1(pred_items, gold_items).f1;
      break;
    case TaskKind::kSequenceLabeling:
      summary.metric_name = "label_f1";
      summary.metric_value = entity_f1(pred_items, gold_items).f1;
      break;
  }
  summary.n_examples = static_cast<long>(summary.rows.size());
  return summary;
}

void write_predictions_jsonl(const EvalSummary& summary, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_predictions_jsonl: cannot open " + path);
  for (const auto& row : summary.rows) {
    nlohmann::json j{{"id", row.id}, {"pred", row.pred}, {"gold", row.gold}, {"score", row.score}};
    out << j.dump() << "\n";
  }
}

void write_summary_csv(const EvalSummary& summary, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_summary_csv: cannot open " + path);
  out << "metric_name,metric_value,n_examples\n";
  out << summary.metric_name << "," << format_metric(summary.metric_value) << ","
      << summary.n_examples << "\n";
}

// ---- explicit instantiations -------------------------------------------

template struct PretrainLosses<float>;
template struct PretrainLosses<double>;
template PretrainLosses<float> compute_pretrain_losses(const Model<float>&, const PretrainBatch&,
                                                       const LossWeights&);
template PretrainLosses<double> compute_pretrain_losses(const Model<double>&, const PretrainBatch&,
                                                        const LossWeights&);
template StepResult pretrain_step(Model<float>&, const PretrainBatch&, const LossWeights&,
                                  AdamW<float>&);
template StepResult pretrain_step(Model<double>&, const PretrainBatch&, const LossWeights&,
                                  AdamW<double>&);
template std::vector<int> greedy_decode(const Model<float>&, const Tensor<float>&,
                                        const std::vector<std::uint8_t>&, int);
template std::vector<int> greedy_decode(const Model<double>&, const Tensor<double>&,
                                        const std::vector<std::uint8_t>&, int);
template Tensor<float> encode_document_input(const Model<float>&, const TextInput&,
                                             const ImageRaster&, std::vector<std::uint8_t>*);
template Tensor<double> encode_document_input(const Model<double>&, const TextInput&,
                                              const ImageRaster&, std::vector<std::uint8_t>*);

}  // namespace deskdoc
