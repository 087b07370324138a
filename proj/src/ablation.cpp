#include "deskdoc/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace deskdoc {

namespace {

struct TaskToggles {
  bool visual = false;
  bool line = false;
  bool grid = false;
};

TaskToggles parse_task_setting(const std::string& s) {
  if (s == "B") return {false, false, false};
  if (s == "B+V") return {true, false, false};
  if (s == "B+V+L") return {true, true, false};
  if (s == "B+V+G") return {true, false, true};
  if (s == "B+V+L+G") return {true, true, true};
  throw DataError("unknown tasks setting " + s + " (expected B|B+V|B+V+L|B+V+G|B+V+L+G)");
}

struct HeldoutMetrics {
  double tol = 0, tog = 0, dlm = 0, final_loss = 0;
  double grid_acc = -1, line_acc = -1;
};

HeldoutMetrics eval_heldout(Model<float>& model, const Vocab& vocab,
                            const std::vector<Document>& docs, const LossWeights& weights,
                            const BatchOptions& batch_opt, double noise_p, std::uint64_t seed) {
  HeldoutMetrics m;
  long grid_correct = 0, grid_total = 0, line_correct = 0, line_total = 0;
  for (const Document& original : docs) {
    Document doc = original;
    if (noise_p > 0) {
      Rng noise_rng(derive_seed(seed, original.id + "#noise"));
      doc = with_ocr_noise(original, noise_p, noise_rng);
    }
    Rng rng(derive_seed(seed, doc.id + "#val"));
    PretrainBatch batch = build_pretrain_batch(doc, vocab, model.config(), batch_opt, rng);
    PretrainLosses<float> losses = compute_pretrain_losses(model, batch, weights);
    m.tol += losses.tol.item();
    m.tog += losses.tog.item();
    m.dlm += losses.dlm.item();
    m.final_loss += losses.final_loss.item();
    grid_correct += losses.grid_correct;
    grid_total += losses.grid_total;
    line_correct += losses.line_correct;
    line_total += losses.line_total;
  }
  const double n = static_cast<double>(docs.size());
  m.tol /= n;
  m.tog /= n;
  m.dlm /= n;
  m.final_loss /= n;
  if (grid_total > 0) m.grid_acc = static_cast<double>(grid_correct) / grid_total;
  if (line_total > 0) m.line_acc = static_cast<double>(line_correct) / line_total;
  return m;
}

void push_metrics(AblationReport& report, const std::string& axis, const std::string& setting,
                  const HeldoutMetrics& m, const AblationBudget& budget) {
  auto push = [&](const std::string& name, double value) {
    report.rows.push_back({axis, setting, name, value, budget.seed, budget.steps});
  };
  push("val_L_tol", m.tol);
  push("val_L_tog", m.tog);
  push("val_L_dlm", m.dlm);
  push("val_L_final", m.final_loss);
  push("val_grid_acc", m.grid_acc);
  push("val_line_acc", m.line_acc);
}

}  // namespace

std::vector<std::string> default_ablation_settings(const std::string& axis) {
  if (axis == "grid") return {"4x1", "2x2", "4x4", "8x8", "12x12"};
  if (axis == "image-tokens") return {"32", "64", "128", "256"};
  if (axis == "tasks") return {"B", "B+V", "B+V+L", "B+V+G", "B+V+L+G"};
  if (axis == "noise") return {"0", "0.05", "0.1", "0.2"};
  throw DataError("unknown ablation axis: " + axis +
                  " (expected grid|image-tokens|tasks|noise)");
}

AblationReport run_ablation(const std::string& axis, const std::vector<std::string>& settings,
                            const AblationBudget& budget, const std::vector<Document>& corpus,
                            const ModelConfig& base_cfg) {
  if (settings.empty()) throw DataError("run_ablation: no settings");
  if (corpus.size() < 4) throw DataError("run_ablation: corpus too small to hold out a split");

  const std::size_t n_hold = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                          corpus.size() * budget.holdout_frac));
  std::vector<Document> train_docs(corpus.begin(), corpus.end() - n_hold);
  std::vector<Document> heldout(corpus.end() - n_hold, corpus.end());

  std::vector<std::string> texts;
  for (const auto& d : train_docs) {
    std::string t;
    for (const auto& w : d.words) {
      if (!t.empty()) t += " ";
      t += w.text;
    }
    texts.push_back(std::move(t));
  }
  Vocab vocab = Vocab::train(texts, budget.vocab_size);

  PretrainHyper hyper;
  hyper.steps = budget.steps;
  hyper.seed = budget.seed;
  hyper.lr = budget.lr;
  hyper.warmup = std::min(1000, budget.steps);

  AblationReport report;
  auto configured = [&](const std::string& setting) {
    ModelConfig cfg = base_cfg;
    cfg.vocab_size = vocab.size();
    if (axis == "grid") {
      cfg.grid = grid_from_string(setting);
    } else if (axis == "image-tokens") {
      cfg.image_tokens = std::stoi(setting);
      auto [h, w] = raster_for_image_tokens(cfg.image_tokens);
      cfg.raster_h = h;
      cfg.raster_w = w;
    }
    return cfg;
  };

  if (axis == "noise") {
    ModelConfig cfg = configured("base");
    Model<float> model = run_pretrain_loop(train_docs, vocab, cfg, hyper, {});
    for (const auto& setting : settings) {
      double p = std::stod(setting);
      HeldoutMetrics m =
          eval_heldout(model, vocab, heldout, hyper.weights, hyper.batch, p, budget.seed);
      push_metrics(report, axis, setting, m, budget);
    }
    return report;
  }

  for (const auto& setting : settings) {
    ModelConfig cfg = configured(setting);
    LossWeights weights = hyper.weights;
    if (axis == "tasks") {
      TaskToggles t = parse_task_setting(setting);
      if (!t.visual) cfg.image_tokens = 0;
      weights.k = t.line ? 1.0 : 0.0;
      weights.l = t.grid ? 1.0 : 0.0;
      weights.m_coef = 1.0;
    }
    PretrainHyper setting_hyper = hyper;
    setting_hyper.weights = weights;
    Model<float> model = run_pretrain_loop(train_docs, vocab, cfg, setting_hyper, {});
    HeldoutMetrics m = eval_heldout(model, vocab, heldout, weights, hyper.batch, 0.0, budget.seed);
    push_metrics(report, axis, setting, m, budget);
  }
  return report;
}

void write_ablation_csv(const AblationReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("write_ablation_csv: cannot open " + path);
  out << "axis,setting,metric_name,metric_value,seed,steps\n";
  for (const auto& r : report.rows) {
    std::ostringstream v;
    v.precision(10);
    v << r.metric_value;
    out << r.axis << "," << r.setting << "," << r.metric_name << "," << v.str() << "," << r.seed
        << "," << r.steps << "\n";
  }
}

}  // namespace deskdoc
