// deskdoc: data generation, statistics, pre-training, fine-tuning,
// evaluation and ablation sweeps for the desk-scale document model.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// The DOCF_SEED environment variable overrides --seed for every command.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "deskdoc/ablation.hpp"
#include "deskdoc/common.hpp"
#include "deskdoc/data.hpp"
#include "deskdoc/evaluation.hpp"
#include "deskdoc/model.hpp"
#include "deskdoc/run_manifest.hpp"
#include "deskdoc/tokenizer.hpp"
#include "deskdoc/training.hpp"

namespace fs = std::filesystem;
using namespace deskdoc;

namespace {

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  if (const char* env = std::getenv("DOCF_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw DataError(std::string("DOCF_SEED is not a number: ") + env);
    }
  }
  return flag_seed;
}

std::vector<std::string> corpus_texts(const std::vector<Document>& docs) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) {
    std::string t;
    for (const auto& w : d.words) {
      if (!t.empty()) t += " ";
      t += w.text;
    }
    texts.push_back(std::move(t));
  }
  return texts;
}

LossWeights parse_loss_weights(const std::string& s) {
  LossWeights w;
  std::istringstream ss(s);
  char c1 = 0, c2 = 0;
  if (!(ss >> w.k >> c1 >> w.l >> c2 >> w.m_coef) || c1 != ',' || c2 != ',') {
    throw DataError("--loss-weights must look like k,l,m (e.g. 1,1,1), got " + s);
  }
  w.validate();
  return w;
}

struct GenDataArgs {
  std::string out;
  int n = 100;
  std::uint64_t seed = 0;
  std::string tmpl = "form";
  int words_min = 20;
  int words_max = 400;
  double noise = 0.0;
};

void cmd_gen_data(const GenDataArgs& a) {
  std::uint64_t seed = effective_seed(a.seed);
  RunManifest manifest;
  manifest.command = "gen-data";
  manifest.seed = seed;
  manifest.flags = {{"out", a.out},          {"n", std::to_string(a.n)},
                    {"template", a.tmpl},    {"words-min", std::to_string(a.words_min)},
                    {"words-max", std::to_string(a.words_max)},
                    {"noise", std::to_string(a.noise)}};
  write_run_manifest(manifest, a.out + ".manifest.json");

  SyntheticLayoutConfig cfg;
  cfg.tmpl = layout_template_from_name(a.tmpl);
  cfg.min_words = a.words_min;
  cfg.max_words = a.words_max;
  cfg.noise = a.noise;
  save_corpus(generate_corpus(seed, a.n, cfg), a.out);
  std::cout << "wrote " << a.n << " documents to " << a.out << "\n";
}

struct StatsArgs {
  std::string corpus;
  std::string out;
};

void cmd_stats(const StatsArgs& a) {
  RunManifest manifest;
  manifest.command = "stats";
  manifest.flags = {{"corpus", a.corpus}, {"out", a.out}};
  manifest.corpus_digest = file_digest_hex(a.corpus);
  write_run_manifest(manifest, a.out + ".manifest.json");

  Corpus corpus = load_corpus(a.corpus);
  if (corpus.docs.empty()) throw DataError("stats: corpus has no documents");
  CorpusStats stats = corpus_stats(corpus.docs);
  write_stats_csv(stats, a.out);
  std::cout << "docs " << stats.n_docs << " mean " << stats.mean << " median " << stats.median
            << " p95 " << stats.p95 << "\n";
}

struct PretrainArgs {
  std::string corpus;
  std::string size = "tiny";
  std::string grid = "4x4";
  int image_tokens = 128;
  std::string loss_weights = "1,1,1";
  int steps = 2000;
  std::uint64_t seed = 0;
  std::string out;
  double lr = 5e-5;
  int warmup = 1000;
  double clip = 1.0;
  double weight_decay = 0.0;
  int vocab_size = 2000;
  double density = 0.15;
  double span_len = 3.0;
  int max_pairs = 32;
  int checkpoint_every = 0;
};

void cmd_pretrain(const PretrainArgs& a) {
  std::uint64_t seed = effective_seed(a.seed);
  fs::create_directories(a.out);
  RunManifest manifest;
  manifest.command = "pretrain";
  manifest.seed = seed;
  manifest.corpus_digest = file_digest_hex(a.corpus);
  manifest.flags = {{"corpus", a.corpus},
                    {"size", a.size},
                    {"grid", a.grid},
                    {"image-tokens", std::to_string(a.image_tokens)},
                    {"loss-weights", a.loss_weights},
                    {"steps", std::to_string(a.steps)},
                    {"out", a.out},
                    {"lr", std::to_string(a.lr)},
                    {"warmup", std::to_string(a.warmup)},
                    {"clip", std::to_string(a.clip)},
                    {"weight-decay", std::to_string(a.weight_decay)},
                    {"vocab-size", std::to_string(a.vocab_size)},
                    {"density", std::to_string(a.density)},
                    {"span-len", std::to_string(a.span_len)},
                    {"max-pairs", std::to_string(a.max_pairs)},
                    {"checkpoint-every", std::to_string(a.checkpoint_every)}};
  write_run_manifest(manifest, (fs::path(a.out) / "run_manifest.json").string());

  Corpus corpus = load_corpus(a.corpus);
  if (corpus.docs.empty()) throw DataError("pretrain: corpus has no documents");
  Vocab vocab = Vocab::train(corpus_texts(corpus.docs), a.vocab_size);

  ModelConfig cfg = ModelConfig::for_size(a.size);
  cfg.grid = grid_from_string(a.grid);
  cfg.image_tokens = a.image_tokens;
  if (a.image_tokens > 0) {
    auto [h, w] = raster_for_image_tokens(a.image_tokens);
    cfg.raster_h = h;
    cfg.raster_w = w;
  }
  cfg.vocab_size = vocab.size();

  PretrainHyper hyper;
  hyper.lr = a.lr;
  hyper.warmup = a.warmup;
  hyper.clip_norm = a.clip;
  hyper.weight_decay = a.weight_decay;
  hyper.steps = a.steps;
  hyper.seed = seed;
  hyper.weights = parse_loss_weights(a.loss_weights);
  hyper.batch.noise_density = a.density;
  hyper.batch.mean_span_len = a.span_len;
  hyper.batch.max_pairs = a.max_pairs;
  hyper.checkpoint_every = a.checkpoint_every;

  std::string final_ckpt = pretrain(corpus.docs, vocab, cfg, hyper, a.out);
  std::cout << "final checkpoint: " << final_ckpt << "\n";
}

struct FinetuneArgs {
  std::string ckpt;
  std::string task;
  std::string corpus;
  double lr = 1e-5;
  int steps = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_finetune(const FinetuneArgs& a) {
  std::uint64_t seed = effective_seed(a.seed);
  fs::create_directories(a.out);
  RunManifest manifest;
  manifest.command = "finetune";
  manifest.seed = seed;
  manifest.corpus_digest = file_digest_hex(a.corpus);
  manifest.flags = {{"ckpt", a.ckpt},   {"task", a.task},
                    {"corpus", a.corpus}, {"lr", std::to_string(a.lr)},
                    {"steps", std::to_string(a.steps)}, {"out", a.out}};
  write_run_manifest(manifest, (fs::path(a.out) / "run_manifest.json").string());

  TaskKind kind = task_from_name(a.task);
  Model<float> model = load_checkpoint<float>(a.ckpt, /*strip_heads=*/true);
  Vocab vocab = Vocab::load((fs::path(a.ckpt) / "vocab.txt").string());
  Corpus corpus = load_corpus(a.corpus);
  if (corpus.docs.empty()) throw DataError("finetune: corpus has no documents");

  FinetuneHyper hyper;
  hyper.lr = a.lr;
  hyper.steps = a.steps;
  hyper.seed = seed;

  std::ofstream log(fs::path(a.out) / "log.csv", std::ios::binary);
  log << "step,loss\n";
  finetune(model, vocab, corpus.docs, kind, hyper, [&](int step, double loss) {
    std::ostringstream v;
    v.precision(10);
    v << loss;
    log << step << "," << v.str() << "\n";
  });
  log.close();

  std::string ckpt_dir = (fs::path(a.out) / "ckpt-final").string();
  save_checkpoint(model, ckpt_dir, a.steps);
  vocab.save((fs::path(ckpt_dir) / "vocab.txt").string());
  std::cout << "final checkpoint: " << ckpt_dir << "\n";
}

struct EvalArgs {
  std::string ckpt;
  std::string task;
  std::string corpus;
  double noise_p = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_eval(const EvalArgs& a) {
  std::uint64_t seed = effective_seed(a.seed);
  fs::create_directories(a.out);
  RunManifest manifest;
  manifest.command = "eval";
  manifest.seed = seed;
  manifest.corpus_digest = file_digest_hex(a.corpus);
  manifest.flags = {{"ckpt", a.ckpt},     {"task", a.task}, {"corpus", a.corpus},
                    {"noise-p", std::to_string(a.noise_p)}, {"out", a.out}};
  write_run_manifest(manifest, (fs::path(a.out) / "run_manifest.json").string());

  TaskKind kind = task_from_name(a.task);
  Model<float> model = load_checkpoint<float>(a.ckpt, /*strip_heads=*/true);
  Vocab vocab = Vocab::load((fs::path(a.ckpt) / "vocab.txt").string());
  Corpus corpus = load_corpus(a.corpus);
  if (corpus.docs.empty()) throw DataError("eval: corpus has no documents");

  EvalSummary summary = evaluate_task(model, vocab, corpus.docs, kind, a.noise_p, seed);
  write_summary_csv(summary, (fs::path(a.out) / "summary.csv").string());
  write_predictions_jsonl(summary, (fs::path(a.out) / "predictions.jsonl").string());
  std::cout << summary.metric_name << " " << summary.metric_value << " over "
            << summary.n_examples << " examples\n";
}

struct AblateArgs {
  std::string axis;
  int budget = 50;
  std::uint64_t seed = 0;
  std::string out;
  std::string corpus;  // optional; synthesized when empty
  std::string size = "tiny";
  int docs = 48;
};

void cmd_ablate(const AblateArgs& a) {
  std::uint64_t seed = effective_seed(a.seed);
  RunManifest manifest;
  manifest.command = "ablate";
  manifest.seed = seed;
  if (!a.corpus.empty()) manifest.corpus_digest = file_digest_hex(a.corpus);
  manifest.flags = {{"axis", a.axis},   {"budget", std::to_string(a.budget)},
                    {"out", a.out},     {"corpus", a.corpus},
                    {"size", a.size},   {"docs", std::to_string(a.docs)}};
  write_run_manifest(manifest, a.out + ".manifest.json");

  std::vector<Document> docs;
  if (a.corpus.empty()) {
    SyntheticLayoutConfig gen;
    gen.min_words = 24;
    gen.max_words = 60;
    docs = generate_corpus(derive_seed(seed, "ablation-corpus"), a.docs, gen);
  } else {
    docs = load_corpus(a.corpus).docs;
  }

  ModelConfig base = ModelConfig::for_size(a.size);
  AblationBudget budget;
  budget.steps = a.budget;
  budget.seed = seed;

  AblationReport report = run_ablation(a.axis, default_ablation_settings(a.axis), budget, docs, base);
  write_ablation_csv(report, a.out);
  std::cout << "wrote " << report.rows.size() << " rows to " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale multi-modal document model"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic JSONL corpus");
  gen_cmd->add_option("--out", gen.out, "output JSONL path")->required();
  gen_cmd->add_option("--n", gen.n, "number of documents");
  gen_cmd->add_option("--seed", gen.seed, "rng seed");
  gen_cmd->add_option("--template", gen.tmpl, "form|table|receipt");
  gen_cmd->add_option("--words-min", gen.words_min, "minimum words per document");
  gen_cmd->add_option("--words-max", gen.words_max, "maximum words per document");
  gen_cmd->add_option("--noise", gen.noise, "vertical jitter level");
  gen_cmd->callback([&] { cmd_gen_data(gen); });

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "words-per-document histogram as CSV");
  stats_cmd->add_option("--corpus", stats.corpus, "input JSONL corpus")->required();
  stats_cmd->add_option("--out", stats.out, "output CSV path")->required();
  stats_cmd->callback([&] { cmd_stats(stats); });

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "pre-train on a JSONL corpus");
  pre_cmd->add_option("--corpus", pre.corpus, "input JSONL corpus")->required();
  pre_cmd->add_option("--size", pre.size, "tiny|small|base|large");
  pre_cmd->add_option("--grid", pre.grid, "token-to-grid layout, MxN");
  pre_cmd->add_option("--image-tokens", pre.image_tokens, "visual sequence length (0 disables)");
  pre_cmd->add_option("--loss-weights", pre.loss_weights, "k,l,m for line/grid/LM losses");
  pre_cmd->add_option("--steps", pre.steps, "training steps");
  pre_cmd->add_option("--seed", pre.seed, "rng seed");
  pre_cmd->add_option("--out", pre.out, "output directory")->required();
  pre_cmd->add_option("--lr", pre.lr, "peak learning rate");
  pre_cmd->add_option("--warmup", pre.warmup, "linear warm-up steps");
  pre_cmd->add_option("--clip", pre.clip, "gradient clipping norm");
  pre_cmd->add_option("--weight-decay", pre.weight_decay, "decoupled weight decay");
  pre_cmd->add_option("--vocab-size", pre.vocab_size, "BPE vocabulary budget");
  pre_cmd->add_option("--density", pre.density, "span corruption noise density");
  pre_cmd->add_option("--span-len", pre.span_len, "mean corruption span length");
  pre_cmd->add_option("--max-pairs", pre.max_pairs, "token pairs per document");
  pre_cmd->add_option("--checkpoint-every", pre.checkpoint_every, "periodic checkpoint interval");
  pre_cmd->callback([&] { cmd_pretrain(pre); });

  FinetuneArgs ft;
  auto* ft_cmd = app.add_subcommand("finetune", "fine-tune a pre-trained checkpoint");
  ft_cmd->add_option("--ckpt", ft.ckpt, "checkpoint directory")->required();
  ft_cmd->add_option("--task", ft.task, "vqa|entity|label")->required();
  ft_cmd->add_option("--corpus", ft.corpus, "task JSONL corpus")->required();
  ft_cmd->add_option("--lr", ft.lr, "learning rate");
  ft_cmd->add_option("--steps", ft.steps, "training steps");
  ft_cmd->add_option("--seed", ft.seed, "rng seed");
  ft_cmd->add_option("--out", ft.out, "output directory")->required();
  ft_cmd->callback([&] { cmd_finetune(ft); });

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "greedy-decode a task corpus and score it");
  ev_cmd->add_option("--ckpt", ev.ckpt, "checkpoint directory")->required();
  ev_cmd->add_option("--task", ev.task, "vqa|entity|label")->required();
  ev_cmd->add_option("--corpus", ev.corpus, "task JSONL corpus")->required();
  ev_cmd->add_option("--noise-p", ev.noise_p, "per-character OCR error probability");
  ev_cmd->add_option("--seed", ev.seed, "rng seed (noise injection)");
  ev_cmd->add_option("--out", ev.out, "output directory")->required();
  ev_cmd->callback([&] { cmd_eval(ev); });

  AblateArgs ab;
  auto* ab_cmd = app.add_subcommand("ablate", "run a sweep along one ablation axis");
  ab_cmd->add_option("--axis", ab.axis, "grid|image-tokens|tasks|noise")->required();
  ab_cmd->add_option("--budget", ab.budget, "pretraining steps per setting");
  ab_cmd->add_option("--seed", ab.seed, "rng seed");
  ab_cmd->add_option("--out", ab.out, "output CSV path")->required();
  ab_cmd->add_option("--corpus", ab.corpus, "JSONL corpus (synthesized when omitted)");
  ab_cmd->add_option("--size", ab.size, "model size preset");
  ab_cmd->add_option("--docs", ab.docs, "synthetic corpus size when --corpus is omitted");
  ab_cmd->callback([&] { cmd_ablate(ab); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
