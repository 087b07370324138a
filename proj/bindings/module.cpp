#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deskdoc/ablation.hpp"
#include "deskdoc/data.hpp"
#include "deskdoc/evaluation.hpp"
#include "deskdoc/geometry.hpp"
#include "deskdoc/model.hpp"
#include "deskdoc/tokenizer.hpp"
#include "deskdoc/training.hpp"

namespace py = pybind11;
using namespace deskdoc;

namespace {

Vocab train_vocab(const std::vector<std::string>& corpus, int vocab_size, int num_sentinels,
                  bool lowercase) {
  return Vocab::train(corpus, vocab_size, num_sentinels, lowercase);
}

void generate_corpus_file(const std::string& path, int n, std::uint64_t seed,
                          const std::string& tmpl, int words_min, int words_max, double noise) {
  SyntheticLayoutConfig cfg;
  cfg.tmpl = layout_template_from_name(tmpl);
  cfg.min_words = words_min;
  cfg.max_words = words_max;
  cfg.noise = noise;
  save_corpus(generate_corpus(seed, n, cfg), path);
}

std::string pretrain_corpus(const std::string& corpus_path, const std::string& out_dir,
                            const std::string& size, int steps, std::uint64_t seed,
                            int image_tokens, int vocab_size, const std::string& grid,
                            std::tuple<double, double, double> loss_weights, double lr,
                            int warmup) {
  Corpus corpus = load_corpus(corpus_path);
  if (corpus.docs.empty()) throw DataError("pretrain: corpus has no documents");
  std::vector<std::string> texts;
  for (const auto& d : corpus.docs) {
    std::string t;
    for (const auto& w : d.words) {
      if (!t.empty()) t += " ";
      t += w.text;
    }
    texts.push_back(std::move(t));
  }
  Vocab vocab = Vocab::train(texts, vocab_size);
  ModelConfig cfg = ModelConfig::for_size(size);
  cfg.grid = grid_from_string(grid);
  cfg.image_tokens = image_tokens;
  if (image_tokens > 0) {
    auto [h, w] = raster_for_image_tokens(image_tokens);
    cfg.raster_h = h;
    cfg.raster_w = w;
  }
  cfg.vocab_size = vocab.size();
  PretrainHyper hyper;
  hyper.steps = steps;
  hyper.seed = seed;
  hyper.lr = lr;
  hyper.warmup = warmup;
  hyper.weights = {std::get<0>(loss_weights), std::get<1>(loss_weights), std::get<2>(loss_weights)};
  return pretrain(corpus.docs, vocab, cfg, hyper, out_dir);
}

std::string finetune_checkpoint(const std::string& ckpt, const std::string& corpus_path,
                                const std::string& task, const std::string& out_dir, double lr,
                                int steps, std::uint64_t seed) {
  Model<float> model = load_checkpoint<float>(ckpt, /*strip_heads=*/true);
  Vocab vocab = Vocab::load(ckpt + "/vocab.txt");
  Corpus corpus = load_corpus(corpus_path);
  FinetuneHyper hyper;
  hyper.lr = lr;
  hyper.steps = steps;
  hyper.seed = seed;
  finetune(model, vocab, corpus.docs, task_from_name(task), hyper);
  std::string dir = out_dir + "/ckpt-final";
  save_checkpoint(model, dir, steps);
  vocab.save(dir + "/vocab.txt");
  return dir;
}

py::dict evaluate_checkpoint(const std::string& ckpt, const std::string& corpus_path,
                             const std::string& task, double noise_p, std::uint64_t seed) {
  Model<float> model = load_checkpoint<float>(ckpt, /*strip_heads=*/true);
  Vocab vocab = Vocab::load(ckpt + "/vocab.txt");
  Corpus corpus = load_corpus(corpus_path);
  EvalSummary summary = evaluate_task(model, vocab, corpus.docs, task_from_name(task), noise_p, seed);
  py::dict out;
  out["metric_name"] = summary.metric_name;
  out["metric_value"] = summary.metric_value;
  out["n_examples"] = summary.n_examples;
  py::list rows;
  for (const auto& r : summary.rows) {
    py::dict row;
    row["id"] = r.id;
    row["pred"] = r.pred;
    row["gold"] = r.gold;
    row["score"] = r.score;
    rows.append(row);
  }
  out["rows"] = rows;
  return out;
}

py::dict corrupt_ids(const std::vector<int>& ids, double density, double mean_span_len,
                     const Vocab& vocab, std::uint64_t seed) {
  Rng rng(seed);
  SpanCorruption c = corrupt_spans(ids, density, mean_span_len, vocab, rng);
  py::dict out;
  out["input_ids"] = c.input_ids;
  out["target_ids"] = c.target_ids;
  out["masked"] = std::vector<int>(c.masked.begin(), c.masked.end());
  return out;
}

std::vector<std::string> noise_words(const std::vector<std::string>& texts, double p,
                                     std::uint64_t seed) {
  std::vector<Word> words;
  for (const auto& t : texts) words.push_back({t, 0, 0, 1, 1});
  Rng rng(seed);
  auto noisy = inject_ocr_noise(words, p, rng);
  std::vector<std::string> out;
  for (const auto& w : noisy) out.push_back(w.text);
  return out;
}

}  // namespace

PYBIND11_MODULE(_deskdoc, m) {
  m.doc() = "desk-scale multi-modal document model core";

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<NumericError>(m, "NumericalError");

  py::class_<Box>(m, "Box")
      .def(py::init<>())
      .def(py::init([](double x1, double y1, double x3, double y3) {
             return Box{x1, y1, x3, y3};
           }),
           py::arg("x1"), py::arg("y1"), py::arg("x3"), py::arg("y3"))
      .def_readwrite("x1", &Box::x1)
      .def_readwrite("y1", &Box::y1)
      .def_readwrite("x3", &Box::x3)
      .def_readwrite("y3", &Box::y3)
      .def("width", &Box::width)
      .def("height", &Box::height);

  py::class_<GridConfig>(m, "GridConfig")
      .def(py::init([](int cols, int rows) { return GridConfig{cols, rows}; }),
           py::arg("cols") = 4, py::arg("rows") = 4)
      .def_readwrite("cols", &GridConfig::cols)
      .def_readwrite("rows", &GridConfig::rows)
      .def("cells", &GridConfig::cells);

  py::class_<SpatialIndices>(m, "SpatialIndices")
      .def_readonly("x1", &SpatialIndices::x1)
      .def_readonly("x3", &SpatialIndices::x3)
      .def_readonly("y1", &SpatialIndices::y1)
      .def_readonly("y3", &SpatialIndices::y3)
      .def_readonly("height", &SpatialIndices::height)
      .def_readonly("width", &SpatialIndices::width);

  m.def("normalize_box",
        [](double px1, double py1, double px3, double py3, double w, double h) {
          return normalize_box(px1, py1, px3, py3, w, h);
        },
        py::arg("x1"), py::arg("y1"), py::arg("x3"), py::arg("y3"), py::arg("page_w"),
        py::arg("page_h"));
  m.def("quantize_spatial", &quantize_spatial, py::arg("box"), py::arg("n_bins") = 1000);
  m.def("grid_label", &grid_label, py::arg("box"), py::arg("grid"),
        "raster-scan cell index of the top-left corner, -1 when on the far boundary");
  m.def("assign_lines", &assign_lines, py::arg("boxes"));
  m.def("line_distance_label", &line_distance_label, py::arg("line_i"), py::arg("line_j"));

  py::class_<Vocab>(m, "Vocab")
      .def_static("train", &train_vocab, py::arg("corpus"), py::arg("vocab_size"),
                  py::arg("num_sentinels") = 100, py::arg("lowercase") = true)
      .def_static("load", &Vocab::load, py::arg("path"))
      .def("save", &Vocab::save, py::arg("path"))
      .def("encode", &Vocab::encode, py::arg("text"))
      .def("decode", &Vocab::decode, py::arg("ids"))
      .def("size", &Vocab::size)
      .def("num_sentinels", &Vocab::num_sentinels)
      .def("sentinel_id", &Vocab::sentinel_id, py::arg("k"))
      .def("token_text", &Vocab::token_text, py::arg("id"));

  m.def("anls",
        [](const std::string& pred, const std::vector<std::string>& golds, double tau) {
          return anls(pred, golds, tau);
        },
        py::arg("prediction"), py::arg("golds"), py::arg("tau") = 0.5);
  m.def("entity_f1",
        [](const std::vector<std::pair<std::string, std::string>>& pred,
           const std::vector<std::pair<std::string, std::string>>& gold) {
          F1Score s = entity_f1(pred, gold);
          return py::make_tuple(s.precision, s.recall, s.f1);
        },
        py::arg("pred"), py::arg("gold"));
  m.def("accuracy", &accuracy, py::arg("preds"), py::arg("golds"));
  m.def("levenshtein",
        [](const std::string& a, const std::string& b) { return levenshtein(a, b); });

  m.def("inject_ocr_noise", &noise_words, py::arg("words"), py::arg("p"), py::arg("seed") = 0);
  m.def("corrupt_spans", &corrupt_ids, py::arg("ids"), py::arg("density"),
        py::arg("mean_span_len"), py::arg("vocab"), py::arg("seed") = 0);

  m.def("generate_corpus", &generate_corpus_file, py::arg("path"), py::arg("n"),
        py::arg("seed") = 0, py::arg("template") = "form", py::arg("words_min") = 20,
        py::arg("words_max") = 400, py::arg("noise") = 0.0);
  m.def("count_params",
        [](const std::string& size, int vocab_size) {
          ModelConfig cfg = ModelConfig::for_size(size);
          cfg.vocab_size = vocab_size;
          return count_params(cfg);
        },
        py::arg("size"), py::arg("vocab_size"));

  m.def("pretrain", &pretrain_corpus, py::arg("corpus"), py::arg("out_dir"),
        py::arg("size") = "tiny", py::arg("steps") = 100, py::arg("seed") = 0,
        py::arg("image_tokens") = 32, py::arg("vocab_size") = 512, py::arg("grid") = "4x4",
        py::arg("loss_weights") = std::make_tuple(1.0, 1.0, 1.0), py::arg("lr") = 5e-5,
        py::arg("warmup") = 1000, "pre-train on a JSONL corpus, returns the checkpoint path");
  m.def("finetune", &finetune_checkpoint, py::arg("ckpt"), py::arg("corpus"), py::arg("task"),
        py::arg("out_dir"), py::arg("lr") = 1e-5, py::arg("steps") = 100, py::arg("seed") = 0);
  m.def("evaluate", &evaluate_checkpoint, py::arg("ckpt"), py::arg("corpus"), py::arg("task"),
        py::arg("noise_p") = 0.0, py::arg("seed") = 0);
}
