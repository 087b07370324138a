#include "deskdoc/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace deskdoc {

using nlohmann::json;
namespace fs = std::filesystem;

void ModelConfig::validate() const {
  if (dim < 1 || ff < 1 || heads < 1) throw ShapeError("ModelConfig: dim/ff/heads must be positive");
  if (dim % heads != 0) {
    throw ShapeError("ModelConfig: dim " + std::to_string(dim) + " not divisible by heads " +
                     std::to_string(heads));
  }
  if (enc_layers < 1 || dec_layers < 1) throw ShapeError("ModelConfig: need at least one layer each");
  if (max_seq < 1) throw ShapeError("ModelConfig: max_seq must be positive");
  if (vocab_size < 4) throw ShapeError("ModelConfig: vocab_size must cover the specials");
  if (n_bins < 1) throw ShapeError("ModelConfig: n_bins must be positive");
  if (!grid.valid() || grid.cells() < 2) throw ShapeError("ModelConfig: grid must have at least 2 cells");
  if (image_tokens < 0) throw ShapeError("ModelConfig: image_tokens must be >= 0");
  if (image_tokens > 0) {
    if (raster_h % 2 != 0 || raster_w % 2 != 0 || (raster_h / 2) * (raster_w / 2) != image_tokens) {
      throw ShapeError("ModelConfig: raster " + std::to_string(raster_h) + "x" +
                       std::to_string(raster_w) + " does not yield " + std::to_string(image_tokens) +
                       " image tokens");
    }
  }
}

std::pair<int, int> raster_for_image_tokens(int tokens) {
  if (tokens < 1 || tokens > 65536) {
    throw DataError("image_tokens " + std::to_string(tokens) + " outside supported range");
  }
  int best_ph = -1, best_pw = -1;
  double best_score = 1e30;
  for (int ph = 1; ph <= tokens; ++ph) {
    if (tokens % ph != 0) continue;
    int pw = tokens / ph;
    double ratio = static_cast<double>(ph) / pw;
    if (ratio < 0.5 || ratio > 8.0) continue;
    double score = std::abs(std::log2(ratio / 2.0));  // prefer portrait ~2:1
    if (score < best_score) {
      best_score = score;
      best_ph = ph;
      best_pw = pw;
    }
  }
  if (best_ph < 0) {
    throw DataError("image_tokens " + std::to_string(tokens) + " does not match any even raster");
  }
  return {2 * best_ph, 2 * best_pw};
}

ModelConfig ModelConfig::for_size(const std::string& size) {
  ModelConfig cfg;
  if (size == "tiny") {
    cfg.dim = 64; cfg.ff = 256; cfg.heads = 4; cfg.enc_layers = 2; cfg.dec_layers = 2;
    cfg.max_seq = 64; cfg.image_tokens = 32;
  } else if (size == "small") {
    cfg.dim = 512; cfg.ff = 2048; cfg.heads = 8; cfg.enc_layers = 6; cfg.dec_layers = 6;
    cfg.max_seq = 512; cfg.image_tokens = 128;
  } else if (size == "base") {
    cfg.dim = 768; cfg.ff = 3072; cfg.heads = 12; cfg.enc_layers = 12; cfg.dec_layers = 12;
    cfg.max_seq = 512; cfg.image_tokens = 128;
  } else if (size == "large") {
    cfg.dim = 1024; cfg.ff = 4096; cfg.heads = 16; cfg.enc_layers = 24; cfg.dec_layers = 24;
    cfg.max_seq = 512; cfg.image_tokens = 128;
  } else {
    throw DataError("unknown model size: " + size + " (expected tiny|small|base|large)");
  }
  auto [h, w] = raster_for_image_tokens(cfg.image_tokens);
  cfg.raster_h = h;
  cfg.raster_w = w;
  return cfg;
}

std::vector<std::pair<std::string, std::vector<int>>> param_specs(const ModelConfig& cfg,
                                                                  bool include_heads) {
  std::vector<std::pair<std::string, std::vector<int>>> specs;
  auto push = [&](std::string name, std::vector<int> shape) {
    specs.push_back({std::move(name), std::move(shape)});
  };
  push("emb.token", {cfg.vocab_size, cfg.dim});
  push("emb.pos_text", {cfg.max_seq, cfg.dim});
  push("emb.pos_dec", {cfg.max_seq, cfg.dim});
  push("emb.spatial_x", {cfg.n_bins, cfg.dim});
  push("emb.spatial_y", {cfg.n_bins, cfg.dim});
  push("emb.spatial_h", {cfg.n_bins, cfg.dim});
  push("emb.spatial_w", {cfg.n_bins, cfg.dim});
  push("emb.modality", {2, cfg.dim});
  if (cfg.image_tokens > 0) {
    push("vis.conv.weight", {cfg.dim, 3, 2, 2});
    push("vis.conv.bias", {cfg.dim});
    push("vis.proj.weight", {cfg.dim, cfg.dim});
    push("vis.proj.bias", {cfg.dim});
    push("vis.pos_2d", {cfg.image_tokens, cfg.dim});
  }
  auto push_attention = [&](const std::string& prefix) {
    for (const char* part : {"q", "k", "v", "o"}) {
      push(prefix + "." + part + ".weight", {cfg.dim, cfg.dim});
      push(prefix + "." + part + ".bias", {cfg.dim});
    }
  };
  auto push_ln = [&](const std::string& prefix) {
    push(prefix + ".gain", {cfg.dim});
    push(prefix + ".bias", {cfg.dim});
  };
  auto push_ffn = [&](const std::string& prefix) {
    push(prefix + ".in.weight", {cfg.dim, cfg.ff});
    push(prefix + ".in.bias", {cfg.ff});
    push(prefix + ".out.weight", {cfg.ff, cfg.dim});
    push(prefix + ".out.bias", {cfg.dim});
  };
  for (int i = 0; i < cfg.enc_layers; ++i) {
    std::string p = "enc." + std::to_string(i);
    push_ln(p + ".ln_attn");
    push_attention(p + ".attn");
    push_ln(p + ".ln_ffn");
    push_ffn(p + ".ffn");
  }
  push_ln("enc.final_ln");
  for (int i = 0; i < cfg.dec_layers; ++i) {
    std::string p = "dec." + std::to_string(i);
    push_ln(p + ".ln_self");
    push_attention(p + ".self_attn");
    push_ln(p + ".ln_cross");
    push_attention(p + ".cross_attn");
    push_ln(p + ".ln_ffn");
    push_ffn(p + ".ffn");
  }
  push_ln("dec.final_ln");
  if (include_heads) {
    push("head.line.weight", {2 * cfg.dim, 3});
    push("head.line.bias", {3});
    push("head.grid.weight", {cfg.dim, cfg.grid.cells()});
    push("head.grid.bias", {cfg.grid.cells()});
  }
  return specs;
}

std::int64_t count_params(const ModelConfig& cfg, bool include_heads) {
  cfg.validate();
  std::int64_t total = 0;
  for (const auto& [name, shape] : param_specs(cfg, include_heads)) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    total += n;
  }
  return total;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Content-canonical ordering of attention keys: sorting by (validity, key
// bytes, value bytes) makes every reduction over the key axis independent of
// the storage order of the input rows, so encoder outputs are bit-identical
// under input permutation.
template <typename S>
std::vector<int> canonical_key_order(const std::vector<S>& k, const std::vector<S>& v, int n,
                                     int dim, const std::vector<std::uint8_t>& valid) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t row_bytes = sizeof(S) * static_cast<std::size_t>(dim);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (valid[a] != valid[b]) return valid[a] > valid[b];
    int c = std::memcmp(k.data() + static_cast<std::size_t>(a) * dim,
                        k.data() + static_cast<std::size_t>(b) * dim, row_bytes);
    if (c != 0) return c < 0;
    c = std::memcmp(v.data() + static_cast<std::size_t>(a) * dim,
                    v.data() + static_cast<std::size_t>(b) * dim, row_bytes);
    if (c != 0) return c < 0;
    return a < b;
  });
  return idx;
}

}  // namespace

template <typename S>
Model<S>::Model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  cfg_ = cfg;
  for (auto& [name, shape] : param_specs(cfg, true)) {
    Tensor<S> t = Tensor<S>::zeros(shape, true);
    auto& vals = t.mutable_values();
    if (ends_with(name, ".gain")) {
      std::fill(vals.begin(), vals.end(), S(1));
    } else if (!ends_with(name, ".bias")) {
      for (auto& x : vals) x = static_cast<S>(truncated_normal(rng, 0.02));
    }
    index_[name] = static_cast<int>(params_.size());
    params_.push_back({name, std::move(t)});
  }
}

template <typename S>
Model<S> Model<S>::blank(const ModelConfig& cfg, bool include_heads) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  m.heads_stripped_ = !include_heads;
  for (auto& [name, shape] : param_specs(cfg, include_heads)) {
    m.index_[name] = static_cast<int>(m.params_.size());
    m.params_.push_back({name, Tensor<S>::zeros(shape, true)});
  }
  return m;
}

template <typename S>
void Model<S>::strip_heads() {
  if (heads_stripped_) return;
  heads_stripped_ = true;
  std::vector<NamedParam<S>> kept;
  for (auto& p : params_) {
    if (p.name.rfind("head.", 0) != 0) kept.push_back(std::move(p));
  }
  params_ = std::move(kept);
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) index_[params_[i].name] = static_cast<int>(i);
}

template <typename S>
std::vector<Tensor<S>> Model<S>::parameters() {
  std::vector<Tensor<S>> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.tensor);
  return out;
}

template <typename S>
Tensor<S>& Model<S>::param(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    if (name.rfind("head.", 0) == 0 && heads_stripped_) {
      throw ShapeError("model heads were stripped; " + name + " is gone");
    }
    throw ShapeError("unknown parameter: " + name);
  }
  return params_[it->second].tensor;
}

template <typename S>
const Tensor<S>& Model<S>::param(const std::string& name) const {
  return const_cast<Model<S>*>(this)->param(name);
}

template <typename S>
std::int64_t Model<S>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& p : params_) total += p.tensor.numel();
  return total;
}

template <typename S>
void Model<S>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename S>
Tensor<S> Model<S>::embed_visual(const ImageRaster& image) const {
  if (cfg_.image_tokens == 0) throw ShapeError("embed_visual: model has no visual branch");
  if (image.height != cfg_.raster_h || image.width != cfg_.raster_w) {
    throw ShapeError("embed_visual: raster " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + " does not match configured " +
                     std::to_string(cfg_.raster_h) + "x" + std::to_string(cfg_.raster_w));
  }
  std::vector<S> pixels(image.pixels.begin(), image.pixels.end());
  Tensor<S> img = Tensor<S>::from_values({3, image.height, image.width}, std::move(pixels));
  Tensor<S> feat = conv2x2(img, param("vis.conv.weight"), param("vis.conv.bias"));
  Tensor<S> rows = channels_to_rows(feat);  // [image_tokens, dim]
  Tensor<S> v = add_row(matmul(rows, param("vis.proj.weight")), param("vis.proj.bias"));
  return add(v, param("vis.pos_2d"));
}

template <typename S>
Tensor<S> Model<S>::embed_text(const TextInput& input) const {
  const int s = cfg_.max_seq;
  if (static_cast<int>(input.ids.size()) != s || static_cast<int>(input.spatial.size()) != s ||
      static_cast<int>(input.valid.size()) != s) {
    throw ShapeError("embed_text: input must carry exactly max_seq positions");
  }
  std::vector<int> x1(s), x3(s), y1(s), y3(s), hh(s), ww(s), pos(s);
  for (int i = 0; i < s; ++i) {
    const auto& sp = input.spatial[i];
    x1[i] = sp.x1;
    x3[i] = sp.x3;
    y1[i] = sp.y1;
    y3[i] = sp.y3;
    hh[i] = sp.height;
    ww[i] = sp.width;
    pos[i] = i;
  }
  Tensor<S> t = embedding_lookup(param("emb.token"), input.ids);
  t = add(t, embedding_lookup_or_zero(param("emb.spatial_x"), x1));
  t = add(t, embedding_lookup_or_zero(param("emb.spatial_x"), x3));
  t = add(t, embedding_lookup_or_zero(param("emb.spatial_y"), y1));
  t = add(t, embedding_lookup_or_zero(param("emb.spatial_y"), y3));
  t = add(t, embedding_lookup_or_zero(param("emb.spatial_h"), hh));
  t = add(t, embedding_lookup_or_zero(param("emb.spatial_w"), ww));
  t = add(t, embedding_lookup(param("emb.pos_text"), pos));
  return t;
}

template <typename S>
AssembledInput<S> Model<S>::assemble_input(const Tensor<S>& text_rows, const Tensor<S>& visual_rows,
                                           const std::vector<std::uint8_t>& text_valid) const {
  if (cfg_.image_tokens == 0) return assemble_text_only(text_rows, text_valid);
  if (visual_rows.dim(0) != cfg_.image_tokens) {
    throw ShapeError("assemble_input: visual block must have image_tokens rows");
  }
  AssembledInput<S> out;
  out.text_len = text_rows.dim(0);
  out.visual_len = visual_rows.dim(0);
  Tensor<S> t_bar = add_row(text_rows, slice_rows(param("emb.modality"), 0, 1));
  Tensor<S> v_bar = add_row(visual_rows, slice_rows(param("emb.modality"), 1, 1));
  out.rows = concat_rows<S>({t_bar, v_bar});
  out.valid = text_valid;
  out.valid.resize(text_valid.size() + out.visual_len, 1);
  return out;
}

template <typename S>
AssembledInput<S> Model<S>::assemble_text_only(const Tensor<S>& text_rows,
                                               const std::vector<std::uint8_t>& text_valid) const {
  AssembledInput<S> out;
  out.text_len = text_rows.dim(0);
  out.visual_len = 0;
  out.rows = add_row(text_rows, slice_rows(param("emb.modality"), 0, 1));
  out.valid = text_valid;
  return out;
}

template <typename S>
typename Model<S>::AttentionParams Model<S>::attention_params(const std::string& prefix) const {
  AttentionParams p;
  p.wq = &param(prefix + ".q.weight");
  p.bq = &param(prefix + ".q.bias");
  p.wk = &param(prefix + ".k.weight");
  p.bk = &param(prefix + ".k.bias");
  p.wv = &param(prefix + ".v.weight");
  p.bv = &param(prefix + ".v.bias");
  p.wo = &param(prefix + ".o.weight");
  p.bo = &param(prefix + ".o.bias");
  return p;
}

template <typename S>
Tensor<S> Model<S>::attention(const Tensor<S>& queries, const Tensor<S>& keys_values,
                              const std::vector<std::uint8_t>& key_valid, bool causal,
                              bool canonical, const AttentionParams& p) const {
  const int nq = queries.dim(0);
  const int nk = keys_values.dim(0);
  const int dh = cfg_.dim / cfg_.heads;
  if (static_cast<int>(key_valid.size()) != nk) {
    throw ShapeError("attention: key_valid length does not match key rows");
  }
  Tensor<S> q = add_row(matmul(queries, *p.wq), *p.bq);
  Tensor<S> k = add_row(matmul(keys_values, *p.wk), *p.bk);
  Tensor<S> v = add_row(matmul(keys_values, *p.wv), *p.bv);

  std::vector<int> order(nk);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint8_t> valid = key_valid;
  if (canonical) {
    order = canonical_key_order(k.values(), v.values(), nk, cfg_.dim, key_valid);
    k = gather_rows(k, order);
    v = gather_rows(v, order);
    for (int j = 0; j < nk; ++j) valid[j] = key_valid[order[j]];
  }

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(nq) * nk);
  for (int i = 0; i < nq; ++i)
    for (int j = 0; j < nk; ++j)
      mask[static_cast<std::size_t>(i) * nk + j] =
          valid[j] && (!causal || order[j] <= i) ? 1 : 0;

  const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<Tensor<S>> head_ctx;
  head_ctx.reserve(cfg_.heads);
  for (int h = 0; h < cfg_.heads; ++h) {
    Tensor<S> qh = slice_cols(q, h * dh, dh);
    Tensor<S> kh = slice_cols(k, h * dh, dh);
    Tensor<S> vh = slice_cols(v, h * dh, dh);
    Tensor<S> scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    Tensor<S> attn = masked_softmax_rows(scores, mask);
    head_ctx.push_back(matmul(attn, vh));
  }
  Tensor<S> ctx = concat_cols(head_ctx);
  return add_row(matmul(ctx, *p.wo), *p.bo);
}

template <typename S>
Tensor<S> Model<S>::ln(const Tensor<S>& x, const std::string& prefix) const {
  return layer_norm(x, param(prefix + ".gain"), param(prefix + ".bias"), S(1e-5));
}

template <typename S>
Tensor<S> Model<S>::ffn(const Tensor<S>& x, const std::string& prefix) const {
  Tensor<S> hidden = relu(add_row(matmul(x, param(prefix + ".in.weight")), param(prefix + ".in.bias")));
  return add_row(matmul(hidden, param(prefix + ".out.weight")), param(prefix + ".out.bias"));
}

template <typename S>
Tensor<S> Model<S>::encode(const AssembledInput<S>& input) const {
  Tensor<S> x = input.rows;
  for (int i = 0; i < cfg_.enc_layers; ++i) {
    std::string prefix = "enc." + std::to_string(i);
    Tensor<S> normed = ln(x, prefix + ".ln_attn");
    x = add(x, attention(normed, normed, input.valid, /*causal=*/false, /*canonical=*/true,
                         attention_params(prefix + ".attn")));
    x = add(x, ffn(ln(x, prefix + ".ln_ffn"), prefix + ".ffn"));
  }
  return ln(x, "enc.final_ln");
}

template <typename S>
Tensor<S> Model<S>::decode(const Tensor<S>& encoder_states,
                           const std::vector<std::uint8_t>& encoder_valid,
                           const std::vector<int>& prefix_ids) const {
  const int len = static_cast<int>(prefix_ids.size());
  if (len < 1) throw ShapeError("decode: prefix must contain at least the start token");
  if (len > cfg_.max_seq) {
    throw ShapeError("decode: prefix length " + std::to_string(len) +
                     " exceeds decoder budget " + std::to_string(cfg_.max_seq));
  }
  if (static_cast<int>(encoder_valid.size()) != encoder_states.dim(0)) {
    throw ShapeError("decode: encoder_valid does not match encoder states");
  }
  std::vector<int> pos(len);
  std::iota(pos.begin(), pos.end(), 0);
  Tensor<S> x = add(embedding_lookup(param("emb.token"), prefix_ids),
                    embedding_lookup(param("emb.pos_dec"), pos));
  std::vector<std::uint8_t> self_valid(len, 1);
  for (int i = 0; i < cfg_.dec_layers; ++i) {
    std::string prefix = "dec." + std::to_string(i);
    Tensor<S> normed = ln(x, prefix + ".ln_self");
    x = add(x, attention(normed, normed, self_valid, /*causal=*/true, /*canonical=*/false,
                         attention_params(prefix + ".self_attn")));
    x = add(x, attention(ln(x, prefix + ".ln_cross"), encoder_states, encoder_valid,
                         /*causal=*/false, /*canonical=*/false,
                         attention_params(prefix + ".cross_attn")));
    x = add(x, ffn(ln(x, prefix + ".ln_ffn"), prefix + ".ffn"));
  }
  x = ln(x, "dec.final_ln");
  return matmul(x, transpose(param("emb.token")));  // tied output embedding
}

template <typename S>
Tensor<S> Model<S>::decode_step(const Tensor<S>& encoder_states,
                                const std::vector<std::uint8_t>& encoder_valid,
                                const std::vector<int>& prefix_ids) const {
  Tensor<S> logits = decode(encoder_states, encoder_valid, prefix_ids);
  return slice_rows(logits, logits.dim(0) - 1, 1);
}

template <typename S>
Tensor<S> Model<S>::head_token_to_line(const Tensor<S>& encoder_states,
                                       const std::vector<TokenPair>& pairs, int text_len) const {
  if (heads_stripped_) throw ShapeError("head_token_to_line: heads were stripped");
  if (pairs.empty()) throw ShapeError("head_token_to_line: no pairs");
  std::vector<int> is, js;
  for (const auto& p : pairs) {
    if (p.i < 0 || p.i >= text_len || p.j < 0 || p.j >= text_len) {
      throw ShapeError("head_token_to_line: pair index outside the text block");
    }
    is.push_back(p.i);
    js.push_back(p.j);
  }
  Tensor<S> si = gather_rows(encoder_states, is);
  Tensor<S> sj = gather_rows(encoder_states, js);
  const Tensor<S>& w = param("head.line.weight");
  const Tensor<S>& b = param("head.line.bias");
  Tensor<S> fwd = add_row(matmul(concat_cols<S>({si, sj}), w), b);
  Tensor<S> rev = add_row(matmul(concat_cols<S>({sj, si}), w), b);
  return scale(add(fwd, rev), S(0.5));
}

template <typename S>
Tensor<S> Model<S>::head_token_to_grid(const Tensor<S>& encoder_states, int text_len) const {
  if (heads_stripped_) throw ShapeError("head_token_to_grid: heads were stripped");
  Tensor<S> text_states = slice_rows(encoder_states, 0, text_len);
  return add_row(matmul(text_states, param("head.grid.weight")), param("head.grid.bias"));
}

// ---- checkpointing -------------------------------------------------------

namespace {

json config_to_json(const ModelConfig& cfg) {
  return json{{"dim", cfg.dim},
              {"ff", cfg.ff},
              {"heads", cfg.heads},
              {"enc_layers", cfg.enc_layers},
              {"dec_layers", cfg.dec_layers},
              {"max_seq", cfg.max_seq},
              {"image_tokens", cfg.image_tokens},
              {"raster_h", cfg.raster_h},
              {"raster_w", cfg.raster_w},
              {"grid_cols", cfg.grid.cols},
              {"grid_rows", cfg.grid.rows},
              {"vocab_size", cfg.vocab_size},
              {"n_bins", cfg.n_bins}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.dim = j.at("dim").get<int>();
  cfg.ff = j.at("ff").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.enc_layers = j.at("enc_layers").get<int>();
  cfg.dec_layers = j.at("dec_layers").get<int>();
  cfg.max_seq = j.at("max_seq").get<int>();
  cfg.image_tokens = j.at("image_tokens").get<int>();
  cfg.raster_h = j.at("raster_h").get<int>();
  cfg.raster_w = j.at("raster_w").get<int>();
  cfg.grid.cols = j.at("grid_cols").get<int>();
  cfg.grid.rows = j.at("grid_rows").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.n_bins = j.at("n_bins").get<int>();
  return cfg;
}

void write_f32_le(std::ofstream& out, float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  char bytes[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                   static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
  out.write(bytes, 4);
}

float read_f32_le(const unsigned char* p) {
  std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                    (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

}  // namespace

template <typename S>
void save_checkpoint(const Model<S>& model, const std::string& dir, std::int64_t step) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "deskdoc-ckpt";
  manifest["version"] = 1;
  manifest["step"] = step;
  manifest["heads_stripped"] = model.heads_stripped();
  manifest["config"] = config_to_json(model.config());
  json tensors = json::array();
  std::int64_t offset = 0;
  for (const auto& p : model.named_parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"dtype", "f32"}, {"offset", offset}});
    offset += p.tensor.numel() * 4;
  }
  manifest["tensors"] = std::move(tensors);

  std::ofstream blob(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!blob) throw DataError("save_checkpoint: cannot write weights in " + dir);
  for (const auto& p : model.named_parameters()) {
    for (S v : p.tensor.values()) write_f32_le(blob, static_cast<float>(v));
  }
  blob.close();
  if (!blob) throw DataError("save_checkpoint: blob write failed in " + dir);

  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw DataError("save_checkpoint: cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
}

CheckpointInfo read_checkpoint_info(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw DataError("checkpoint: cannot open manifest in " + dir);
  json manifest = json::parse(mf, nullptr, /*allow_exceptions=*/true);
  if (manifest.value("format", "") != "deskdoc-ckpt") {
    throw DataError("checkpoint: not a deskdoc checkpoint: " + dir);
  }
  CheckpointInfo info;
  info.config = config_from_json(manifest.at("config"));
  info.step = manifest.at("step").get<std::int64_t>();
  info.heads_stripped = manifest.value("heads_stripped", false);
  return info;
}

template <typename S>
Model<S> load_checkpoint(const std::string& dir, bool strip_heads, std::int64_t* step_out) {
  std::ifstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw DataError("load_checkpoint: cannot open manifest in " + dir);
  json manifest = json::parse(mf);
  if (manifest.value("format", "") != "deskdoc-ckpt" || manifest.value("version", 0) != 1) {
    throw DataError("load_checkpoint: unsupported manifest in " + dir);
  }
  ModelConfig cfg = config_from_json(manifest.at("config"));
  bool stored_stripped = manifest.value("heads_stripped", false);
  if (step_out) *step_out = manifest.at("step").get<std::int64_t>();

  Model<S> model = Model<S>::blank(cfg, /*include_heads=*/!stored_stripped);

  // The manifest's tensor table must reproduce the model exactly.
  const auto& tensors = manifest.at("tensors");
  const auto& named = model.named_parameters();
  if (tensors.size() != named.size()) {
    throw DataError("load_checkpoint: manifest lists " + std::to_string(tensors.size()) +
                    " tensors, model needs " + std::to_string(named.size()));
  }

  std::ifstream blob(fs::path(dir) / "weights.bin", std::ios::binary | std::ios::ate);
  if (!blob) throw DataError("load_checkpoint: cannot open weights in " + dir);
  const std::int64_t blob_size = static_cast<std::int64_t>(blob.tellg());
  blob.seekg(0);

  std::int64_t expected = 0;
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != named[i].name ||
        t.at("shape").get<std::vector<int>>() != named[i].tensor.shape() ||
        t.at("dtype").get<std::string>() != "f32" ||
        t.at("offset").get<std::int64_t>() != expected) {
      throw DataError("load_checkpoint: manifest/shape mismatch at tensor " + named[i].name);
    }
    expected += named[i].tensor.numel() * 4;
  }
  if (blob_size != expected) {
    throw DataError("load_checkpoint: weights.bin is corrupt (have " + std::to_string(blob_size) +
                    " bytes, manifest needs " + std::to_string(expected) + ")");
  }

  std::vector<unsigned char> bytes(static_cast<std::size_t>(expected));
  blob.read(reinterpret_cast<char*>(bytes.data()), expected);
  if (!blob) throw DataError("load_checkpoint: weights.bin is corrupt (short read)");

  Model<S> target = std::move(model);
  std::size_t cursor = 0;
  for (const auto& p : target.named_parameters()) {
    auto& vals = const_cast<Tensor<S>&>(p.tensor).mutable_values();
    for (auto& v : vals) {
      v = static_cast<S>(read_f32_le(bytes.data() + cursor));
      cursor += 4;
    }
  }
  if (strip_heads) target.strip_heads();
  return target;
}

// ---- explicit instantiations -------------------------------------------

template class Model<float>;
template class Model<double>;
template void save_checkpoint(const Model<float>&, const std::string&, std::int64_t);
template void save_checkpoint(const Model<double>&, const std::string&, std::int64_t);
template Model<float> load_checkpoint(const std::string&, bool, std::int64_t*);
template Model<double> load_checkpoint(const std::string&, bool, std::int64_t*);

}  // namespace deskdoc
