#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "deskdoc/common.hpp"
#include "deskdoc/data.hpp"
#include "deskdoc/geometry.hpp"
#include "deskdoc/tensor.hpp"

namespace deskdoc {

struct ModelConfig {
  int dim = 64;
  int ff = 256;
  int heads = 4;
  int enc_layers = 2;
  int dec_layers = 2;
  int max_seq = 64;      // text positions (s); also the decoder length budget
  int image_tokens = 32; // (raster_h/2) * (raster_w/2); 0 disables the visual branch
  int raster_h = 16;
  int raster_w = 8;
  GridConfig grid{4, 4};
  int vocab_size = 0;
  int n_bins = 1000;

  void validate() const;

  // Named presets: tiny (CI budget) plus small/base/large. vocab_size stays 0
  // until a tokenizer is attached.
  static ModelConfig for_size(const std::string& size);
};

// Chooses an even raster (h, w) whose 2x2 patches give exactly `tokens`
// visual tokens, preferring portrait pages around 2:1.
std::pair<int, int> raster_for_image_tokens(int tokens);

// Per-position encoder text input. Masked positions carry n_bins in all six
// spatial fields, which selects the permanently-zero embedding row.
struct TextInput {
  std::vector<int> ids;
  std::vector<SpatialIndices> spatial;
  std::vector<std::uint8_t> valid;  // 0 on PAD positions
};

template <typename S>
struct AssembledInput {
  Tensor<S> rows;  // [text_len + visual_len, dim], text block first
  std::vector<std::uint8_t> valid;
  int text_len = 0;
  int visual_len = 0;
};

template <typename S>
struct NamedParam {
  std::string name;
  Tensor<S> tensor;
};

std::vector<std::pair<std::string, std::vector<int>>> param_specs(const ModelConfig& cfg,
                                                                  bool include_heads = true);
std::int64_t count_params(const ModelConfig& cfg, bool include_heads = true);

template <typename S>
class Model {
 public:
  // Builds and initializes all parameters: truncated normal (sigma 0.02) for
  // weights and embeddings, ones for layer-norm gains, zeros for biases.
  Model(const ModelConfig& cfg, Rng& rng);

  static Model blank(const ModelConfig& cfg, bool include_heads = true);

  const ModelConfig& config() const { return cfg_; }
  bool heads_stripped() const { return heads_stripped_; }
  void strip_heads();

  const std::vector<NamedParam<S>>& named_parameters() const { return params_; }
  std::vector<Tensor<S>> parameters();
  Tensor<S>& param(const std::string& name);
  const Tensor<S>& param(const std::string& name) const;
  std::int64_t parameter_count() const;
  void zero_grad();

  // V_s = proj(conv2x2(image)) + learned 2d positions.
  Tensor<S> embed_visual(const ImageRaster& image) const;

  // T_s = token embedding + six spatial lookups + learned 1d position.
  Tensor<S> embed_text(const TextInput& input) const;

  // Adds the per-modality offsets and concatenates text-then-visual.
  AssembledInput<S> assemble_input(const Tensor<S>& text_rows, const Tensor<S>& visual_rows,
                                   const std::vector<std::uint8_t>& text_valid) const;

  AssembledInput<S> assemble_text_only(const Tensor<S>& text_rows,
                                       const std::vector<std::uint8_t>& text_valid) const;

  // Pre-norm transformer encoder over the assembled sequence.
  Tensor<S> encode(const AssembledInput<S>& input) const;

  // Teacher-forced decoder: causal self-attention over the prefix plus
  // cross-attention over all encoder states. Returns [len, vocab] logits.
  Tensor<S> decode(const Tensor<S>& encoder_states, const std::vector<std::uint8_t>& encoder_valid,
                   const std::vector<int>& prefix_ids) const;

  // Logits for the next token after the prefix.
  Tensor<S> decode_step(const Tensor<S>& encoder_states,
                        const std::vector<std::uint8_t>& encoder_valid,
                        const std::vector<int>& prefix_ids) const;

  // Order-symmetrized 3-way pair head over encoder text states.
  Tensor<S> head_token_to_line(const Tensor<S>& encoder_states,
                               const std::vector<TokenPair>& pairs, int text_len) const;

  // Per-text-token (m*n)-way cell head.
  Tensor<S> head_token_to_grid(const Tensor<S>& encoder_states, int text_len) const;

 private:
  Model() = default;

  struct AttentionParams {
    const Tensor<S>*wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  };
  AttentionParams attention_params(const std::string& prefix) const;

  Tensor<S> attention(const Tensor<S>& queries, const Tensor<S>& keys_values,
                      const std::vector<std::uint8_t>& key_valid, bool causal,
                      bool canonical_key_order, const AttentionParams& p) const;

  Tensor<S> ffn(const Tensor<S>& x, const std::string& prefix) const;
  Tensor<S> ln(const Tensor<S>& x, const std::string& prefix) const;

  ModelConfig cfg_;
  bool heads_stripped_ = false;
  std::vector<NamedParam<S>> params_;
  std::unordered_map<std::string, int> index_;
};

// ---- checkpointing -------------------------------------------------------

// Directory layout: manifest.json (config, step, tensor table with byte
// offsets) + weights.bin (all tensors as little-endian float32, in manifest
// order). Round trips are bit exact.
template <typename S>
void save_checkpoint(const Model<S>& model, const std::string& dir, std::int64_t step);

struct CheckpointInfo {
  ModelConfig config;
  std::int64_t step = 0;
  bool heads_stripped = false;
};

CheckpointInfo read_checkpoint_info(const std::string& dir);

template <typename S>
Model<S> load_checkpoint(const std::string& dir, bool strip_heads = false,
                         std::int64_t* step_out = nullptr);

}  // namespace deskdoc
