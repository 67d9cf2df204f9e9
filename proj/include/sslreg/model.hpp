#pragma once

// Transformer encoder shared by three heads: classification, masked-token
// prediction (MTP) and augmentation-type prediction (SATP).

#include <span>
#include <string>
#include <vector>

#include "sslreg/rng.hpp"
#include "sslreg/tensor.hpp"
#include "sslreg/text.hpp"

namespace sslreg {

struct EncoderConfig {
  int num_layers = 2;
  int num_heads = 4;
  int d_model = 64;
  int d_ff = 256;
  int max_len = 128;
  int vocab_size = 0;
  double dropout_rate = 0.1;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

struct ModelShape {
  EncoderConfig encoder;
  int num_classes = 2;
  int num_ops = 4;  // size of the active augmentation set

  void validate() const;
  bool operator==(const ModelShape&) const = default;
};

template <class T>
struct LayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor<T> ln1_gamma, ln1_beta;
  Tensor<T> ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor<T> ln2_gamma, ln2_beta;
};

/// dense(d_model -> d_model), tanh, out(d_model -> outputs).
template <class T>
struct TanhHead {
  Tensor<T> dense_w, dense_b, out_w, out_b;
};

enum class ParamGroup { kEncoder, kClassifier, kMtp, kSatp };

template <class T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
  ParamGroup group;
  bool decay;  // false for biases and layer-norm parameters
};

/// Weights are stored [in, out] and applied as x W + b.
template <class T>
struct ModelParams {
  ModelShape shape;
  Tensor<T> token_embedding;     // [vocab, d_model]
  Tensor<T> position_embedding;  // [max_len, d_model]
  std::vector<LayerParams<T>> layers;
  TanhHead<T> classifier;
  Tensor<T> mtp_w, mtp_b;  // [d_model, vocab], [vocab]
  TanhHead<T> satp;

  /// Truncated normal (std 0.02, cut at 2 std) for matrices and embeddings,
  /// zero biases, unit layer-norm gain.
  static ModelParams init(const ModelShape& shape, Rng& rng);
  /// Zero-filled parameters with the right shapes (used by checkpoint loading).
  static ModelParams zeros(const ModelShape& shape);

  /// Fixed, stable order; names are what the checkpoint stores.
  std::vector<NamedParam<T>> named() const;
  std::vector<Tensor<T>> tensors() const;
  std::vector<Tensor<T>> tensors(ParamGroup group) const;
  std::size_t parameter_count() const;

  void reinit_heads(Rng& rng);
  ModelParams clone() const;
  void copy_values_from(const ModelParams& other);
  void zero_grad();
};

template <class T>
struct ForwardContext {
  Tape<T>& tape;
  bool train = false;
  Rng* dropout_rng = nullptr;  // required when train and dropout_rate > 0
};

/// Hidden states [len(ids), d_model]. Post-norm blocks:
/// h = LN(h + MHA(h)); h = LN(h + FFN(h)).
template <class T>
Tensor<T> encoder_forward(ForwardContext<T>& ctx, const ModelParams<T>& params, std::span<const TokenId> ids);

/// Concatenated per-head attention outputs before the output projection.
template <class T>
Tensor<T> attention_heads(ForwardContext<T>& ctx, const LayerParams<T>& layer, const Tensor<T>& h,
                          int num_heads, double dropout_rate);

/// `h_cls` is [rows, d_model]; one logit row per input row.
template <class T>
Tensor<T> classification_head(ForwardContext<T>& ctx, const ModelParams<T>& params, const Tensor<T>& h_cls);
template <class T>
Tensor<T> satp_head(ForwardContext<T>& ctx, const ModelParams<T>& params, const Tensor<T>& h_cls);
/// One vocabulary logit row per masked position, in the given order.
template <class T>
Tensor<T> mtp_head(ForwardContext<T>& ctx, const ModelParams<T>& params, const Tensor<T>& hidden,
                   std::span<const std::size_t> positions);

/// Class prediction for one encoded sequence, dropout off.
template <class T>
int predict(const ModelParams<T>& params, std::span<const TokenId> ids);

}  // namespace sslreg
