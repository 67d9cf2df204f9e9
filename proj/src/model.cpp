#include "sslreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sslreg/error.hpp"

namespace sslreg {

void EncoderConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("encoder config: " + what); };
  if (num_layers < 1) fail("num_layers must be >= 1");
  if (num_heads < 1) fail("num_heads must be >= 1");
  if (d_model < 1 || d_model % num_heads != 0) fail("d_model must be a positive multiple of num_heads");
  if (d_ff < 1) fail("d_ff must be >= 1");
  if (max_len < 2) fail("max_len must be >= 2");
  if (vocab_size <= special::kCount) fail("vocab_size must exceed the special-token count");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must be in [0, 1)");
}

void ModelShape::validate() const {
  encoder.validate();
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (num_ops < 1 || num_ops > 4) throw ConfigError("model: num_ops must be in [1, 4]");
}

namespace {

template <class T>
Tensor<T> param(Shape shape) {
  return Tensor<T>::zeros(std::move(shape), true);
}

template <class T>
void truncated_normal(Tensor<T>& t, Rng& rng, double std_dev = 0.02) {
  std::normal_distribution<double> dist(0.0, std_dev);
  for (T& v : t.data()) {
    double x = dist(rng);
    while (std::abs(x) > 2.0 * std_dev) x = dist(rng);
    v = static_cast<T>(x);
  }
}

template <class T>
void fill(Tensor<T>& t, T value) {
  std::fill(t.data().begin(), t.data().end(), value);
}

template <class T>
TanhHead<T> make_head(std::size_t d, std::size_t outputs) {
  return {param<T>({d, d}), param<T>({d}), param<T>({d, outputs}), param<T>({outputs})};
}

template <class T>
void init_head(TanhHead<T>& head, Rng& rng) {
  truncated_normal(head.dense_w, rng);
  fill(head.dense_b, T(0));
  truncated_normal(head.out_w, rng);
  fill(head.out_b, T(0));
}

template <class T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return ops::add_bias(tape, ops::matmul(tape, x, w), b);
}

template <class T>
Tensor<T> maybe_dropout(ForwardContext<T>& ctx, const Tensor<T>& x, double rate) {
  if (!ctx.train || rate == 0.0) return x;
  if (ctx.dropout_rng == nullptr) throw Error("forward: train mode with dropout needs a dropout rng");
  return ops::dropout(ctx.tape, x, rate, *ctx.dropout_rng);
}

template <class T>
Tensor<T> tanh_head(ForwardContext<T>& ctx, const TanhHead<T>& head, const Tensor<T>& h) {
  auto hidden = ops::tanh(ctx.tape, linear(ctx.tape, h, head.dense_w, head.dense_b));
  return linear(ctx.tape, hidden, head.out_w, head.out_b);
}

}  // namespace

template <class T>
ModelParams<T> ModelParams<T>::zeros(const ModelShape& shape) {
  shape.validate();
  const auto d = static_cast<std::size_t>(shape.encoder.d_model);
  const auto ff = static_cast<std::size_t>(shape.encoder.d_ff);
  const auto vocab = static_cast<std::size_t>(shape.encoder.vocab_size);
  ModelParams p;
  p.shape = shape;
  // The checkpoint stores the rate as float32; keep shapes comparable after a round trip.
  p.shape.encoder.dropout_rate = static_cast<double>(static_cast<float>(shape.encoder.dropout_rate));
  p.token_embedding = param<T>({vocab, d});
  p.position_embedding = param<T>({static_cast<std::size_t>(shape.encoder.max_len), d});
  for (int l = 0; l < shape.encoder.num_layers; ++l) {
    LayerParams<T> layer{param<T>({d, d}), param<T>({d}), param<T>({d, d}), param<T>({d}),
                         param<T>({d, d}), param<T>({d}), param<T>({d, d}), param<T>({d}),
                         param<T>({d}),    param<T>({d}), param<T>({d, ff}), param<T>({ff}),
                         param<T>({ff, d}), param<T>({d}), param<T>({d}),   param<T>({d})};
    p.layers.push_back(std::move(layer));
  }
  p.classifier = make_head<T>(d, static_cast<std::size_t>(shape.num_classes));
  p.mtp_w = param<T>({d, vocab});
  p.mtp_b = param<T>({vocab});
  p.satp = make_head<T>(d, static_cast<std::size_t>(shape.num_ops));
  return p;
}

template <class T>
ModelParams<T> ModelParams<T>::init(const ModelShape& shape, Rng& rng) {
  ModelParams p = zeros(shape);
  truncated_normal(p.token_embedding, rng);
  truncated_normal(p.position_embedding, rng);
  for (auto& layer : p.layers) {
    for (Tensor<T>* w : {&layer.wq, &layer.wk, &layer.wv, &layer.wo, &layer.ff_w1, &layer.ff_w2})
      truncated_normal(*w, rng);
    fill(layer.ln1_gamma, T(1));
    fill(layer.ln2_gamma, T(1));
  }
  p.reinit_heads(rng);
  return p;
}

template <class T>
void ModelParams<T>::reinit_heads(Rng& rng) {
  init_head(classifier, rng);
  truncated_normal(mtp_w, rng);
  fill(mtp_b, T(0));
  init_head(satp, rng);
}

template <class T>
std::vector<NamedParam<T>> ModelParams<T>::named() const {
  std::vector<NamedParam<T>> out;
  auto add = [&](std::string name, const Tensor<T>& t, ParamGroup g, bool decay) {
    out.push_back({std::move(name), t, g, decay});
  };
  add("embeddings.token", token_embedding, ParamGroup::kEncoder, true);
  add("embeddings.position", position_embedding, ParamGroup::kEncoder, true);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";
    add(pre + "attn.wq", L.wq, ParamGroup::kEncoder, true);
    add(pre + "attn.bq", L.bq, ParamGroup::kEncoder, false);
    add(pre + "attn.wk", L.wk, ParamGroup::kEncoder, true);
    add(pre + "attn.bk", L.bk, ParamGroup::kEncoder, false);
    add(pre + "attn.wv", L.wv, ParamGroup::kEncoder, true);
    add(pre + "attn.bv", L.bv, ParamGroup::kEncoder, false);
    add(pre + "attn.wo", L.wo, ParamGroup::kEncoder, true);
    add(pre + "attn.bo", L.bo, ParamGroup::kEncoder, false);
    add(pre + "ln1.gamma", L.ln1_gamma, ParamGroup::kEncoder, false);
    add(pre + "ln1.beta", L.ln1_beta, ParamGroup::kEncoder, false);
    add(pre + "ffn.w1", L.ff_w1, ParamGroup::kEncoder, true);
    add(pre + "ffn.b1", L.ff_b1, ParamGroup::kEncoder, false);
    add(pre + "ffn.w2", L.ff_w2, ParamGroup::kEncoder, true);
    add(pre + "ffn.b2", L.ff_b2, ParamGroup::kEncoder, false);
    add(pre + "ln2.gamma", L.ln2_gamma, ParamGroup::kEncoder, false);
    add(pre + "ln2.beta", L.ln2_beta, ParamGroup::kEncoder, false);
  }
  auto add_head = [&](const std::string& pre, const TanhHead<T>& h, ParamGroup g) {
    add(pre + ".dense.w", h.dense_w, g, true);
    add(pre + ".dense.b", h.dense_b, g, false);
    add(pre + ".out.w", h.out_w, g, true);
    add(pre + ".out.b", h.out_b, g, false);
  };
  add_head("classifier", classifier, ParamGroup::kClassifier);
  add("mtp.w", mtp_w, ParamGroup::kMtp, true);
  add("mtp.b", mtp_b, ParamGroup::kMtp, false);
  add_head("satp", satp, ParamGroup::kSatp);
  return out;
}

template <class T>
std::vector<Tensor<T>> ModelParams<T>::tensors() const {
  std::vector<Tensor<T>> out;
  for (auto& np : named()) out.push_back(np.tensor);
  return out;
}

template <class T>
std::vector<Tensor<T>> ModelParams<T>::tensors(ParamGroup group) const {
  std::vector<Tensor<T>> out;
  for (auto& np : named())
    if (np.group == group) out.push_back(np.tensor);
  return out;
}

template <class T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (auto& np : named()) n += np.tensor.size();
  return n;
}

template <class T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams p = zeros(shape);
  p.copy_values_from(*this);
  return p;
}

template <class T>
void ModelParams<T>::copy_values_from(const ModelParams& other) {
  if (!(shape == other.shape)) throw Error("copy_values_from: model shapes differ");
  auto dst = named();
  auto src = other.named();
  for (std::size_t i = 0; i < dst.size(); ++i)
    std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), dst[i].tensor.data().begin());
}

template <class T>
void ModelParams<T>::zero_grad() {
  for (auto& np : named()) np.tensor.zero_grad();
}

template <class T>
Tensor<T> attention_heads(ForwardContext<T>& ctx, const LayerParams<T>& layer, const Tensor<T>& h,
                          int num_heads, double dropout_rate) {
  auto& tape = ctx.tape;
  const std::size_t d = h.cols();
  const std::size_t head_dim = d / static_cast<std::size_t>(num_heads);
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  auto q = linear(tape, h, layer.wq, layer.bq);
  auto k = linear(tape, h, layer.wk, layer.bk);
  auto v = linear(tape, h, layer.wv, layer.bv);
  std::vector<Tensor<T>> heads;
  heads.reserve(static_cast<std::size_t>(num_heads));
  for (std::size_t hd = 0; hd < static_cast<std::size_t>(num_heads); ++hd) {
    const std::size_t start = hd * head_dim;
    auto qh = ops::column_slice(tape, q, start, head_dim);
    auto kh = ops::column_slice(tape, k, start, head_dim);
    auto vh = ops::column_slice(tape, v, start, head_dim);
    auto scores = ops::scale(tape, ops::matmul_nt(tape, qh, kh), scale);
    auto weights = maybe_dropout(ctx, ops::softmax(tape, scores, 1), dropout_rate);
    heads.push_back(ops::matmul(tape, weights, vh));
  }
  return ops::concat_columns<T>(tape, heads);
}

template <class T>
Tensor<T> encoder_forward(ForwardContext<T>& ctx, const ModelParams<T>& params, std::span<const TokenId> ids) {
  const auto& cfg = params.shape.encoder;
  if (ids.empty()) throw ShapeError("encoder: empty input");
  if (ids.size() > static_cast<std::size_t>(cfg.max_len))
    throw ShapeError("encoder: input length " + std::to_string(ids.size()) + " exceeds max_len " +
                     std::to_string(cfg.max_len));
  auto& tape = ctx.tape;
  std::vector<TokenId> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<TokenId>(i);
  auto h = ops::add(tape, ops::embedding_lookup(tape, params.token_embedding, ids),
                    ops::embedding_lookup<T>(tape, params.position_embedding, positions));
  for (const auto& layer : params.layers) {
    auto attn = attention_heads(ctx, layer, h, cfg.num_heads, cfg.dropout_rate);
    auto projected = linear(tape, attn, layer.wo, layer.bo);
    h = ops::layer_norm(tape, ops::add(tape, h, projected), layer.ln1_gamma, layer.ln1_beta);
    auto inner = maybe_dropout(ctx, ops::gelu(tape, linear(tape, h, layer.ff_w1, layer.ff_b1)), cfg.dropout_rate);
    auto ffn = linear(tape, inner, layer.ff_w2, layer.ff_b2);
    h = ops::layer_norm(tape, ops::add(tape, h, ffn), layer.ln2_gamma, layer.ln2_beta);
  }
  return h;
}

template <class T>
Tensor<T> classification_head(ForwardContext<T>& ctx, const ModelParams<T>& params, const Tensor<T>& h_cls) {
  return tanh_head(ctx, params.classifier, h_cls);
}

template <class T>
Tensor<T> satp_head(ForwardContext<T>& ctx, const ModelParams<T>& params, const Tensor<T>& h_cls) {
  return tanh_head(ctx, params.satp, h_cls);
}

template <class T>
Tensor<T> mtp_head(ForwardContext<T>& ctx, const ModelParams<T>& params, const Tensor<T>& hidden,
                   std::span<const std::size_t> positions) {
  if (positions.empty()) throw Error("mtp_head: no masked positions");
  auto rows = ops::select_rows(ctx.tape, hidden, positions);
  return linear(ctx.tape, rows, params.mtp_w, params.mtp_b);
}

template <class T>
int predict(const ModelParams<T>& params, std::span<const TokenId> ids) {
  Tape<T> tape(false);
  ForwardContext<T> ctx{tape};
  auto h = encoder_forward(ctx, params, ids);
  const std::size_t cls_row = 0;
  auto logits = classification_head(ctx, params, ops::select_rows(tape, h, std::span(&cls_row, 1)));
  auto v = logits.data();
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

#define SSLREG_INSTANTIATE_MODEL(T)                                                                            \
  template struct ModelParams<T>;                                                                              \
  template Tensor<T> encoder_forward<T>(ForwardContext<T>&, const ModelParams<T>&, std::span<const TokenId>); \
  template Tensor<T> attention_heads<T>(ForwardContext<T>&, const LayerParams<T>&, const Tensor<T>&, int,     \
                                        double);                                                               \
  template Tensor<T> classification_head<T>(ForwardContext<T>&, const ModelParams<T>&, const Tensor<T>&);     \
  template Tensor<T> satp_head<T>(ForwardContext<T>&, const ModelParams<T>&, const Tensor<T>&);               \
  template Tensor<T> mtp_head<T>(ForwardContext<T>&, const ModelParams<T>&, const Tensor<T>&,                 \
                                 std::span<const std::size_t>);                                                \
  template int predict<T>(const ModelParams<T>&, std::span<const TokenId>);

SSLREG_INSTANTIATE_MODEL(float)
SSLREG_INSTANTIATE_MODEL(double)

}  // namespace sslreg
