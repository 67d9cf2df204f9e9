#include "sslreg/diagnostics.hpp"

#include "sslreg/masking.hpp"
#include "sslreg/training.hpp"

namespace sslreg {

ModelShape gradcheck_shape() {
  ModelShape s;
  s.encoder.num_layers = 2;
  s.encoder.num_heads = 2;
  s.encoder.d_model = 16;
  s.encoder.d_ff = 32;
  s.encoder.max_len = 16;
  s.encoder.vocab_size = 24;
  s.encoder.dropout_rate = 0.0;
  s.num_classes = 3;
  s.num_ops = 4;
  return s;
}

std::vector<LossGradCheck> check_model_gradients(std::uint64_t seed, const GradCheckOptions& options,
                                                 const ModelShape& shape, double lambda) {
  Rng init = make_rng(seed, Stream::kInit);
  ModelParams<double> params = ModelParams<double>::init(shape, init);
  // Uniform in [-0.3, 0.3] instead of the init scale.
  Rng widen = make_rng(seed, Stream::kHeadReinit);
  for (auto& np : params.named())
    if (np.decay)
      for (auto& x : np.tensor.data()) x = 0.3 * (2.0 * uniform01(widen) - 1.0);

  Rng data = make_rng(seed, Stream::kData);
  const std::size_t vocab = static_cast<std::size_t>(shape.encoder.vocab_size);
  std::vector<std::vector<TokenId>> inputs;
  std::vector<int> labels;
  std::vector<SatpInstance> augmented;
  for (int i = 0; i < 3; ++i) {
    std::vector<TokenId> ids{special::kCls};
    const std::size_t len = 4 + uniform_index(data, 6);
    for (std::size_t t = 0; t < len; ++t)
      ids.push_back(static_cast<TokenId>(special::kCount + uniform_index(data, vocab - special::kCount)));
    labels.push_back(static_cast<int>(uniform_index(data, static_cast<std::size_t>(shape.num_classes))));
    SatpInstance aug{ids, static_cast<int>(uniform_index(data, static_cast<std::size_t>(shape.num_ops)))};
    std::swap(aug.ids[1], aug.ids[2]);
    augmented.push_back(std::move(aug));
    inputs.push_back(std::move(ids));
  }
  Rng corruption = make_rng(seed, Stream::kCorruption);
  std::vector<MaskedInstance> masked;
  MaskingOptions mopts;
  mopts.p_mask = 0.3;
  for (const auto& ids : inputs) masked.push_back(*mask_tokens(ids, vocab, mopts, corruption));

  auto joint = [&](SslTask task) {
    return [&, task](Tape<double>& tape) {
      ForwardContext<double> ctx{tape, false, nullptr};
      JointBatch batch;
      batch.inputs = inputs;
      batch.labels = labels;
      batch.task = task;
      batch.masked = masked;
      batch.augmented = augmented;
      return joint_loss(ctx, params, batch, lambda).total;
    };
  };
  const std::vector<std::pair<std::string, LossFn>> losses{
      {"classification",
       [&](Tape<double>& tape) {
         ForwardContext<double> ctx{tape, false, nullptr};
         return classification_batch_loss<double>(ctx, params, inputs, labels);
       }},
      {"mtp",
       [&](Tape<double>& tape) {
         ForwardContext<double> ctx{tape, false, nullptr};
         return mtp_loss<double>(ctx, params, masked);
       }},
      {"satp",
       [&](Tape<double>& tape) {
         ForwardContext<double> ctx{tape, false, nullptr};
         return satp_loss<double>(ctx, params, augmented);
       }},
      {"joint_mtp", joint(SslTask::kMtp)},
      {"joint_satp", joint(SslTask::kSatp)},
  };

  std::vector<Tensor<double>> tensors = params.tensors();
  std::vector<LossGradCheck> out;
  Rng sample = make_rng(seed, Stream::kBatchOrder);
  for (const auto& [name, fn] : losses) out.push_back({name, grad_check(fn, tensors, options, sample)});
  return out;
}

}  // namespace sslreg
