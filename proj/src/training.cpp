#include "sslreg/training.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <thread>

#include "sslreg/error.hpp"

namespace sslreg {

Regime parse_regime(const std::string& name) {
  if (name == "unregularized") return Regime::kUnregularized;
  if (name == "ssl_reg_mtp") return Regime::kSslRegMtp;
  if (name == "ssl_reg_satp") return Regime::kSslRegSatp;
  if (name == "tapt") return Regime::kTapt;
  if (name == "tapt_plus_ssl_reg") return Regime::kTaptPlusSslReg;
  throw ConfigError("unknown regime '" + name +
                    "' (expected unregularized, ssl_reg_mtp, ssl_reg_satp, tapt, tapt_plus_ssl_reg)");
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kUnregularized: return "unregularized";
    case Regime::kSslRegMtp: return "ssl_reg_mtp";
    case Regime::kSslRegSatp: return "ssl_reg_satp";
    case Regime::kTapt: return "tapt";
    case Regime::kTaptPlusSslReg: return "tapt_plus_ssl_reg";
  }
  return "?";
}

SslTask TrainConfig::joint_task() const {
  switch (regime) {
    case Regime::kSslRegMtp: return SslTask::kMtp;
    case Regime::kSslRegSatp: return SslTask::kSatp;
    case Regime::kTaptPlusSslReg: return tapt_finetune_task;
    default: return SslTask::kNone;
  }
}

bool TrainConfig::has_pretraining() const {
  return regime == Regime::kTapt || regime == Regime::kTaptPlusSslReg;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if ((regime == Regime::kUnregularized || regime == Regime::kTapt) && lambda > 0.0)
    fail(std::string("lambda > 0 is meaningless for regime ") + regime_name(regime));
  if (!(lr_max > 0.0)) fail("lr_max must be > 0");
  if (!(warmup_proportion >= 0.0 && warmup_proportion < 1.0)) fail("warmup_proportion must be in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (grad_accum_steps < 1 || grad_accum_steps > batch_size) fail("grad_accum_steps must be in [1, batch_size]");
  if (!(p_mask > 0.0 && p_mask < 1.0)) fail("p_mask must be in (0, 1)");
  if (!(aug_rate > 0.0 && aug_rate < 1.0)) fail("aug_rate must be in (0, 1)");
  if (has_pretraining() && tapt_epochs < 1) fail("tapt_epochs must be >= 1");
  if (regime == Regime::kTaptPlusSslReg && tapt_finetune_task == SslTask::kNone)
    fail("tapt_plus_ssl_reg needs an SSL task");
}

EncodedSplit encode_split(std::span<const LabeledExample> examples, const Vocab& vocab, std::size_t max_len) {
  EncodedSplit out;
  for (const auto& ex : examples) {
    out.sentences.push_back(ex.sentence);
    out.ids.push_back(encode(ex.sentence, vocab, max_len));
    out.labels.push_back(ex.label);
  }
  return out;
}

bool EpochRecord::operator==(const EpochRecord& o) const {
  return epoch == o.epoch && phase == o.phase && lr == o.lr && loss_c == o.loss_c && loss_p == o.loss_p &&
         lambda == o.lambda && train == o.train && dev == o.dev && test == o.test;
}

namespace {

template <class T>
Tensor<T> cls_rows(ForwardContext<T>& ctx, const ModelParams<T>& params,
                   std::span<const std::vector<TokenId>> inputs) {
  std::vector<Tensor<T>> rows;
  rows.reserve(inputs.size());
  const std::size_t cls = 0;
  for (const auto& ids : inputs) {
    auto h = encoder_forward(ctx, params, ids);
    rows.push_back(ops::select_rows(ctx.tape, h, std::span(&cls, 1)));
  }
  return ops::concat_rows<T>(ctx.tape, rows);
}

double resolve(double denominator, std::size_t fallback) {
  return denominator > 0 ? denominator : static_cast<double>(fallback);
}

}  // namespace

template <class T>
Tensor<T> classification_loss(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> labels) {
  return ops::cross_entropy(tape, logits, labels, ops::Reduction::kMean);
}

template <class T>
Tensor<T> classification_batch_loss(ForwardContext<T>& ctx, const ModelParams<T>& params,
                                    std::span<const std::vector<TokenId>> inputs, std::span<const int> labels,
                                    double denominator) {
  if (inputs.size() != labels.size()) throw Error("classification loss: inputs and labels differ in length");
  if (inputs.empty()) throw Error("classification loss: empty batch");
  auto logits = classification_head(ctx, params, cls_rows(ctx, params, inputs));
  auto total = ops::cross_entropy(ctx.tape, logits, labels, ops::Reduction::kSum);
  return ops::scale(ctx.tape, total, static_cast<T>(1.0 / resolve(denominator, inputs.size())));
}

template <class T>
Tensor<T> mtp_loss(ForwardContext<T>& ctx, const ModelParams<T>& params, std::span<const MaskedInstance> batch,
                   double denominator) {
  if (batch.empty()) {
    std::cerr << "warning: MTP batch has no maskable instance; SSL loss contributes 0\n";
    return Tensor<T>::scalar(T(0));
  }
  std::vector<Tensor<T>> rows;
  std::vector<int> targets;
  for (const auto& inst : batch) {
    if (inst.mask_positions.empty()) throw Error("mtp_loss: instance without masked positions");
    auto h = encoder_forward(ctx, params, inst.input_ids);
    rows.push_back(mtp_head(ctx, params, h, inst.mask_positions));
    for (std::size_t p : inst.mask_positions) targets.push_back(inst.target_ids[p]);
  }
  auto logits = ops::concat_rows<T>(ctx.tape, rows);
  auto total = ops::cross_entropy(ctx.tape, logits, targets, ops::Reduction::kSum);
  return ops::scale(ctx.tape, total, static_cast<T>(1.0 / resolve(denominator, targets.size())));
}

template <class T>
Tensor<T> satp_loss(ForwardContext<T>& ctx, const ModelParams<T>& params, std::span<const SatpInstance> batch,
                    double denominator) {
  if (batch.empty()) {
    std::cerr << "warning: SATP batch has no augmentable instance; SSL loss contributes 0\n";
    return Tensor<T>::scalar(T(0));
  }
  std::vector<std::vector<TokenId>> inputs;
  std::vector<int> labels;
  for (const auto& inst : batch) {
    inputs.push_back(inst.ids);
    labels.push_back(inst.op_label);
  }
  auto logits = satp_head(ctx, params, cls_rows<T>(ctx, params, inputs));
  auto total = ops::cross_entropy(ctx.tape, logits, labels, ops::Reduction::kSum);
  return ops::scale(ctx.tape, total, static_cast<T>(1.0 / resolve(denominator, batch.size())));
}

template <class T>
LossParts<T> joint_loss(ForwardContext<T>& ctx, const ModelParams<T>& params, const JointBatch& batch,
                        double lambda) {
  if (!(lambda >= 0.0)) throw Error("joint_loss: lambda must be >= 0");
  LossParts<T> out;
  out.lc = classification_batch_loss(ctx, params, batch.inputs, batch.labels, batch.lc_denominator);
  if (lambda == 0.0 || batch.task == SslTask::kNone) {
    out.lp = Tensor<T>::scalar(T(0));
    out.total = out.lc;
    return out;
  }
  out.lp = batch.task == SslTask::kMtp ? mtp_loss(ctx, params, batch.masked, batch.lp_denominator)
                                       : satp_loss(ctx, params, batch.augmented, batch.lp_denominator);
  out.total = ops::add(ctx.tape, out.lc, ops::scale(ctx.tape, out.lp, static_cast<T>(lambda)));
  return out;
}

SslInputs prepare_ssl_inputs(SslTask task, std::span<const std::size_t> batch, const TrainingData& data,
                             const TrainConfig& config, Rng& corruption_rng) {
  SslInputs out;
  if (task == SslTask::kMtp) {
    const MaskingOptions opts{config.p_mask};
    for (std::size_t idx : batch) {
      auto inst = mask_tokens(data.train.ids[idx], data.vocab.size(), opts, corruption_rng);
      if (inst)
        out.masked.push_back(std::move(*inst));
      else
        ++out.skipped;
    }
  } else if (task == SslTask::kSatp) {
    const AugmentationDeps deps{data.lexicon, data.stopwords, config.aug_rate};
    for (std::size_t idx : batch) {
      auto inst = make_satp_instance(data.train.sentences[idx], config.active_ops, deps, corruption_rng);
      if (inst)
        out.augmented.push_back({encode(inst->sentence, data.vocab, data.max_len), inst->op_label});
      else
        ++out.skipped;
    }
  }
  return out;
}

namespace {

// Batch position each SSL instance came from is not tracked; instead the SSL
// instances are split into the same number of contiguous pieces.
template <class U>
std::span<const U> piece(const std::vector<U>& items, int pieces, int index) {
  const std::size_t n = items.size();
  const std::size_t begin = n * static_cast<std::size_t>(index) / static_cast<std::size_t>(pieces);
  const std::size_t end = n * static_cast<std::size_t>(index + 1) / static_cast<std::size_t>(pieces);
  return std::span<const U>(items).subspan(begin, end - begin);
}

}  // namespace

template <class T>
StepLosses accumulate_gradients(ModelParams<T>& params, std::span<const std::vector<TokenId>> inputs,
                                std::span<const int> labels, SslTask task, const SslInputs& ssl, double lambda,
                                int micro_batches, bool train_mode, Rng* dropout_rng) {
  const bool classify = !inputs.empty();
  const bool use_ssl = lambda > 0.0 && task != SslTask::kNone;
  if (!classify && !use_ssl) throw Error("accumulate_gradients: nothing to optimise");
  if (micro_batches < 1) throw Error("accumulate_gradients: micro_batches must be >= 1");

  double lp_denominator = 0;
  if (task == SslTask::kMtp)
    for (const auto& m : ssl.masked) lp_denominator += static_cast<double>(m.mask_positions.size());
  else
    lp_denominator = static_cast<double>(ssl.augmented.size());

  StepLosses result;
  result.skipped = ssl.skipped;
  if (use_ssl && lp_denominator == 0)
    std::cerr << "warning: batch has no usable SSL instance; SSL loss contributes 0\n";

  std::vector<std::vector<TokenId>> input_vec(inputs.begin(), inputs.end());
  std::vector<int> label_vec(labels.begin(), labels.end());
  for (int j = 0; j < micro_batches; ++j) {
    Tape<T> tape;
    ForwardContext<T> ctx{tape, train_mode, dropout_rng};
    Tensor<T> total;
    Tensor<T> lc, lp;
    auto in = piece(input_vec, micro_batches, j);
    auto lab = piece(label_vec, micro_batches, j);
    if (classify && !in.empty()) {
      lc = classification_batch_loss(ctx, params, in, lab, static_cast<double>(inputs.size()));
      total = lc;
    }
    if (use_ssl && lp_denominator > 0) {
      if (task == SslTask::kMtp) {
        auto part = piece(ssl.masked, micro_batches, j);
        if (!part.empty()) lp = mtp_loss(ctx, params, part, lp_denominator);
      } else {
        auto part = piece(ssl.augmented, micro_batches, j);
        if (!part.empty()) lp = satp_loss(ctx, params, part, lp_denominator);
      }
      if (lp.defined()) {
        auto weighted = ops::scale(tape, lp, static_cast<T>(lambda));
        total = total.defined() ? ops::add(tape, total, weighted) : weighted;
      }
    }
    if (lc.defined()) result.lc += static_cast<double>(lc.item());
    if (lp.defined()) result.lp += static_cast<double>(lp.item());
    if (total.defined() && total.requires_grad()) tape.backward(total);
  }
  return result;
}

int evaluation_threads() {
  if (const char* env = std::getenv("SSLREG_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

template <class T>
std::vector<int> predict_all(const ModelParams<T>& params, const std::vector<std::vector<TokenId>>& inputs,
                             int threads) {
  std::vector<int> out(inputs.size(), 0);
  if (threads <= 0) threads = evaluation_threads();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), inputs.size());
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = predict(params, std::span<const TokenId>(inputs[i]));
  };
  if (workers <= 1) {
    run(0, inputs.size());
    return out;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back(run, inputs.size() * w / workers, inputs.size() * (w + 1) / workers);
  pool.clear();  // joins
  return out;
}

template <class T>
MetricSet evaluate_split(const ModelParams<T>& params, const EncodedSplit& split, int num_classes, int threads) {
  const auto pred = predict_all(params, split.ids, threads);
  return all_metrics(ConfusionCounts::from(split.labels, pred, num_classes));
}

template <class T>
GapReport train_test_gap(const ModelParams<T>& params, const EncodedSplit& train, const EncodedSplit& test,
                         int num_classes, Metric metric, int threads) {
  GapReport r;
  r.train = evaluate_split(params, train, num_classes, threads).get(metric);
  r.test = evaluate_split(params, test, num_classes, threads).get(metric);
  r.difference = r.train - r.test;
  return r;
}

namespace {

template <class T>
void run_phase(const char* phase, int epochs, bool classify, SslTask task, double lambda, const TrainConfig& config,
               const TrainingData& data, ModelParams<T>& params, Rng& order_rng, Rng& dropout_rng,
               Rng& corruption_rng, TrainResult<T>& result, double& best_dev, const EpochCallback& on_epoch) {
  const std::size_t n = data.train.size();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps_per_epoch = (n + batch_size - 1) / batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch * static_cast<std::size_t>(epochs));
  AdamW<T> optimizer(params, config.adamw());
  params.zero_grad();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double sum_lc = 0, sum_lp = 0, lr = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(batch_size, n - start));
      std::vector<std::vector<TokenId>> inputs;
      std::vector<int> labels;
      if (classify)
        for (std::size_t idx : batch) {
          inputs.push_back(data.train.ids[idx]);
          labels.push_back(data.train.labels[idx]);
        }
      SslInputs ssl;
      if (lambda > 0.0 && task != SslTask::kNone) ssl = prepare_ssl_inputs(task, batch, data, config, corruption_rng);
      const int micro = std::min<int>(config.grad_accum_steps, static_cast<int>(batch.size()));
      const StepLosses losses = accumulate_gradients(params, inputs, labels, task, ssl, lambda, micro,
                                                     /*train_mode=*/true, &dropout_rng);
      lr = lr_at(static_cast<double>(step), total_steps, config.warmup_proportion, config.lr_max);
      optimizer.step(lr);
      params.zero_grad();
      ++step;
      sum_lc += losses.lc;
      sum_lp += losses.lp;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.lr = lr;
    rec.loss_c = sum_lc / static_cast<double>(steps_per_epoch);
    rec.loss_p = sum_lp / static_cast<double>(steps_per_epoch);
    rec.lambda = lambda;
    if (classify) {
      rec.train = evaluate_split(params, data.train, data.num_classes);
      if (!data.dev.empty()) rec.dev = evaluate_split(params, data.dev, data.num_classes);
      if (!data.test.empty()) rec.test = evaluate_split(params, data.test, data.num_classes);
      if (rec.dev && rec.dev->get(config.metric) > best_dev) {
        best_dev = rec.dev->get(config.metric);
        result.best.copy_values_from(params);
        result.best_epoch = epoch;
      }
    }
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
}

}  // namespace

template <class T>
TrainResult<T> train(const TrainConfig& config, const ModelShape& shape, const TrainingData& data,
                     const EpochCallback& on_epoch) {
  config.validate();
  shape.validate();
  if (data.train.empty()) throw Error("train: empty training split");
  if (shape.num_classes != data.num_classes) throw Error("train: model and data disagree on class count");
  if (static_cast<std::size_t>(shape.num_ops) != config.active_ops.size())
    throw Error("train: model SATP head size differs from the active operator set");
  if (static_cast<std::size_t>(shape.encoder.vocab_size) != data.vocab.size())
    throw Error("train: model and vocabulary sizes differ");

  Rng init_rng = make_rng(config.seed, Stream::kInit);
  Rng order_rng = make_rng(config.seed, Stream::kBatchOrder);
  Rng dropout_rng = make_rng(config.seed, Stream::kDropout);
  Rng corruption_rng = make_rng(config.seed, Stream::kCorruption);
  Rng reinit_rng = make_rng(config.seed, Stream::kHeadReinit);

  TrainResult<T> result{ModelParams<T>::zeros(shape), ModelParams<T>::init(shape, init_rng), {}, 0};
  double best_dev = -1e300;
  ModelParams<T>& params = result.final;

  if (config.has_pretraining()) {
    run_phase<T>("pretrain", config.tapt_epochs, /*classify=*/false, SslTask::kMtp, 1.0, config, data, params,
                 order_rng, dropout_rng, corruption_rng, result, best_dev, on_epoch);
    params.reinit_heads(reinit_rng);
  }
  run_phase<T>("finetune", config.epochs, /*classify=*/true, config.joint_task(), config.lambda, config, data,
               params, order_rng, dropout_rng, corruption_rng, result, best_dev, on_epoch);
  if (data.dev.empty()) {
    result.best.copy_values_from(params);
    result.best_epoch = config.epochs;
  }
  return result;
}

#define SSLREG_INSTANTIATE_TRAINING(T)                                                                            \
  template Tensor<T> classification_loss<T>(Tape<T>&, const Tensor<T>&, std::span<const int>);                  \
  template Tensor<T> classification_batch_loss<T>(ForwardContext<T>&, const ModelParams<T>&,                     \
                                                  std::span<const std::vector<TokenId>>, std::span<const int>,   \
                                                  double);                                                       \
  template Tensor<T> mtp_loss<T>(ForwardContext<T>&, const ModelParams<T>&, std::span<const MaskedInstance>,    \
                                 double);                                                                        \
  template Tensor<T> satp_loss<T>(ForwardContext<T>&, const ModelParams<T>&, std::span<const SatpInstance>,     \
                                  double);                                                                       \
  template LossParts<T> joint_loss<T>(ForwardContext<T>&, const ModelParams<T>&, const JointBatch&, double);    \
  template StepLosses accumulate_gradients<T>(ModelParams<T>&, std::span<const std::vector<TokenId>>,           \
                                              std::span<const int>, SslTask, const SslInputs&, double, int,     \
                                              bool, Rng*);                                                       \
  template std::vector<int> predict_all<T>(const ModelParams<T>&, const std::vector<std::vector<TokenId>>&,     \
                                           int);                                                                 \
  template MetricSet evaluate_split<T>(const ModelParams<T>&, const EncodedSplit&, int, int);                    \
  template GapReport train_test_gap<T>(const ModelParams<T>&, const EncodedSplit&, const EncodedSplit&, int,    \
                                       Metric, int);                                                             \
  template TrainResult<T> train<T>(const TrainConfig&, const ModelShape&, const TrainingData&,                  \
                                   const EpochCallback&);

SSLREG_INSTANTIATE_TRAINING(float)
SSLREG_INSTANTIATE_TRAINING(double)

}  // namespace sslreg
