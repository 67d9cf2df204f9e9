#pragma once

// Losses, the joint objective L = Lc + lambda * Lp, and the training regimes.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sslreg/augment.hpp"
#include "sslreg/masking.hpp"
#include "sslreg/metrics.hpp"
#include "sslreg/model.hpp"
#include "sslreg/optim.hpp"
#include "sslreg/text.hpp"

namespace sslreg {

enum class Regime { kUnregularized, kSslRegMtp, kSslRegSatp, kTapt, kTaptPlusSslReg };
enum class SslTask { kNone, kMtp, kSatp };

Regime parse_regime(const std::string& name);
const char* regime_name(Regime r);

struct TrainConfig {
  Regime regime = Regime::kUnregularized;
  double lambda = 0.0;
  double lr_max = 1e-3;
  double warmup_proportion = 0.06;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-6;
  int epochs = 10;
  int batch_size = 16;       // examples per optimizer step
  int grad_accum_steps = 1;  // micro-batches each step is split into
  std::uint64_t seed = 0;
  double p_mask = 0.15;
  double aug_rate = 0.1;
  AugOpSet active_ops;
  int tapt_epochs = 10;
  SslTask tapt_finetune_task = SslTask::kMtp;  // SSL task of tapt_plus_ssl_reg's second phase
  Metric metric = Metric::kMacroF1;

  /// Rejects inconsistent settings, e.g. lambda > 0 with a regime that has no
  /// joint phase.
  void validate() const;
  AdamWOptions adamw() const { return {beta1, beta2, adam_eps, weight_decay}; }
  /// SSL task joined to classification in the (final) finetuning phase.
  SslTask joint_task() const;
  bool has_pretraining() const;
};

struct EncodedSplit {
  std::vector<Sentence> sentences;
  std::vector<std::vector<TokenId>> ids;
  std::vector<int> labels;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
};

EncodedSplit encode_split(std::span<const LabeledExample> examples, const Vocab& vocab, std::size_t max_len);

struct TrainingData {
  Vocab vocab;
  EncodedSplit train, dev, test;
  SynonymLexicon lexicon;
  StopwordSet stopwords;
  int num_classes = 2;
  std::size_t max_len = 128;
};

struct SatpInstance {
  std::vector<TokenId> ids;
  int op_label = 0;
};

// ---- losses -------------------------------------------------------------

/// Mean cross-entropy of class logits [batch, classes].
template <class T>
Tensor<T> classification_loss(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> labels);

/// Sum of per-example cross-entropies divided by `denominator` (0 = batch size).
/// A denominator larger than the batch lets micro-batches add up to a mean
/// over the whole logical batch.
template <class T>
Tensor<T> classification_batch_loss(ForwardContext<T>& ctx, const ModelParams<T>& params,
                                    std::span<const std::vector<TokenId>> inputs, std::span<const int> labels,
                                    double denominator = 0);

/// Cross-entropy over every masked position divided by `denominator`
/// (0 = number of masked positions in this batch).
template <class T>
Tensor<T> mtp_loss(ForwardContext<T>& ctx, const ModelParams<T>& params, std::span<const MaskedInstance> batch,
                   double denominator = 0);

/// Cross-entropy of operator predictions divided by `denominator` (0 = batch size).
template <class T>
Tensor<T> satp_loss(ForwardContext<T>& ctx, const ModelParams<T>& params, std::span<const SatpInstance> batch,
                    double denominator = 0);

/// Clean classification inputs plus corrupted copies of the same texts.
struct JointBatch {
  std::span<const std::vector<TokenId>> inputs;
  std::span<const int> labels;
  SslTask task = SslTask::kNone;
  std::span<const MaskedInstance> masked;
  std::span<const SatpInstance> augmented;
  double lc_denominator = 0;
  double lp_denominator = 0;
};

template <class T>
struct LossParts {
  Tensor<T> total, lc, lp;
};

/// total = Lc + lambda * Lp. With lambda == 0 (or no SSL task) the SSL branch
/// is not run and `lp` is a constant zero.
template <class T>
LossParts<T> joint_loss(ForwardContext<T>& ctx, const ModelParams<T>& params, const JointBatch& batch,
                        double lambda);

// ---- batches -------------------------------------------------------------

struct StepLosses {
  double lc = 0.0;
  double lp = 0.0;
  std::size_t skipped = 0;  // SSL instances with nothing to corrupt
};

/// SSL supervision for one logical batch, drawn from the corruption stream.
struct SslInputs {
  std::vector<MaskedInstance> masked;
  std::vector<SatpInstance> augmented;
  std::size_t skipped = 0;
};

SslInputs prepare_ssl_inputs(SslTask task, std::span<const std::size_t> batch, const TrainingData& data,
                             const TrainConfig& config, Rng& corruption_rng);

/// Runs forward/backward for one logical batch split into `micro_batches`
/// pieces, accumulating gradients. Each piece is normalised by the whole
/// batch's counts, so the result equals a single-pass batch gradient.
template <class T>
StepLosses accumulate_gradients(ModelParams<T>& params, std::span<const std::vector<TokenId>> inputs,
                                std::span<const int> labels, SslTask task, const SslInputs& ssl, double lambda,
                                int micro_batches, bool train_mode, Rng* dropout_rng);

// ---- evaluation ----------------------------------------------------------

/// Threads for read-only evaluation: SSLREG_THREADS if set, else hardware concurrency.
int evaluation_threads();

template <class T>
std::vector<int> predict_all(const ModelParams<T>& params, const std::vector<std::vector<TokenId>>& inputs,
                             int threads = 0);

template <class T>
MetricSet evaluate_split(const ModelParams<T>& params, const EncodedSplit& split, int num_classes, int threads = 0);

template <class T>
GapReport train_test_gap(const ModelParams<T>& params, const EncodedSplit& train, const EncodedSplit& test,
                         int num_classes, Metric metric, int threads = 0);

// ---- training ------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;  // 1-based within its phase
  std::string phase;  // "pretrain" or "finetune"
  double lr = 0.0;
  double loss_c = 0.0;
  double loss_p = 0.0;
  double lambda = 0.0;
  std::optional<MetricSet> train, dev, test;

  bool operator==(const EpochRecord&) const;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  bool operator==(const RunHistory& o) const { return epochs == o.epochs; }
};

template <class T>
struct TrainResult {
  ModelParams<T> best;   // best dev metric; final params when there is no dev split
  ModelParams<T> final;
  RunHistory history;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

template <class T>
TrainResult<T> train(const TrainConfig& config, const ModelShape& shape, const TrainingData& data,
                     const EpochCallback& on_epoch = {});

}  // namespace sslreg
