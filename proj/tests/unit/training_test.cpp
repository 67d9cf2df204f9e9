#include <cmath>

#include "doctest.h"
#include "sslreg/error.hpp"
#include "sslreg/synthetic.hpp"
#include "sslreg/training.hpp"

using namespace sslreg;

namespace {

TrainingData make_data(std::size_t n_train, std::size_t n_dev, std::uint64_t seed, double noise = 0.3) {
  SyntheticSpec spec;
  spec.vocab_size = 60;
  spec.noise = noise;
  spec.seed = seed;
  spec.min_words = 4;
  spec.max_words = 8;
  const SyntheticTask task(spec);
  Rng rng = make_rng(seed, Stream::kData);
  const auto train = task.sample(n_train, rng);
  const auto dev = task.sample(n_dev, rng);
  TrainingData d;
  std::vector<Sentence> sentences;
  for (const auto& e : train) sentences.push_back(e.sentence);
  d.vocab = Vocab::build(sentences, 1);
  d.max_len = 12;
  d.train = encode_split(train, d.vocab, d.max_len);
  d.dev = encode_split(dev, d.vocab, d.max_len);
  d.lexicon = SynonymLexicon(task.synsets());
  d.num_classes = 2;
  return d;
}

ModelShape shape_for(const TrainingData& d, double dropout = 0.1, int num_ops = 4) {
  ModelShape s;
  s.encoder.num_layers = 1;
  s.encoder.num_heads = 2;
  s.encoder.d_model = 16;
  s.encoder.d_ff = 32;
  s.encoder.max_len = static_cast<int>(d.max_len);
  s.encoder.vocab_size = static_cast<int>(d.vocab.size());
  s.encoder.dropout_rate = dropout;
  s.num_classes = d.num_classes;
  s.num_ops = num_ops;
  return s;
}

TrainConfig config(Regime regime, double lambda, int epochs = 3) {
  TrainConfig c;
  c.regime = regime;
  c.lambda = lambda;
  c.epochs = epochs;
  c.batch_size = 8;
  c.seed = 11;
  c.tapt_epochs = 2;
  return c;
}

std::vector<std::vector<double>> grads_of(const std::vector<Tensor<double>>& ts) {
  std::vector<std::vector<double>> out;
  for (const auto& t : ts) {
    const auto g = t.grad_view();
    out.emplace_back(g.begin(), g.end());
    if (out.back().empty()) out.back().assign(t.size(), 0.0);
  }
  return out;
}

double max_rel_diff(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                    double scale_b = 1.0) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double x = a[i][j], y = scale_b * b[i][j];
      const double denom = std::max({std::abs(x), std::abs(y), 1e-12});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  return worst;
}

struct Fixture {
  TrainingData data = make_data(12, 0, 3);
  ModelShape shape = shape_for(data, 0.0);
  ModelParams<double> params;
  std::vector<std::vector<TokenId>> inputs;
  std::vector<int> labels;
  SslInputs mtp, satp;

  Fixture() {
    Rng rng = make_rng(3, Stream::kInit);
    params = ModelParams<double>::init(shape, rng);
    for (std::size_t i = 0; i < 6; ++i) {
      inputs.push_back(data.train.ids[i]);
      labels.push_back(data.train.labels[i]);
    }
    const std::vector<std::size_t> batch{0, 1, 2, 3, 4, 5};
    TrainConfig c;
    Rng corrupt = make_rng(3, Stream::kCorruption);
    mtp = prepare_ssl_inputs(SslTask::kMtp, batch, data, c, corrupt);
    satp = prepare_ssl_inputs(SslTask::kSatp, batch, data, c, corrupt);
  }

  std::vector<std::vector<double>> grads(SslTask task, double lambda, int micro = 1, bool classify = true) {
    params.zero_grad();
    const auto& ssl = task == SslTask::kSatp ? satp : mtp;
    std::vector<std::vector<TokenId>> in = classify ? inputs : std::vector<std::vector<TokenId>>{};
    std::vector<int> lab = classify ? labels : std::vector<int>{};
    accumulate_gradients(params, in, lab, task, ssl, lambda, micro, false, nullptr);
    return grads_of(params.tensors());
  }
};

}  // namespace

TEST_CASE("regime names and validation") {
  for (Regime r : {Regime::kUnregularized, Regime::kSslRegMtp, Regime::kSslRegSatp, Regime::kTapt,
                   Regime::kTaptPlusSslReg})
    CHECK(parse_regime(regime_name(r)) == r);
  CHECK_THROWS(parse_regime("dapt"));
  CHECK_THROWS_AS(config(Regime::kUnregularized, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(config(Regime::kTapt, 0.5).validate(), ConfigError);
  CHECK_NOTHROW(config(Regime::kSslRegMtp, 0.0).validate());
  CHECK_THROWS_AS(config(Regime::kSslRegMtp, -0.1).validate(), ConfigError);
  auto c = config(Regime::kSslRegMtp, 0.1);
  c.grad_accum_steps = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(config(Regime::kTaptPlusSslReg, 0.1).joint_task() == SslTask::kMtp);
  CHECK(config(Regime::kSslRegSatp, 0.1).joint_task() == SslTask::kSatp);
  CHECK(config(Regime::kTapt, 0.0).has_pretraining());
  CHECK_FALSE(config(Regime::kSslRegMtp, 0.1).has_pretraining());
}

TEST_CASE("loss values") {
  Fixture f;
  Tape<double> tape;
  // Uniform logits give ln(classes).
  const auto logits = Tensor<double>::zeros({3, 4});
  const std::vector<int> targets{0, 3, 1};
  CHECK(classification_loss(tape, logits, targets).item() == doctest::Approx(std::log(4.0)));

  // Near-zero init: MTP logits are close to uniform over the vocabulary.
  ForwardContext<double> ctx{tape};
  const double mtp = mtp_loss<double>(ctx, f.params, f.mtp.masked).item();
  CHECK(mtp == doctest::Approx(std::log(static_cast<double>(f.data.vocab.size()))).epsilon(0.02));

  // One instance, one masked position: -log softmax(logits)[target].
  MaskedInstance one{f.inputs[0], std::vector<TokenId>(f.inputs[0].size(), special::kPad), {1}};
  one.target_ids[1] = f.inputs[0][1];
  one.input_ids[1] = special::kMask;
  const auto h = encoder_forward(ctx, f.params, one.input_ids);
  const std::vector<std::size_t> pos{1};
  const auto row = mtp_head(ctx, f.params, h, pos);
  double mx = -1e300, z = 0;
  for (double v : row.data()) mx = std::max(mx, v);
  for (double v : row.data()) z += std::exp(v - mx);
  const double expected = -(row[static_cast<std::size_t>(one.target_ids[1])] - mx - std::log(z));
  CHECK(mtp_loss<double>(ctx, f.params, std::vector<MaskedInstance>{one}).item() ==
        doctest::Approx(expected).epsilon(1e-12));

  CHECK(mtp_loss<double>(ctx, f.params, std::vector<MaskedInstance>{}).item() == 0.0);
  CHECK(satp_loss<double>(ctx, f.params, std::vector<SatpInstance>{}).item() == 0.0);
}

TEST_CASE("joint loss combines the parts and skips SSL at lambda 0") {
  Fixture f;
  for (SslTask task : {SslTask::kMtp, SslTask::kSatp}) {
    JointBatch batch;
    batch.inputs = f.inputs;
    batch.labels = f.labels;
    batch.task = task;
    batch.masked = f.mtp.masked;
    batch.augmented = f.satp.augmented;

    Tape<double> tape;
    ForwardContext<double> ctx{tape};
    const auto parts = joint_loss(ctx, f.params, batch, 0.1);
    CHECK(parts.total.item() == doctest::Approx(parts.lc.item() + 0.1 * parts.lp.item()).epsilon(1e-14));
    CHECK(parts.lp.item() > 0.0);

    Tape<double> tape_lc;
    ForwardContext<double> ctx_lc{tape_lc};
    classification_batch_loss<double>(ctx_lc, f.params, f.inputs, f.labels);
    Tape<double> tape_zero;
    ForwardContext<double> ctx_zero{tape_zero};
    const auto zero = joint_loss(ctx_zero, f.params, batch, 0.0);
    CHECK(zero.total.item() == zero.lc.item());
    CHECK(zero.lp.item() == 0.0);
    CHECK(tape_zero.size() == tape_lc.size());
  }
}

TEST_CASE("lambda enters the gradient linearly") {
  Fixture f;
  const auto head_index = [&](ParamGroup g) {
    std::vector<std::size_t> idx;
    const auto named = f.params.named();
    for (std::size_t i = 0; i < named.size(); ++i)
      if (named[i].group == g) idx.push_back(i);
    return idx;
  };
  for (SslTask task : {SslTask::kMtp, SslTask::kSatp}) {
    const ParamGroup ssl_group = task == SslTask::kMtp ? ParamGroup::kMtp : ParamGroup::kSatp;
    const auto g1 = f.grads(task, 0.3);
    const auto g2 = f.grads(task, 0.6);
    const auto lc = f.grads(task, 0.0);
    const auto lp = f.grads(task, 1.0, 1, false);

    std::vector<std::vector<double>> a, b, c1, c2;
    for (std::size_t i : head_index(ssl_group)) {
      a.push_back(g2[i]);
      b.push_back(g1[i]);
    }
    CHECK(max_rel_diff(a, b, 2.0) < 1e-6);
    for (std::size_t i : head_index(ParamGroup::kClassifier)) {
      c1.push_back(g1[i]);
      c2.push_back(g2[i]);
    }
    CHECK(max_rel_diff(c1, c2) < 1e-12);

    std::vector<std::vector<double>> combined = lc;
    for (std::size_t i = 0; i < combined.size(); ++i)
      for (std::size_t j = 0; j < combined[i].size(); ++j) combined[i][j] += 0.3 * lp[i][j];
    CHECK(max_rel_diff(g1, combined) < 1e-6);
  }
}

TEST_CASE("gradient accumulation equals one large batch") {
  Fixture f;
  for (SslTask task : {SslTask::kNone, SslTask::kMtp, SslTask::kSatp}) {
    const double lambda = task == SslTask::kNone ? 0.0 : 0.4;
    const auto whole = f.grads(task, lambda, 1);
    for (int k : {2, 3, 6}) CHECK(max_rel_diff(f.grads(task, lambda, k), whole) < 1e-6);
  }
}

TEST_CASE("training learns and is deterministic") {
  const TrainingData data = make_data(200, 40, 5, 0.2);
  const ModelShape shape = shape_for(data);
  auto c = config(Regime::kUnregularized, 0.0, 3);
  c.lr_max = 2e-3;
  const auto r1 = train<float>(c, shape, data);
  REQUIRE(r1.history.epochs.size() == 3);
  CHECK(r1.history.epochs.back().loss_c < r1.history.epochs.front().loss_c);
  CHECK(r1.history.epochs.back().lr < r1.history.epochs.front().lr);
  CHECK(r1.best_epoch >= 1);
  const auto r2 = train<float>(c, shape, data);
  CHECK(r1.history == r2.history);
}

TEST_CASE("lambda 0 reproduces the unregularized trajectory") {
  const TrainingData data = make_data(40, 10, 6);
  const ModelShape shape = shape_for(data);
  const auto base = train<double>(config(Regime::kUnregularized, 0.0), shape, data);
  const auto mtp = train<double>(config(Regime::kSslRegMtp, 0.0), shape, data);
  const auto satp = train<double>(config(Regime::kSslRegSatp, 0.0), shape, data);
  CHECK(base.history == mtp.history);
  CHECK(base.history == satp.history);
  const auto with_ssl = train<double>(config(Regime::kSslRegMtp, 0.1), shape, data);
  CHECK_FALSE(base.history == with_ssl.history);
}

TEST_CASE("pretraining phases") {
  const TrainingData data = make_data(30, 10, 7);
  const ModelShape shape = shape_for(data);
  const auto tapt = train<float>(config(Regime::kTapt, 0.0, 2), shape, data);
  REQUIRE(tapt.history.epochs.size() == 4);
  CHECK(tapt.history.epochs[0].phase == "pretrain");
  CHECK(tapt.history.epochs[0].loss_c == 0.0);
  CHECK(tapt.history.epochs[0].loss_p > 0.0);
  CHECK_FALSE(tapt.history.epochs[0].train.has_value());
  CHECK(tapt.history.epochs[2].phase == "finetune");
  CHECK(tapt.history.epochs[2].loss_p == 0.0);

  const auto both = train<float>(config(Regime::kTaptPlusSslReg, 0.1, 2), shape, data);
  REQUIRE(both.history.epochs.size() == 4);
  CHECK(both.history.epochs[3].loss_p > 0.0);
}

TEST_CASE("train rejects mismatched shapes") {
  const TrainingData data = make_data(20, 0, 8);
  ModelShape wrong = shape_for(data);
  wrong.num_ops = 2;
  CHECK_THROWS(train<float>(config(Regime::kSslRegSatp, 0.1), wrong, data));
  wrong = shape_for(data);
  wrong.encoder.vocab_size += 1;
  CHECK_THROWS(train<float>(config(Regime::kUnregularized, 0.0), wrong, data));
}

TEST_CASE("evaluation is independent of the thread count") {
  const TrainingData data = make_data(50, 0, 9);
  const ModelShape shape = shape_for(data);
  Rng rng = make_rng(9, Stream::kInit);
  const auto p = ModelParams<float>::init(shape, rng);
  CHECK(predict_all(p, data.train.ids, 1) == predict_all(p, data.train.ids, 4));
  const auto gap = train_test_gap(p, data.train, data.train, 2, Metric::kMacroF1, 2);
  CHECK(gap.difference == 0.0);
}
