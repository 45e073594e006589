#include <cmath>
#include <cstring>
#include <numeric>

#include "doctest.h"
#include "support/oracles.hpp"
#include "swd/errors.hpp"
#include "swd/synth.hpp"
#include "swd/trainer.hpp"

using namespace swd;

namespace {

ModelConfig tiny(std::size_t vocab, bool swd_path = true) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.embed_dim = 6;
  c.hidden_dim = 8;
  c.max_sentences = 6;
  c.position_embed_dim = 4;
  c.mlp_hidden_dim = 6;
  c.swd = swd_path;
  return c;
}

struct Prepared {
  Vocab vocab;
  std::vector<EncodedPair> pairs;
  std::vector<WeightDistribution> weights;
};

Prepared needle_corpus(std::size_t pairs, std::uint64_t seed, double noise = 0.0) {
  SynthSpec spec;
  spec.pairs = pairs;
  spec.sentences = 3;
  spec.sentence_length = 5;
  spec.noise_overlap = noise;
  spec.seed = seed;
  const auto data = generate(spec);
  Prepared p;
  p.vocab = build_vocab(data.pairs, CorpusOptions{});
  p.pairs = encode_corpus(data.pairs, p.vocab, CorpusOptions{});
  p.weights = estimate_corpus_weights(p.pairs);
  return p;
}

Batch whole(const std::vector<EncodedPair>& corpus, const std::vector<WeightDistribution>& weights) {
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  return make_batch(corpus, weights, idx);
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("configuration validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.lambda = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TrainConfig{};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("weight term of two equal halves is ln 2") {
    // Identical sentences give w = [.5,.5]; a zero output layer of the MLP gives w' = [.5,.5].
    SwdModel m = SwdModel::initialize(tiny(12));
    m.params().at("mlp.W2").value.fill(0.0);
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}, {4, 5}}, 6), {4, 5}}};
    const auto w = estimate_corpus_weights(corpus);
    CHECK(w[0].weights == std::vector<double>{0.5, 0.5});
    const Batch b = whole(corpus, w);
    for (auto form : {WeightLossForm::kEstimatedTarget, WeightLossForm::kLiteral}) {
      Tape t;
      ForwardPass pass(m, t, b);
      CHECK(joint_loss(pass, 1.0, form).weight_ce == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    }
  }

  TEST_CASE("lambda zero gives the pure likelihood objective") {
    auto toy = oracle::toy_instance(2);
    auto plain = oracle::toy_instance(2, false);
    Tape t1, t2;
    ForwardPass p1(toy.model, t1, toy.batch), p2(plain.model, t2, plain.batch);
    const LossBreakdown a = joint_loss(p1, 0.0);
    const LossBreakdown b = joint_loss(p2, 0.0);
    CHECK(a.total == a.nll);
    CHECK(b.weight_ce == 0.0);
    CHECK(a.nll >= 0.0);
    CHECK(a.tokens == 7);  // 3 + 2 summary tokens, one EOS each
  }

  TEST_CASE("untrained model has per-token NLL near ln V") {
    SwdModel m = SwdModel::initialize(tiny(40));
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5, 6}, {7}}, 6), {8, 9, 10, 11}}};
    CHECK(mean_token_nll(m, corpus) == doctest::Approx(std::log(40.0)).epsilon(0.02));
  }

  TEST_CASE("weight term is bounded below by the entropy of w") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
      ModelConfig c = tiny(12);
      c.seed = static_cast<std::uint64_t>(trial);
      SwdModel m = SwdModel::initialize(c);
      for (auto& p : m.params().all()) {
        for (double& v : p.value.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
      }
      std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}, {6, 7, 8}, {4, 9}}, 6), {4, 9, 5}}};
      const auto w = estimate_corpus_weights(corpus);
      const Batch b = whole(corpus, w);
      Tape t;
      ForwardPass pass(m, t, b);
      const double ce = joint_loss(pass, 1.0).weight_ce;
      double entropy = 0.0;
      for (double v : w[0].weights) entropy -= v * std::log(v);
      CHECK(ce >= entropy - 1e-12);
    }
  }

  TEST_CASE("weight term equals the entropy when the prediction matches") {
    // A single-sentence document forces w' = w = [1] whatever the parameters.
    SwdModel m = SwdModel::initialize(tiny(12));
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}}, 6), {4}}};
    const auto w = estimate_corpus_weights(corpus);
    const Batch b = whole(corpus, w);
    Tape t;
    ForwardPass pass(m, t, b);
    CHECK(std::abs(joint_loss(pass, 1.0).weight_ce) <= 1e-9);
  }

  TEST_CASE("missing weights are rejected when the weight path is on") {
    SwdModel m = SwdModel::initialize(tiny(12));
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}}, 6), {4}}};
    Tape t;
    const Batch b = whole(corpus, {});
    ForwardPass pass(m, t, b);
    CHECK_THROWS_AS(joint_loss(pass, 0.1), ArgumentError);
    TrainConfig tc;
    CHECK_THROWS_AS(train(m, tc, corpus, {}), ArgumentError);
  }

  TEST_CASE("sgd step examples") {
    SwdModel m = SwdModel::initialize(tiny(12));
    ModelParams& p = m.params();
    const ModelParams before = p;

    p.zero_grad();
    CHECK(sgd_step(p, 0.5, 5.0) == 0.0);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(p.all()[k].value == before.all()[k].value);

    // One nonzero entry of size 10: clipped to 5, so the update is lr * g / 2.
    p.all()[0].grad[0] = 10.0;
    CHECK(sgd_step(p, 0.1, 5.0) == 10.0);
    CHECK(p.all()[0].value[0] == doctest::Approx(before.all()[0].value[0] - 0.5).epsilon(1e-15));
    CHECK(p.all()[0].value[1] == before.all()[0].value[1]);

    const ModelParams mid = p;
    CHECK(sgd_step(p, 0.0, 5.0) == 10.0);
    for (std::size_t k = 0; k < p.size(); ++k) {
      CHECK(p.all()[k].value == mid.all()[k].value);
      CHECK(p.all()[k].value.shape() == mid.all()[k].value.shape());
    }

    p.all()[1].grad[0] = std::nan("");
    CHECK_THROWS_AS(sgd_step(p, 0.1, 5.0), DivergenceError);
    for (std::size_t k = 0; k < p.size(); ++k) CHECK(p.all()[k].value == mid.all()[k].value);
  }

  TEST_CASE("non-finite loss raises a divergence error") {
    SwdModel m = SwdModel::initialize(tiny(12));
    m.params().at("out.W").value[0] = std::numeric_limits<double>::infinity();
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}}, 6), {4}}};
    const auto w = estimate_corpus_weights(corpus);
    const Batch b = whole(corpus, w);
    Tape t;
    ForwardPass pass(m, t, b);
    CHECK_THROWS_AS(joint_loss(pass, 0.1), DivergenceError);
  }

  TEST_CASE("training is deterministic") {
    const auto data = needle_corpus(20, 3);
    ModelConfig c = tiny(data.vocab.size());
    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 3;
    tc.learning_rate = 0.5;
    auto run = [&] {
      SwdModel m = SwdModel::initialize(c);
      const TrainResult r = train(m, tc, data.pairs, data.weights);
      return std::make_pair(r, m.params());
    };
    const auto [a, pa] = run();
    const auto [b, pb] = run();
    REQUIRE(a.log.size() == 15);
    CHECK(a.steps == 15);
    for (std::size_t i = 0; i < a.log.size(); ++i) {
      CHECK(std::memcmp(&a.log[i].loss, &b.log[i].loss, sizeof(double)) == 0);
      CHECK(to_log_line(a.log[i]) == to_log_line(b.log[i]));
    }
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa.all()[k].value == pb.all()[k].value);
    CHECK(a.log.back().epoch == 3);
    CHECK(a.log.back().step == 15);
  }

  TEST_CASE("log line fields") {
    StepRecord r;
    r.step = 4;
    r.epoch = 2;
    r.nll = 1.5;
    r.weight_ce = 0.0;
    r.grad_norm = 0.25;
    CHECK(to_log_line(r) == R"({"step":4,"epoch":2,"nll":1.5,"weight_ce":0.0,"grad_norm":0.25})");
  }

  TEST_CASE("training reduces the weight divergence on a needle corpus") {
    const auto data = needle_corpus(1000, 8, 0.2);
    ModelConfig c;
    c.vocab_size = data.vocab.size();
    c.embed_dim = 16;
    c.hidden_dim = 32;
    c.mlp_hidden_dim = 16;
    TrainConfig tc;
    tc.lambda = 0.1;
    tc.learning_rate = 1.0;
    tc.epochs = 12;
    SwdModel m = SwdModel::initialize(c);
    std::vector<double> kl;
    TrainHooks hooks;
    hooks.on_epoch_end = [&](std::size_t, const SwdModel& model) {
      kl.push_back(mean_weight_kl(model, data.pairs, data.weights));
    };
    train(m, tc, data.pairs, data.weights, hooks);
    REQUIRE(kl.size() == 12);
    for (std::size_t e = 5; e + 1 < kl.size(); ++e) CHECK(kl[e + 1] < kl[e]);
    CHECK(kl.back() < kl.front());
  }

  TEST_CASE("evaluation conventions") {
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}}, 6), {4, 5, 6}},
                                       {assemble_document({{7}}, 6), {7, 8}}};
    const auto perfect = score_outputs({{4, 5, 6}, {7, 8}}, corpus, "copy", "test");
    CHECK(perfect.rouge1.f == 1.0);
    CHECK(perfect.rouge2.f == 1.0);
    CHECK(perfect.rougel.f == 1.0);
    const auto empty = score_outputs({{}, {}}, corpus, "empty", "test");
    CHECK(empty.rouge1.f == 0.0);
    CHECK(empty.rougel.recall == 0.0);
    CHECK(empty.pairs == 2);

    const std::vector<EvalReport> reports = {perfect, empty};
    const std::string text = format_report(reports);
    CHECK(text.find("corpus\ttest\tpairs\t2\tcopy\n") != std::string::npos);
    CHECK(text.find("model\tR-1\tR-2\tR-L\n") != std::string::npos);
    CHECK(text.find("copy\t100.0\t100.0\t100.0\n") != std::string::npos);
    CHECK(text.find("empty\t0.0\t0.0\t0.0\n") != std::string::npos);
    CHECK(text.find("model\tmetric\tP\tR\tF\n") != std::string::npos);
    CHECK_THROWS(score_outputs({{4}}, corpus, "x", "test"));
  }

  TEST_CASE("model tags") {
    ModelConfig c = tiny(12, false);
    c.attention = false;
    CHECK(model_tag(c) == "RNN");
    c.attention = true;
    CHECK(model_tag(c) == "RNN-context");
    c.swd = true;
    CHECK(model_tag(c) == "RNN-context+SWD");
    c.detach_weights = true;
    CHECK(model_tag(c) == "RNN-context");
  }

  TEST_CASE("weight divergence helper is zero for single-sentence documents") {
    SwdModel m = SwdModel::initialize(tiny(12));
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}}, 6), {4}}};
    const auto w = estimate_corpus_weights(corpus);
    CHECK(std::abs(mean_weight_kl(m, corpus, w)) <= 1e-15);
  }
}
