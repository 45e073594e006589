#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support/oracles.hpp"
#include "swd/errors.hpp"
#include "swd/model.hpp"
#include "swd/trainer.hpp"

using namespace swd;

namespace {

ModelConfig small_config(bool swd_path = true, bool attention = true) {
  ModelConfig c;
  c.vocab_size = 12;
  c.embed_dim = 5;
  c.hidden_dim = 8;
  c.max_sentences = 4;
  c.position_embed_dim = 3;
  c.mlp_hidden_dim = 6;
  c.swd = swd_path;
  c.attention = attention;
  c.seed = 9;
  return c;
}

Batch batch_of(const std::vector<EncodedPair>& corpus) {
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  return make_batch(corpus, {}, idx);
}

void zero_all(SwdModel& m) {
  for (auto& p : m.params().all()) p.value.fill(0.0);
}

void randomize(SwdModel& m, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& p : m.params().all()) {
    for (double& v : p.value.values()) v = u(rng);
  }
}

Tensor half_row(const Tensor& h, std::size_t row, std::size_t start, std::size_t count) {
  Tensor out({count});
  for (std::size_t j = 0; j < count; ++j) out[j] = h.at(row, start + j);
  return out;
}

}  // namespace

TEST_SUITE("swd-model") {
  TEST_CASE("configuration validation") {
    ModelConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    c.hidden_dim = 7;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.embed_dim = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("layout depends on the enabled paths") {
    const auto full = ModelParams::layout(small_config(true, true));
    const auto plain = ModelParams::layout(small_config(false, false));
    CHECK(full.size() == plain.size() + 7);
    const auto params = ModelParams::initialize(small_config());
    CHECK(params.at("embedding").value.shape() == Shape{12, 5});
    CHECK(params.at("pos_embedding").value.shape() == Shape{4, 3});
    CHECK(params.at("mlp.W1").value.shape() == Shape{8, 6});
    CHECK(params.at("out.W").value.shape() == Shape{8, 12});
    for (const auto& p : params.all()) {
      for (double v : p.value.values()) {
        CHECK(v >= -0.08);
        CHECK(v <= 0.08);
      }
    }
  }

  TEST_CASE("shared arrays start identical across configurations") {
    const auto a = ModelParams::initialize(small_config(true, true));
    const auto b = ModelParams::initialize(small_config(false, true));
    for (const auto& p : b.all()) CHECK(a.at(p.name).value == p.value);
  }

  TEST_CASE("zero parameters give zero encoder states") {
    SwdModel m = SwdModel::initialize(small_config());
    zero_all(m);
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}, {6}}, 4), {4}}};
    Batch batch = batch_of(corpus);
    Tape t;
    ForwardPass pass(m, t, batch);
    for (double v : pass.run_encoder().states.value().values()) CHECK(v == 0.0);
  }

  TEST_CASE("direction symmetry on a two-token input") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 4);
    m.params().at("enc_bwd.W").value = m.params().at("enc_fwd.W").value;
    m.params().at("enc_bwd.b").value = m.params().at("enc_fwd.b").value;
    std::vector<EncodedPair> ab = {{assemble_document({{4, 7}}, 4), {4}}};
    std::vector<EncodedPair> ba = {{assemble_document({{7, 4}}, 4), {4}}};
    Batch b1 = batch_of(ab), b2 = batch_of(ba);
    Tape t1, t2;
    ForwardPass p1(m, t1, b1), p2(m, t2, b2);
    const Tensor h1 = p1.encode(p1.word_embeddings()).value();
    const Tensor h2 = p2.encode(p2.word_embeddings()).value();
    for (std::size_t t = 0; t < 2; ++t) {
      CHECK(half_row(h1, t, 0, 4) == half_row(h2, 1 - t, 4, 4));
      CHECK(half_row(h1, t, 4, 4) == half_row(h2, 1 - t, 0, 4));
    }
  }

  TEST_CASE("single token: both directions see exactly that token") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 5);
    m.params().at("enc_bwd.W").value = m.params().at("enc_fwd.W").value;
    m.params().at("enc_bwd.b").value = m.params().at("enc_fwd.b").value;
    std::vector<EncodedPair> one = {{assemble_document({{6}}, 4), {4}}};
    Batch b = batch_of(one);
    Tape t;
    ForwardPass p(m, t, b);
    const Tensor h = p.encode(p.word_embeddings()).value();
    CHECK(half_row(h, 0, 0, 4) == half_row(h, 0, 4, 4));
  }

  TEST_CASE("sentence embeddings are sums of word embeddings") {
    Tape t;
    Var x = t.constant(Tensor::from_rows({{1, 2}, {1, 2}, {3, -1}, {0.5, 0.5}}));
    const std::vector<std::ptrdiff_t> seg = {0, 0, 1, -1};
    const Tensor s = sentence_embeddings(x, seg, 2).value();
    CHECK(s == Tensor::from_rows({{2, 4}, {3, -1}}));
    const Tensor doubled = sentence_embeddings(scale(x, 2.0), seg, 2).value();
    for (std::size_t i = 0; i < s.numel(); ++i) CHECK(doubled[i] == 2.0 * s[i]);
  }

  TEST_CASE("predicted weights") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 6);
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}, {4, 5}, {6}}, 4), {4}},
                                       {assemble_document({{7}}, 4), {7}}};
    Batch batch = batch_of(corpus);

    SUBCASE("position matters for identical sentences") {
      const auto w = m.predict_weights(batch);
      CHECK(w[0].size() == 3);
      CHECK(w[0][0] != w[0][1]);
      CHECK(std::accumulate(w[0].begin(), w[0].end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
      REQUIRE(w[1].size() == 1);
      CHECK(w[1][0] == 1.0);
    }
    SUBCASE("zero MLP weights give uniform weights") {
      m.params().at("mlp.W2").value.fill(0.0);
      const auto w = m.predict_weights(batch);
      for (double v : w[0]) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("padded sentence slots get exactly zero") {
      Tape t;
      ForwardPass p(m, t, batch);
      const Tensor w = p.run_encoder().weights.value();
      CHECK(w.at(1, 1) == 0.0);
      CHECK(w.at(1, 2) == 0.0);
    }
  }

  TEST_CASE("permuting sentences with their positions permutes the weights") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 7);
    const std::vector<std::vector<int>> sents = {{4, 5}, {6, 6, 7}, {8}};
    const std::vector<std::size_t> perm = {2, 0, 1};
    std::vector<std::vector<int>> permuted;
    for (std::size_t j : perm) permuted.push_back(sents[j]);
    std::vector<EncodedPair> a = {{assemble_document(sents, 4), {4}}};
    const auto wa = m.predict_weights(batch_of(a));

    SwdModel m2 = m;
    Tensor& table = m2.params().at("pos_embedding").value;
    const Tensor original = m.params().at("pos_embedding").value;
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t c = 0; c < table.cols(); ++c) table.at(j, c) = original.at(perm[j], c);
    }
    std::vector<EncodedPair> b = {{assemble_document(permuted, 4), {4}}};
    const auto wb = m2.predict_weights(batch_of(b));
    for (std::size_t j = 0; j < 3; ++j) CHECK(wb[0][j] == doctest::Approx(wa[0][perm[j]]).epsilon(1e-12));
  }

  TEST_CASE("reweighting examples") {
    Tape t;
    Var h = t.constant(Tensor::from_rows({{2, -2}, {4, 6}, {1, 1}}));
    const std::vector<std::ptrdiff_t> rows = {0, 1, -1};
    const Tensor out = reweight_states(h, t.constant(Tensor::from_rows({{0.75}, {0.25}})), rows).value();
    CHECK(out == Tensor::from_rows({{1.5, -1.5}, {1, 1.5}, {0, 0}}));
    const std::vector<std::ptrdiff_t> single = {0, 0};
    Var h2 = t.constant(Tensor::from_rows({{3, 1}, {-2, 5}}));
    CHECK(reweight_states(h2, t.constant(Tensor::from_rows({{1.0}})), single).value() == h2.value());
    const Tensor uniform =
        reweight_states(h, t.constant(Tensor::from_rows({{0.5}, {0.5}})), std::vector<std::ptrdiff_t>{0, 1, 0})
            .value();
    CHECK(uniform == Tensor::from_rows({{1, -1}, {2, 3}, {0.5, 0.5}}));
    // Linear in h.
    const Tensor scaled = reweight_states(scale(h, 3.0), t.constant(Tensor::from_rows({{0.75}, {0.25}})), rows).value();
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(scaled[i] == doctest::Approx(3.0 * out[i]));
  }

  TEST_CASE("attention") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 8);
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5, 6}, {7}}, 4), {4}},
                                       {assemble_document({{8}}, 4), {8}}};
    Batch batch = batch_of(corpus);
    Tape t;
    ForwardPass p(m, t, batch);
    EncoderOutput enc = p.run_encoder();
    DecoderState s = p.initial_state(enc);

    SUBCASE("alignment is a masked distribution") {
      auto [ctx, alpha] = p.attention_context(s.hidden, enc);
      const Tensor a = alpha.value();
      CHECK(a.shape() == Shape{2, 4});
      double row0 = 0.0;
      for (std::size_t k = 0; k < 4; ++k) row0 += a.at(0, k);
      CHECK(row0 == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(a.at(1, 0) == 1.0);
      for (std::size_t k = 1; k < 4; ++k) CHECK(a.at(1, k) == 0.0);
      // One real token: the context is that token's state.
      const Tensor h = enc.reweighted.value();
      for (std::size_t c = 0; c < 8; ++c) CHECK(ctx.value().at(1, c) == doctest::Approx(h.at(1, c)));
    }
    SUBCASE("uniform scores average the real states") {
      m.params().at("attn.v").value.fill(0.0);
      Tape t2;
      ForwardPass p2(m, t2, batch);
      EncoderOutput e2 = p2.run_encoder();
      auto [ctx, alpha] = p2.attention_context(p2.initial_state(e2).hidden, e2);
      const Tensor h = e2.reweighted.value();
      for (std::size_t c = 0; c < 8; ++c) {
        double mean = 0.0;
        for (std::size_t t_ = 0; t_ < 4; ++t_) mean += h.at(t_ * 2, c) / 4.0;
        CHECK(ctx.value().at(0, c) == doctest::Approx(mean).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("decoder step distribution") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 10);
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}}, 4), {4}}};
    Batch batch = batch_of(corpus);
    auto step = [&](const SwdModel& model) {
      Tape t;
      ForwardPass p(model, t, batch);
      EncoderOutput enc = p.run_encoder();
      DecoderState s = p.initial_state(enc);
      Var ctx = p.attention_context(s.hidden, enc).first;
      const std::vector<int> prev = {kBos};
      return p.decode_step(prev, s, ctx).log_probs.value();
    };
    const Tensor lp = step(m);
    double total = 0.0;
    for (double v : lp.values()) total += std::exp(v);
    CHECK(std::abs(total - 1.0) <= 1e-12);
    CHECK(step(m) == lp);
    zero_all(m);
    const Tensor flat = step(m);
    for (double v : flat.values()) CHECK(v == doctest::Approx(-std::log(12.0)).epsilon(1e-14));

    Tape t;
    ForwardPass p(m, t, batch);
    EncoderOutput enc = p.run_encoder();
    DecoderState s = p.initial_state(enc);
    Var ctx = p.attention_context(s.hidden, enc).first;
    const std::vector<int> bad = {12};
    CHECK_THROWS_AS(p.decode_step(bad, s, ctx), VocabularyError);
  }

  TEST_CASE("greedy decoding rules") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 12, 1.0);
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5, 6}, {7}}, 4), {4}},
                                       {assemble_document({{8, 9}}, 4), {8}}};
    Batch batch = batch_of(corpus);
    CHECK(m.greedy_decode(batch, 0) == std::vector<std::vector<int>>(2));
    for (const auto& seq : m.greedy_decode(batch, 15)) {
      CHECK(seq.size() <= 15);
      for (int id : seq) {
        CHECK(id != kPad);
        CHECK(id != kBos);
      }
    }
    // Zero parameters: every logit ties, so the lowest admissible id (UNK) wins.
    zero_all(m);
    CHECK(m.greedy_decode(batch, 3)[0] == std::vector<int>{kUnk, kUnk, kUnk});
  }

  TEST_CASE("decoding does not depend on batch padding") {
    SwdModel m = SwdModel::initialize(small_config());
    randomize(m, 13, 0.8);
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}}, 4), {4}},
                                       {assemble_document({{6, 7, 8}, {9, 10, 11}, {4}}, 4), {6}}};
    const std::vector<std::size_t> first = {0};
    const auto alone = m.greedy_decode(make_batch(corpus, {}, first), 10);
    const auto together = m.greedy_decode(batch_of(corpus), 10);
    CHECK(alone[0] == together[0]);
    const auto w_alone = m.predict_weights(make_batch(corpus, {}, first));
    CHECK(w_alone[0] == m.predict_weights(batch_of(corpus))[0]);
  }

  TEST_CASE("detached weights leave the decoder path unchanged") {
    ModelConfig c = small_config();
    c.detach_weights = true;
    SwdModel detached = SwdModel::initialize(c);
    SwdModel plain = SwdModel::initialize(small_config(false));
    std::vector<EncodedPair> corpus = {{assemble_document({{4, 5}, {6}}, 4), {4, 5}}};
    const auto weights = estimate_corpus_weights_serial(corpus);
    const std::vector<std::size_t> idx = {0};
    Batch batch = make_batch(corpus, weights, idx);
    Tape t1, t2;
    ForwardPass p1(detached, t1, batch), p2(plain, t2, batch);
    LossBreakdown l1 = joint_loss(p1, 0.0);
    LossBreakdown l2 = joint_loss(p2, 0.0);
    CHECK(l1.total == l2.total);
    t1.backward(l1.loss);
    for (const char* name : {"pos_embedding", "mlp.W1", "mlp.b1", "mlp.W2"}) {
      for (double g : detached.params().at(name).grad.values()) CHECK(g == 0.0);
    }
  }

  TEST_CASE("too many sentences for the position table") {
    SwdModel m = SwdModel::initialize(small_config());
    std::vector<EncodedPair> corpus = {{assemble_document({{4}, {5}, {6}, {7}, {8}}, 10), {4}}};
    Batch batch = batch_of(corpus);
    Tape t;
    CHECK_THROWS_AS(ForwardPass(m, t, batch), DimensionError);
  }

  TEST_CASE("toy joint loss passes the end-to-end gradient check") {
    for (bool attention : {true, false}) {
      auto toy = oracle::toy_instance(3, true, attention);
      std::vector<Parameter*> params;
      for (auto& p : toy.model.params().all()) params.push_back(&p);
      auto loss = [&toy](Tape& tape) {
        ForwardPass pass(toy.model, tape, toy.batch);
        return joint_loss(pass, 0.7).loss;
      };
      CHECK(grad_check_parameters(loss, params) <= 1e-4);
    }
  }
}
