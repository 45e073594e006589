#include "swd/model.hpp"

#include <algorithm>
#include <random>

#include "swd/errors.hpp"

namespace swd {

namespace {

constexpr double kInitScale = 0.08;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Tensor uniform_init(const Shape& shape, std::uint64_t seed, std::string_view name) {
  const std::uint64_t key = fnv1a(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  std::mt19937_64 rng(seq);
  Tensor t(shape);
  for (double& v : t.values()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = -kInitScale + 2.0 * kInitScale * u;
  }
  return t;
}

}  // namespace

// ---- configuration and parameters ------------------------------------------

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be at least 1");
  };
  if (vocab_size <= static_cast<std::size_t>(kNumReserved)) {
    throw ConfigError("vocab_size must exceed the " + std::to_string(kNumReserved) + " reserved ids");
  }
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(max_sentences, "max_sentences");
  positive(position_embed_dim, "position_embed_dim");
  positive(mlp_hidden_dim, "mlp_hidden_dim");
  if (hidden_dim % 2 != 0) throw ConfigError("hidden_dim must be even (two encoder directions)");
}

ParamLayout ModelParams::layout(const ModelConfig& c) {
  const std::size_t half = c.hidden_dim / 2;
  const std::size_t dec_in = c.embed_dim + (c.attention ? c.hidden_dim : 0) + c.hidden_dim;
  ParamLayout l = {
      {"embedding", {c.vocab_size, c.embed_dim}},
      {"enc_fwd.W", {c.embed_dim + half, 4 * half}},
      {"enc_fwd.b", {1, 4 * half}},
      {"enc_bwd.W", {c.embed_dim + half, 4 * half}},
      {"enc_bwd.b", {1, 4 * half}},
      {"dec_init.W", {c.hidden_dim, c.hidden_dim}},
      {"dec_init.b", {1, c.hidden_dim}},
      {"dec.W", {dec_in, 4 * c.hidden_dim}},
      {"dec.b", {1, 4 * c.hidden_dim}},
      {"out.W", {c.hidden_dim, c.vocab_size}},
      {"out.b", {1, c.vocab_size}},
  };
  if (c.attention) {
    l.push_back({"attn.W_enc", {c.hidden_dim, c.hidden_dim}});
    l.push_back({"attn.W_dec", {c.hidden_dim, c.hidden_dim}});
    l.push_back({"attn.v", {c.hidden_dim, 1}});
  }
  if (c.swd) {
    l.push_back({"pos_embedding", {c.max_sentences, c.position_embed_dim}});
    l.push_back({"mlp.W1", {c.embed_dim + c.position_embed_dim, c.mlp_hidden_dim}});
    l.push_back({"mlp.b1", {1, c.mlp_hidden_dim}});
    l.push_back({"mlp.W2", {c.mlp_hidden_dim, 1}});
  }
  return l;
}

ModelParams ModelParams::initialize(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  for (const auto& [name, shape] : layout(config)) {
    p.params_.emplace_back(name, uniform_init(shape, config.seed, name));
  }
  p.reindex();
  return p;
}

ModelParams ModelParams::from_arrays(const ModelConfig& config, std::vector<Parameter> arrays) {
  config.validate();
  const ParamLayout l = layout(config);
  if (arrays.size() != l.size()) {
    throw FormatError("expected " + std::to_string(l.size()) + " parameter arrays, got " +
                      std::to_string(arrays.size()));
  }
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (arrays[i].name != l[i].first) {
      throw FormatError("parameter array '" + arrays[i].name + "' found where '" + l[i].first +
                        "' was expected");
    }
    if (arrays[i].value.shape() != l[i].second) {
      throw FormatError("parameter array '" + l[i].first + "' has shape " +
                        shape_string(arrays[i].value.shape()) + ", expected " + shape_string(l[i].second));
    }
    arrays[i].grad = Tensor(arrays[i].value.shape(), 0.0);
  }
  ModelParams p;
  p.params_ = std::move(arrays);
  p.reindex();
  return p;
}

void ModelParams::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i].name, i);
}

std::size_t ModelParams::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ArgumentError("no parameter named '" + std::string(name) + "'");
  return it->second;
}

Parameter& ModelParams::at(std::string_view name) { return params_[index_of(name)]; }
const Parameter& ModelParams::at(std::string_view name) const { return params_[index_of(name)]; }

void ModelParams::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

// ---- free building blocks ----------------------------------------------------

Var sentence_embeddings(Var word_embeddings, std::span<const std::ptrdiff_t> sentence_of_row,
                        std::size_t num_sentences) {
  return segment_sum(word_embeddings, sentence_of_row, num_sentences);
}

Var reweight_states(Var states, Var weights_column, std::span<const std::ptrdiff_t> sentence_of_row) {
  return scale_rows(states, gather_rows(weights_column, sentence_of_row));
}

std::pair<Var, Var> lstm_cell(Var input, Var hidden, Var cell, Var weight, Var bias) {
  const std::size_t h = hidden.value().cols();
  Var z = add_bias(matmul(concat(input, hidden, 1), weight), bias);
  Var in_gate = sigmoid(slice_cols(z, 0, h));
  Var forget_gate = sigmoid(slice_cols(z, h, h));
  Var candidate = tanh(slice_cols(z, 2 * h, h));
  Var out_gate = sigmoid(slice_cols(z, 3 * h, h));
  Var c = add(mul(forget_gate, cell), mul(in_gate, candidate));
  return {mul(out_gate, tanh(c)), c};
}

// ---- ForwardPass -------------------------------------------------------------

ForwardPass::ForwardPass(SwdModel& model, Tape& tape, const Batch& batch)
    : model_(&model), mutable_params_(&model.params()), tape_(&tape), batch_(&batch) {
  prepare();
}

ForwardPass::ForwardPass(const SwdModel& model, Tape& tape, const Batch& batch)
    : model_(&model), tape_(&tape), batch_(&batch) {
  prepare();
}

void ForwardPass::prepare() {
  const auto& cfg = model_->config();
  const std::size_t n = batch_->size();
  const std::size_t len = batch_->source_len();
  if (n == 0 || len == 0) throw DegenerateInputError("encoder input is empty");
  for (std::size_t b = 0; b < n; ++b) {
    if (batch_->source_length(b) == 0) {
      throw DegenerateInputError("item " + std::to_string(batch_->items[b]) + " has no tokens");
    }
  }
  sentence_slots_ = batch_->max_sentences();
  if (cfg.swd && sentence_slots_ > cfg.max_sentences) {
    throw DimensionError("batch has " + std::to_string(sentence_slots_) +
                         " sentences but the model supports " + std::to_string(cfg.max_sentences));
  }
  const std::size_t slots = sentence_slots_;
  tokens_time_major_.assign(len * n, kPad);
  sentence_of_row_.assign(len * n, -1);
  item_of_row_.assign(len * n, 0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t r = t * n + b;
      item_of_row_[r] = static_cast<std::ptrdiff_t>(b);
      if (batch_->source_mask(b, t)) {
        tokens_time_major_[r] = batch_->source(b, t);
        sentence_of_row_[r] = static_cast<std::ptrdiff_t>(b * slots + batch_->word2sen[b][t]);
      }
    }
  }
  sentence_mask_.assign(n * slots, 0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < batch_->sentence_counts[b]; ++j) sentence_mask_[b * slots + j] = 1;
  }
  bound_.assign(model_->params().size(), Var());
  is_bound_.assign(model_->params().size(), false);
}

Var ForwardPass::param(std::string_view name) {
  const std::size_t i = model_->params().index_of(name);
  if (!is_bound_[i]) {
    bound_[i] = mutable_params_ ? tape_->param(mutable_params_->all()[i])
                                : tape_->constant(model_->params().all()[i].value);
    is_bound_[i] = true;
  }
  return bound_[i];
}

bool ForwardPass::column_full(std::size_t t) const {
  for (std::size_t b = 0; b < batch_size(); ++b) {
    if (!batch_->source_mask(b, t)) return false;
  }
  return true;
}

Var ForwardPass::mask_column(std::size_t t, bool inverted) {
  Tensor m = Tensor::matrix(batch_size(), 1);
  for (std::size_t b = 0; b < batch_size(); ++b) {
    const bool live = batch_->source_mask(b, t) != 0;
    m[b] = (live != inverted) ? 1.0 : 0.0;
  }
  return tape_->constant(std::move(m));
}

Var ForwardPass::word_embeddings() { return embedding_lookup(param("embedding"), tokens_time_major_); }

Var ForwardPass::run_direction(Var x, const std::string& prefix, bool reverse) {
  // Returns the per-position outputs concatenated time-major, zero at padding.
  const std::size_t n = batch_size();
  const std::size_t len = source_len();
  const std::size_t half = model_->config().hidden_dim / 2;
  Var w = param(prefix + ".W");
  Var bias = param(prefix + ".b");
  Var h = tape_->constant(Tensor::matrix(n, half));
  Var c = tape_->constant(Tensor::matrix(n, half));
  std::vector<Var> outs(len);
  for (std::size_t step = 0; step < len; ++step) {
    const std::size_t t = reverse ? len - 1 - step : step;
    auto [hn, cn] = lstm_cell(slice_rows(x, t * n, n), h, c, w, bias);
    if (column_full(t)) {
      h = hn;
      c = cn;
      outs[t] = hn;
    } else {
      // Padded rows keep their previous state and emit zeros.
      Var live = mask_column(t, false);
      Var dead = mask_column(t, true);
      h = add(scale_rows(hn, live), scale_rows(h, dead));
      c = add(scale_rows(cn, live), scale_rows(c, dead));
      outs[t] = scale_rows(h, live);
    }
  }
  return concat(outs, 0);
}

Var ForwardPass::encode(Var word_embeddings) {
  Var fwd = run_direction(word_embeddings, "enc_fwd", false);
  Var bwd = run_direction(word_embeddings, "enc_bwd", true);
  return concat(fwd, bwd, 1);
}

Var ForwardPass::sentence_embeddings(Var word_embeddings) {
  return swd::sentence_embeddings(word_embeddings, sentence_of_row_, batch_size() * sentence_slots_);
}

Var ForwardPass::sentence_logits(Var sentence_embeddings) {
  const std::size_t n = batch_size();
  const std::size_t slots = sentence_slots_;
  std::vector<std::ptrdiff_t> position(n * slots);
  for (std::size_t r = 0; r < position.size(); ++r) position[r] = static_cast<std::ptrdiff_t>(r % slots);
  Var pos = gather_rows(param("pos_embedding"), position);
  Var features = concat(sentence_embeddings, pos, 1);
  Var hidden = tanh(add_bias(matmul(features, param("mlp.W1")), param("mlp.b1")));
  return reshape(matmul(hidden, param("mlp.W2")), Shape{n, slots});
}

Var ForwardPass::predict_sentence_weights(Var logits) {
  for (std::size_t b = 0; b < batch_size(); ++b) {
    if (batch_->sentence_counts[b] == 0) {
      throw DegenerateInputError("item " + std::to_string(batch_->items[b]) + " has no sentences");
    }
  }
  return softmax_rows(logits, sentence_mask_);
}

Var ForwardPass::reweight_states(Var states, Var weights) {
  Var column = reshape(weights, Shape{batch_size() * sentence_slots_, 1});
  return swd::reweight_states(states, column, sentence_of_row_);
}

EncoderOutput ForwardPass::run_encoder() {
  const auto& cfg = model_->config();
  EncoderOutput enc;
  Var x = word_embeddings();
  enc.states = encode(x);
  enc.reweighted = enc.states;
  if (cfg.swd) {
    enc.logits = sentence_logits(sentence_embeddings(x));
    enc.weights = predict_sentence_weights(enc.logits);
    if (!cfg.detach_weights) enc.reweighted = reweight_states(enc.states, enc.weights);
  }
  if (cfg.attention) enc.attention_keys = matmul(enc.reweighted, param("attn.W_enc"));
  return enc;
}

DecoderState ForwardPass::initial_state(const EncoderOutput& enc) {
  const std::size_t n = batch_size();
  const std::size_t hidden = model_->config().hidden_dim;
  const std::size_t half = hidden / 2;
  std::vector<std::ptrdiff_t> last(n);
  for (std::size_t b = 0; b < n; ++b) {
    last[b] = static_cast<std::ptrdiff_t>((batch_->source_length(b) - 1) * n + b);
  }
  Var final_forward = slice_cols(gather_rows(enc.reweighted, last), 0, half);
  Var initial_backward = slice_cols(slice_rows(enc.reweighted, 0, n), half, half);
  Var h0 = add_bias(matmul(concat(final_forward, initial_backward, 1), param("dec_init.W")),
                    param("dec_init.b"));
  return {h0, tape_->constant(Tensor::matrix(n, hidden))};
}

std::pair<Var, Var> ForwardPass::attention_context(Var decoder_hidden, const EncoderOutput& enc) {
  if (!enc.attention_keys.valid()) throw ArgumentError("attention is disabled for this model");
  const std::size_t n = batch_size();
  const std::size_t len = source_len();
  Var query = gather_rows(matmul(decoder_hidden, param("attn.W_dec")), item_of_row_);
  Var energy = tanh(add(enc.attention_keys, query));
  Var scores = transpose(reshape(matmul(energy, param("attn.v")), Shape{len, n}));
  Var alignment = softmax_rows(scores, batch_->source_mask.data);
  Var column = reshape(transpose(alignment), Shape{len * n, 1});
  Var context = segment_sum(scale_rows(enc.reweighted, column), item_of_row_, n);
  return {context, alignment};
}

StepOutput ForwardPass::decode_step(std::span<const int> previous, const DecoderState& state,
                                    Var context) {
  Var input = embedding_lookup(param("embedding"), previous);
  if (model_->config().attention) input = concat(input, context, 1);
  auto [h, c] = lstm_cell(input, state.hidden, state.cell, param("dec.W"), param("dec.b"));
  Var logits = add_bias(matmul(h, param("out.W")), param("out.b"));
  return {log_softmax_rows(logits), {h, c}};
}

SequenceLoss ForwardPass::summary_nll(const EncoderOutput& enc) {
  const std::size_t n = batch_size();
  const Grid<int>& y = batch_->summary;
  const Grid<unsigned char>& live = batch_->summary_mask;
  SequenceLoss out;
  out.per_item.assign(n, 0.0);
  DecoderState state = initial_state(enc);
  std::vector<Var> picked;
  std::vector<int> previous(n);
  std::vector<std::size_t> target(n);
  for (std::size_t t = 0; t + 1 < y.cols; ++t) {
    bool any = false, all = true;
    Tensor weight = Tensor::matrix(n, 1);
    for (std::size_t b = 0; b < n; ++b) {
      previous[b] = y(b, t);
      const bool ok = live(b, t + 1) != 0;
      target[b] = ok ? static_cast<std::size_t>(y(b, t + 1)) : 0;
      weight[b] = ok ? 1.0 : 0.0;
      any |= ok;
      all &= ok;
    }
    if (!any) break;
    Var context;
    if (model_->config().attention) context = attention_context(state.hidden, enc).first;
    StepOutput step = decode_step(previous, state, context);
    Var p = pick(step.log_probs, target);
    if (!all) p = scale_rows(p, tape_->constant(std::move(weight)));
    for (std::size_t b = 0; b < n; ++b) {
      if (live(b, t + 1)) {
        out.per_item[b] -= p.value()[b];
        ++out.tokens;
      }
    }
    picked.push_back(p);
    state = step.next;
  }
  out.total = neg(sum(concat(picked, 0)));
  return out;
}

// ---- SwdModel ------------------------------------------------------------------

SwdModel::SwdModel(ModelConfig config, ModelParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const ParamLayout l = ModelParams::layout(config_);
  if (l.size() != params_.size()) throw FormatError("parameter set does not match the model configuration");
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (params_.all()[i].name != l[i].first || params_.all()[i].value.shape() != l[i].second) {
      throw FormatError("parameter array '" + l[i].first + "' does not match the model configuration");
    }
  }
}

SwdModel SwdModel::initialize(const ModelConfig& config) {
  return SwdModel(config, ModelParams::initialize(config));
}

std::vector<std::vector<int>> SwdModel::greedy_decode(const Batch& batch, std::size_t max_len) const {
  const std::size_t n = batch.size();
  std::vector<std::vector<int>> out(n);
  if (max_len == 0 || n == 0) return out;
  Tape tape;
  ForwardPass pass(*this, tape, batch);
  EncoderOutput enc = pass.run_encoder();
  DecoderState state = pass.initial_state(enc);
  std::vector<int> previous(n, kBos);
  std::vector<bool> done(n, false);
  const std::size_t vocab = config_.vocab_size;
  for (std::size_t step = 0; step < max_len; ++step) {
    Var context;
    if (config_.attention) context = pass.attention_context(state.hidden, enc).first;
    StepOutput s = pass.decode_step(previous, state, context);
    const Tensor& lp = s.log_probs.value();
    bool all_done = true;
    for (std::size_t b = 0; b < n; ++b) {
      if (done[b]) continue;
      int best = -1;
      double best_score = 0.0;
      for (std::size_t v = 0; v < vocab; ++v) {
        const int id = static_cast<int>(v);
        if (id == kPad || id == kBos) continue;
        if (best < 0 || lp.at(b, v) > best_score) {
          best = id;
          best_score = lp.at(b, v);
        }
      }
      previous[b] = best;
      if (best == kEos) {
        done[b] = true;
      } else {
        out[b].push_back(best);
        all_done = false;
      }
    }
    if (all_done) break;
    state = s.next;
  }
  return out;
}

std::vector<std::vector<double>> SwdModel::predict_weights(const Batch& batch) const {
  std::vector<std::vector<double>> out(batch.size());
  if (!config_.swd) return out;
  Tape tape;
  ForwardPass pass(*this, tape, batch);
  EncoderOutput enc = pass.run_encoder();
  const Tensor& w = enc.weights.value();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t j = 0; j < batch.sentence_counts[b]; ++j) out[b].push_back(w.at(b, j));
  }
  return out;
}

}  // namespace swd
