#include "swd/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

#include "swd/errors.hpp"

namespace swd {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
}

LossBreakdown joint_loss(ForwardPass& pass, double lambda, WeightLossForm form) {
  const Batch& batch = pass.batch();
  const std::size_t n = batch.size();
  EncoderOutput enc = pass.run_encoder();
  SequenceLoss seq = pass.summary_nll(enc);

  LossBreakdown out;
  out.tokens = seq.tokens;
  out.per_item_nll = seq.per_item;
  out.per_item_ce.assign(n, 0.0);
  Tape& tape = pass.tape();
  const double inv_n = 1.0 / static_cast<double>(n);

  Var objective = seq.total;
  double ce_sum = 0.0;
  if (enc.weights.valid()) {
    if (batch.weights.size() != n) throw ArgumentError("batch carries no estimated sentence weights");
    const std::size_t slots = pass.sentence_slots();
    Tensor target = Tensor::matrix(n, slots);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < batch.weights[b].size(); ++j) target.at(b, j) = batch.weights[b][j];
    }
    Var ce;
    if (form == WeightLossForm::kEstimatedTarget) {
      Var log_pred = log_softmax_rows(enc.logits, pass.sentence_mask());
      ce = mul(tape.constant(target), log_pred);
    } else {
      Tensor log_target = Tensor::matrix(n, slots);
      for (std::size_t i = 0; i < target.numel(); ++i) {
        if (target[i] > 0.0) log_target[i] = std::log(target[i]);
      }
      ce = mul(enc.weights, tape.constant(std::move(log_target)));
    }
    const Tensor& terms = ce.value();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < slots; ++j) out.per_item_ce[b] -= terms.at(b, j);
      ce_sum += out.per_item_ce[b];
    }
    objective = add(objective, scale(neg(sum(ce)), lambda));
  }
  out.loss = scale(objective, inv_n);
  out.total = out.loss.value().item();
  out.nll = seq.total.value().item() * inv_n;
  out.weight_ce = ce_sum * inv_n;
  if (!std::isfinite(out.total)) {
    std::ostringstream os;
    os << "non-finite loss (nll=" << out.nll << ", weight_ce=" << out.weight_ce << ")";
    throw DivergenceError(os.str());
  }
  return out;
}

double global_grad_norm(const ModelParams& params) {
  double sq = 0.0;
  for (const auto& p : params.all()) {
    for (double g : p.grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

double sgd_step(ModelParams& params, double learning_rate, double clip_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw DivergenceError("non-finite gradient norm");
  const double factor = norm > clip_norm ? clip_norm / norm : 1.0;
  const double step = learning_rate * factor;
  for (auto& p : params.all()) {
    auto v = p.value.values();
    auto g = p.grad.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= step * g[i];
  }
  return norm;
}

std::string to_log_line(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["nll"] = r.nll;
  j["weight_ce"] = r.weight_ce;
  j["grad_norm"] = r.grad_norm;
  return j.dump();
}

TrainResult train(SwdModel& model, const TrainConfig& config, std::span<const EncodedPair> corpus,
                  std::span<const WeightDistribution> weights, const TrainHooks& hooks) {
  config.validate();
  if (corpus.empty()) throw ArgumentError("training corpus is empty");
  if (model.config().swd && weights.size() != corpus.size()) {
    throw ArgumentError("the sentence-weight model needs one weight distribution per pair");
  }
  const std::span<const WeightDistribution> batch_weights =
      model.config().swd ? weights : std::span<const WeightDistribution>();
  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(corpus, batch_weights, config.batch_size, config.seed + epoch);
    for (const Batch& batch : batches) {
      model.params().zero_grad();
      Tape tape;
      ForwardPass pass(model, tape, batch);
      LossBreakdown loss = joint_loss(pass, config.lambda, config.weight_loss_form);
      tape.backward(loss.loss);
      StepRecord rec;
      rec.grad_norm = sgd_step(model.params(), config.learning_rate, config.clip_norm);
      rec.step = ++result.steps;
      rec.epoch = epoch;
      rec.nll = loss.nll;
      rec.weight_ce = loss.weight_ce;
      rec.loss = loss.total;
      rec.tokens = loss.tokens;
      result.log.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, model);
  }
  model.params().zero_grad();
  return result;
}

double mean_token_nll(const SwdModel& model, std::span<const EncodedPair> corpus, std::size_t batch_size) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const Batch& batch : make_batches(corpus, {}, batch_size, std::nullopt)) {
    Tape tape;
    ForwardPass pass(model, tape, batch);
    SequenceLoss loss = pass.summary_nll(pass.run_encoder());
    total += loss.total.value().item();
    tokens += loss.tokens;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

double mean_weight_kl(const SwdModel& model, std::span<const EncodedPair> corpus,
                      std::span<const WeightDistribution> weights, std::size_t batch_size) {
  if (!model.config().swd) throw ArgumentError("model has no sentence-weight path");
  if (weights.size() != corpus.size()) throw ArgumentError("one weight distribution per pair required");
  if (corpus.empty()) return 0.0;
  double total = 0.0;
  for (const Batch& batch : make_batches(corpus, {}, batch_size, std::nullopt)) {
    const auto predicted = model.predict_weights(batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& w = weights[batch.items[b]].weights;
      for (std::size_t j = 0; j < w.size(); ++j) total += w[j] * (std::log(w[j]) - std::log(predicted[b][j]));
    }
  }
  return total / static_cast<double>(corpus.size());
}

std::string model_tag(const ModelConfig& config) {
  std::string tag = config.attention ? "RNN-context" : "RNN";
  if (config.swd && !config.detach_weights) tag += "+SWD";
  return tag;
}

EvalReport score_outputs(std::vector<std::vector<int>> outputs, std::span<const EncodedPair> corpus,
                         const std::string& tag, const std::string& corpus_label) {
  if (outputs.size() != corpus.size()) throw ArgumentError("one output per corpus pair required");
  EvalReport r;
  r.tag = tag;
  r.corpus = corpus_label;
  r.pairs = corpus.size();
  auto accumulate = [](rouge::Score& acc, const rouge::Score& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f += s.f;
  };
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::span<const int> cand(outputs[i]);
    const std::span<const int> ref(corpus[i].summary);
    accumulate(r.rouge1, rouge::rouge_n(cand, ref, 1));
    accumulate(r.rouge2, rouge::rouge_n(cand, ref, 2));
    accumulate(r.rougel, rouge::rouge_l(cand, ref));
  }
  if (!corpus.empty()) {
    const double inv = 1.0 / static_cast<double>(corpus.size());
    for (rouge::Score* s : {&r.rouge1, &r.rouge2, &r.rougel}) {
      s->precision *= inv;
      s->recall *= inv;
      s->f *= inv;
    }
  }
  r.outputs = std::move(outputs);
  return r;
}

EvalReport evaluate(const SwdModel& model, std::span<const EncodedPair> corpus, std::size_t max_len,
                    const std::string& tag, const std::string& corpus_label, std::size_t batch_size) {
  const auto batches = make_batches(corpus, {}, batch_size, std::nullopt);
  std::vector<std::vector<std::vector<int>>> decoded(batches.size());
  std::vector<std::string> errors(batches.size());
  const auto nb = static_cast<std::ptrdiff_t>(batches.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < nb; ++i) {
    try {
      decoded[i] = model.greedy_decode(batches[i], max_len);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error("decoding failed: " + e);
  }
  std::vector<std::vector<int>> outputs(corpus.size());
  for (std::size_t i = 0; i < batches.size(); ++i) {
    for (std::size_t b = 0; b < batches[i].size(); ++b) outputs[batches[i].items[b]] = std::move(decoded[i][b]);
  }
  return score_outputs(std::move(outputs), corpus, tag, corpus_label);
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_report(std::span<const EvalReport> reports) {
  std::ostringstream os;
  for (const auto& r : reports) os << "corpus\t" << r.corpus << "\tpairs\t" << r.pairs << '\t' << r.tag << '\n';
  os << "model\tR-1\tR-2\tR-L\n";
  for (const auto& r : reports) {
    os << r.tag << '\t' << pct(r.rouge1.f) << '\t' << pct(r.rouge2.f) << '\t' << pct(r.rougel.f) << '\n';
  }
  os << "\nmodel\tmetric\tP\tR\tF\n";
  for (const auto& r : reports) {
    const std::pair<const char*, const rouge::Score*> rows[] = {
        {"R-1", &r.rouge1}, {"R-2", &r.rouge2}, {"R-L", &r.rougel}};
    for (const auto& [name, s] : rows) {
      os << r.tag << '\t' << name << '\t' << pct(s->precision) << '\t' << pct(s->recall) << '\t' << pct(s->f)
         << '\n';
    }
  }
  return os.str();
}

}  // namespace swd
