#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "swd/model.hpp"
#include "swd/rouge.hpp"

namespace swd {

/// How the sentence-weight term compares estimated (w) and predicted (w')
/// weights.
enum class WeightLossForm {
  kEstimatedTarget,  // -sum w * log w'   (minimized at w' = w)
  kLiteral,          // -sum w' * log w   (w fixed)
};

struct TrainConfig {
  std::size_t batch_size = 32;
  double lambda = 0.01;
  double learning_rate = 0.1;
  std::size_t epochs = 10;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  WeightLossForm weight_loss_form = WeightLossForm::kEstimatedTarget;

  void validate() const;
};

struct LossBreakdown {
  Var loss;                // (1/N) sum_i (NLL_i + lambda CE_i), on the tape
  double nll = 0.0;        // (1/N) sum_i NLL_i
  double weight_ce = 0.0;  // (1/N) sum_i CE_i
  double total = 0.0;
  std::size_t tokens = 0;  // real target tokens in the batch
  std::vector<double> per_item_nll;
  std::vector<double> per_item_ce;
};

/// Joint objective for the batch of `pass`. Without the SWD path the weight
/// term is absent and reported as 0. Throws DivergenceError if non-finite.
LossBreakdown joint_loss(ForwardPass& pass, double lambda,
                         WeightLossForm form = WeightLossForm::kEstimatedTarget);

double global_grad_norm(const ModelParams& params);

/// Global-norm clipping then theta -= lr * g. Returns the pre-clip norm.
/// Throws DivergenceError (leaving params untouched) on a non-finite gradient.
double sgd_step(ModelParams& params, double learning_rate, double clip_norm);

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double nll = 0.0;
  double weight_ce = 0.0;
  double grad_norm = 0.0;
  double loss = 0.0;
  std::size_t tokens = 0;
};

/// One line of the training log.
std::string to_log_line(const StepRecord& r);

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  // Called after every epoch with the 1-based epoch number.
  std::function<void(std::size_t, const SwdModel&)> on_epoch_end;
};

struct TrainResult {
  std::vector<StepRecord> log;
  std::size_t steps = 0;
};

/// Epochs of seeded-shuffled minibatch SGD. Deterministic for a given seed.
TrainResult train(SwdModel& model, const TrainConfig& config, std::span<const EncodedPair> corpus,
                  std::span<const WeightDistribution> weights, const TrainHooks& hooks = {});

/// Teacher-forced NLL per target token over a corpus (no parameter updates).
double mean_token_nll(const SwdModel& model, std::span<const EncodedPair> corpus, std::size_t batch_size = 32);

/// Mean KL(w || w') over a corpus; the model must have the SWD path.
double mean_weight_kl(const SwdModel& model, std::span<const EncodedPair> corpus,
                      std::span<const WeightDistribution> weights, std::size_t batch_size = 32);

/// "RNN" or "RNN-context", with "+SWD" when the weight path feeds the decoder.
std::string model_tag(const ModelConfig& config);

struct EvalReport {
  std::string tag;
  std::string corpus;
  std::size_t pairs = 0;
  rouge::Score rouge1;  // corpus means of P, R and F
  rouge::Score rouge2;
  rouge::Score rougel;
  std::vector<std::vector<int>> outputs;
};

/// Greedy-decodes every document (batches fan out over OpenMP threads) and
/// scores the outputs against the reference summaries.
EvalReport evaluate(const SwdModel& model, std::span<const EncodedPair> corpus, std::size_t max_len,
                    const std::string& tag, const std::string& corpus_label,
                    std::size_t batch_size = 32);

/// Scores precomputed outputs; shared by evaluate() and tests.
EvalReport score_outputs(std::vector<std::vector<int>> outputs, std::span<const EncodedPair> corpus,
                         const std::string& tag, const std::string& corpus_label);

/// Tab-separated table with one row per model: R-1, R-2, R-L F1 as
/// percentages with one decimal, followed by the P/R/F detail.
std::string format_report(std::span<const EvalReport> reports);

}  // namespace swd
