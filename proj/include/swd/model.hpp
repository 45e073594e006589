#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "swd/autodiff.hpp"
#include "swd/batch.hpp"

namespace swd {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  // Width of an encoder state (forward and backward halves together) and of
  // the decoder state. Must be even.
  std::size_t hidden_dim = 64;
  std::size_t max_sentences = 20;
  std::size_t position_embed_dim = 16;
  std::size_t mlp_hidden_dim = 64;
  bool attention = true;
  // Sentence-weight path: position table, MLP predictor, state reweighting.
  bool swd = true;
  // Predict weights (for the loss) but feed the decoder unscaled states.
  bool detach_weights = false;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

using ParamLayout = std::vector<std::pair<std::string, Shape>>;

/// Every trainable array of one model, in a fixed order.
class ModelParams {
 public:
  ModelParams() = default;
  /// Names and shapes implied by a configuration, in storage order.
  static ParamLayout layout(const ModelConfig& config);
  /// Uniform in [-0.08, 0.08]. Each array draws from its own stream keyed on
  /// (seed, name), so arrays shared by two configurations start identical.
  static ModelParams initialize(const ModelConfig& config);
  /// Takes ownership of arrays that must match layout(config) exactly.
  static ModelParams from_arrays(const ModelConfig& config, std::vector<Parameter> arrays);

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }
  std::size_t index_of(std::string_view name) const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  void zero_grad();

 private:
  void reindex();

  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Result of the encoder side for one batch. Token rows are time-major:
/// row t * B + b holds position t of item b.
struct EncoderOutput {
  Var states;      // h  [L*B x hidden]
  Var logits;      // sentence logits [B x S]; unset without the SWD path
  Var weights;     // w' [B x S]; unset without the SWD path
  Var reweighted;  // h' [L*B x hidden]; what the decoder reads
  Var attention_keys;  // h' projected for additive attention; unset without attention
};

struct DecoderState {
  Var hidden;
  Var cell;
};

struct StepOutput {
  Var log_probs;  // [B x V]
  DecoderState next;
};

struct SequenceLoss {
  Var total;                     // summed NLL over real target tokens (scalar)
  std::vector<double> per_item;  // NLL of each item
  std::size_t tokens = 0;        // number of real target tokens
};

/// Sum of word embeddings per sentence; rows with segment -1 are ignored.
Var sentence_embeddings(Var word_embeddings, std::span<const std::ptrdiff_t> sentence_of_row,
                        std::size_t num_sentences);

/// h'_i = w'_{sentence(i)} * h_i; rows with sentence -1 become zero.
Var reweight_states(Var states, Var weights_column, std::span<const std::ptrdiff_t> sentence_of_row);

/// One LSTM step: returns (hidden, cell).
std::pair<Var, Var> lstm_cell(Var input, Var hidden, Var cell, Var weight, Var bias);

class SwdModel;

/// One forward pass of a model over one batch on one tape. With a mutable
/// model the parameters are bound as trainable leaves; with a const model
/// they are bound as constants (inference only).
class ForwardPass {
 public:
  ForwardPass(SwdModel& model, Tape& tape, const Batch& batch);
  ForwardPass(const SwdModel& model, Tape& tape, const Batch& batch);

  Tape& tape() { return *tape_; }
  const Batch& batch() const { return *batch_; }
  std::size_t batch_size() const { return batch_->size(); }
  std::size_t source_len() const { return batch_->source_len(); }
  std::size_t sentence_slots() const { return sentence_slots_; }

  Var param(std::string_view name);

  Var word_embeddings();
  Var encode(Var word_embeddings);
  Var sentence_embeddings(Var word_embeddings);
  Var sentence_logits(Var sentence_embeddings);
  Var predict_sentence_weights(Var logits);
  Var reweight_states(Var states, Var weights);
  EncoderOutput run_encoder();

  DecoderState initial_state(const EncoderOutput& enc);
  /// Additive attention over h'. Also returns the [B x L] alignment.
  std::pair<Var, Var> attention_context(Var decoder_hidden, const EncoderOutput& enc);
  StepOutput decode_step(std::span<const int> previous, const DecoderState& state, Var context);

  /// Teacher-forced NLL of the framed summaries in the batch.
  SequenceLoss summary_nll(const EncoderOutput& enc);

  // Time-major bookkeeping shared by the ops above.
  const std::vector<std::ptrdiff_t>& sentence_of_row() const { return sentence_of_row_; }
  const std::vector<unsigned char>& sentence_mask() const { return sentence_mask_; }

 private:
  void prepare();
  Var mask_column(std::size_t t, bool inverted);
  bool column_full(std::size_t t) const;
  Var run_direction(Var x, const std::string& prefix, bool reverse);

  const SwdModel* model_;
  ModelParams* mutable_params_ = nullptr;
  Tape* tape_;
  const Batch* batch_;
  std::vector<Var> bound_;
  std::vector<bool> is_bound_;

  std::size_t sentence_slots_ = 0;
  std::vector<int> tokens_time_major_;
  std::vector<std::ptrdiff_t> sentence_of_row_;  // b * S + sentence, or -1
  std::vector<std::ptrdiff_t> item_of_row_;      // b
  std::vector<unsigned char> sentence_mask_;     // [B x S]
};

class SwdModel {
 public:
  SwdModel(ModelConfig config, ModelParams params);
  static SwdModel initialize(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  /// Argmax decoding from BOS; stops at EOS or after max_len tokens. PAD and
  /// BOS are never emitted; ties go to the lowest id.
  std::vector<std::vector<int>> greedy_decode(const Batch& batch, std::size_t max_len) const;

  /// Predicted sentence weights per item (real sentences only).
  std::vector<std::vector<double>> predict_weights(const Batch& batch) const;

 private:
  ModelConfig config_;
  ModelParams params_;
};

}  // namespace swd
