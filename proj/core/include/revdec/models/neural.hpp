#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "revdec/models/types.hpp"
#include "revdec/rng.hpp"

namespace revdec::models {

enum class NeuralKind { kFfnn, kCnnBow, kCnnEmbedding, kLstm };

// How an Example is presented to the network.
//  kTerms:    the term vector (length term_dim).
//  kSequence: the max_len x embedding_dim matrix, one row per token.
//  kTokenIds: one-hot rows over a vocabulary of term_dim terms.
enum class InputMode { kTerms, kSequence, kTokenIds };

std::string_view neural_kind_name(NeuralKind kind);
std::string_view input_mode_name(InputMode mode);

struct NeuralArch {
  NeuralKind kind = NeuralKind::kFfnn;
  InputMode input = InputMode::kTerms;
  std::size_t term_dim = 0;       // vocabulary size for kTerms / kTokenIds
  std::size_t seq_len = 0;        // rows for kSequence
  std::size_t embedding_dim = 0;  // columns for kSequence
  std::size_t user_dim = 0;

  // FFNN: dense(hidden1) -> dropout -> dense(hidden2).
  std::size_t hidden1 = 32;
  std::size_t hidden2 = 16;
  double dropout = 0.25;

  // CNN: conv(filters, kernel along the sliding axis) -> max pool -> dropout.
  std::size_t filters = 50;
  std::size_t kernel = 10;
  std::size_t pool = 10;  // 0 selects global max pooling
  double conv_dropout = 0.5;

  // LSTM units.
  std::size_t lstm_units = 10;

  // CNN and LSTM heads: two dense layers of this width.
  std::size_t dense_units = 8;

  // Throws ShapeError when layer shapes cannot compose.
  void validate() const;
  // Conv output length along the sliding axis and pooled length.
  std::size_t conv_length() const;
  std::size_t pooled_length() const;
};

// Presets with the published layer sizes.
NeuralArch ffnn_arch(std::size_t hidden1, std::size_t hidden2);
NeuralArch cnn_bow_arch(std::size_t pool);           // pool 10 for (1, 10), 0 = global
NeuralArch cnn_embedding_arch(std::size_t pool);     // pool 5 for (5, 1), 0 = global
NeuralArch lstm_arch(InputMode input);

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  bool l2 = false;  // dense kernels carry the L2 penalty
};

using Gradients = std::vector<std::vector<double>>;

// Per-example activations kept for the backward pass.
struct Activations;

class Network {
 public:
  Network() = default;
  // Glorot-uniform kernels, zero biases, LSTM forget-gate bias 1.
  Network(NeuralArch arch, std::uint64_t seed);

  const NeuralArch& arch() const { return arch_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::size_t parameter_count() const;

  Gradients zero_gradients() const;

  // Returns the output logit. With a non-null rng dropout is active.
  double forward(const Example& x, Activations& act, Rng* dropout_rng) const;
  double logit(const Example& x) const;

  // Accumulates d(loss)/d(params) for d(loss)/d(logit) = dlogit.
  void backward(const Example& x, const Activations& act, double dlogit, Gradients& grads) const;

  // Sum of squared L2-penalized parameters.
  double l2_penalty() const;

  // Rebuilds parameter-index lookups after params are replaced wholesale.
  void bind();

 private:
  NeuralArch arch_;
  std::vector<Param> params_;
  struct Slots {
    std::size_t d1w = 0, d1b = 0, d2w = 0, d2b = 0, outw = 0, outb = 0;
    std::size_t convw = 0, convb = 0;
    std::size_t lstm_wx = 0, lstm_wh = 0, lstm_b = 0;
  } slot_;
};

struct Activations {
  // Dense input (FFNN) or frames feeding the conv / LSTM.
  std::vector<double> input;
  std::vector<std::size_t> frame_ids;  // kTokenIds frames
  std::size_t frames = 0, frame_width = 0;

  // CNN
  std::vector<double> conv;      // filters x conv_length, post-ReLU
  std::vector<std::size_t> argmax;
  std::vector<double> pooled;    // filters x pooled_length
  std::vector<double> conv_mask;

  // LSTM, per step: gates i f g o, cell, tanh(cell), hidden
  std::vector<double> gates, cell, cell_tanh, hidden;
  std::size_t steps = 0;

  // Head
  std::vector<double> head_in;
  std::vector<double> h1, h2;  // post-ReLU
  std::vector<double> mask1;   // FFNN dropout between hidden layers
};

struct EpochRecord {
  double train_loss = 0;
  double val_loss = 0;
};

struct NeuralModel {
  Network net;
  TrainConfig config;
  std::uint64_t schema_id = 0;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;

  Prediction predict(const Example& x) const;
};

// Trains with Adam and early stopping on a stratified holdout; the best
// validation-loss parameters are restored. Throws DivergenceError on a
// non-finite loss and ShapeError when examples do not fit the architecture.
NeuralModel train_network(const NeuralArch& arch, std::span<const Example> x,
                          std::span<const Label> y, const TrainConfig& cfg);

NeuralModel train_ffnn(std::span<const Example> x, std::span<const Label> y, NeuralArch arch,
                       const TrainConfig& cfg);
NeuralModel train_cnn(std::span<const Example> x, std::span<const Label> y, NeuralArch arch,
                      const TrainConfig& cfg);
NeuralModel train_lstm(std::span<const Example> x, std::span<const Label> y, NeuralArch arch,
                       const TrainConfig& cfg);

// Mean batch loss (BCE + l2_lambda * penalty) with dropout disabled, and its
// analytic gradient.
double batch_loss(const Network& net, std::span<const Example> x, std::span<const Label> y,
                  double l2_lambda, Gradients* grads);

// Max relative error between analytic gradients and central differences
// (step 1e-5) over up to max_checks randomly chosen parameters. The relative
// error is |a - n| / max(|a| + |n|, 1e-8).
double gradient_check(const Network& net, std::span<const Example> x, std::span<const Label> y,
                      double l2_lambda, std::size_t max_checks, std::uint64_t seed);

}  // namespace revdec::models
