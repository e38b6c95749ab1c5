#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "revdec/corpus.hpp"
#include "revdec/features.hpp"
#include "revdec/matrix.hpp"

namespace revdec::models {

using corpus::Label;

// Optimization settings shared by every learner.
//
// Linear models use plain mini-batch gradient descent at a fixed learning
// rate for max_epochs (the SVM follows the Pegasos 1/(lambda t) schedule and
// ignores learning_rate). Neural models use Adam (beta1 0.9, beta2 0.999,
// eps 1e-8) and stop early once validation loss on a stratified holdout of
// validation_fraction has not improved for early_stop_patience epochs.
struct TrainConfig {
  std::uint64_t seed = 1;
  double learning_rate = 1e-3;
  double l2_lambda = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 6;
  double validation_fraction = 0.1;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

inline constexpr std::size_t kOutOfVocabulary = std::numeric_limits<std::size_t>::max();

// One vectorized review. Which members are populated depends on the
// pipeline's representation; user features always come last in any
// concatenation.
struct Example {
  features::TermVector terms;
  Matrix sequence;                     // embedding rows, zero padded
  std::vector<std::size_t> token_ids;  // vocabulary ids, kOutOfVocabulary for OOV
  std::size_t sequence_length = 0;     // tokens before padding
  std::vector<double> user;
  std::uint64_t schema_id = 0;
};

struct Contribution {
  std::string term;
  double value = 0;
};

struct Prediction {
  double p_deceptive = 0.5;
  Label label = Label::kDeceptive;
  double score = 0;  // pre-sigmoid value
  std::vector<Contribution> contributions;
};

inline Label label_for(double p) { return p >= 0.5 ? Label::kDeceptive : Label::kGenuine; }
inline double target_of(Label l) { return l == Label::kDeceptive ? 1.0 : 0.0; }

double sigmoid(double z);
// Binary cross-entropy of sigmoid(z) against target y, computed stably.
double bce_with_logit(double z, double y);

// Requires |examples| == |labels| >= 2 with both classes present.
void check_training_set(std::span<const Example> examples, std::span<const Label> labels);

}  // namespace revdec::models
