#include "revdec/models/types.hpp"

#include <cmath>

#include "revdec/error.hpp"

namespace revdec::models {

void TrainConfig::validate() const {
  auto bad = [](const char* field, const char* rule) {
    throw Error(ErrorCode::kInvalidArgument, std::string("train.") + field + ": " + rule);
  };
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) bad("learning_rate", "must be positive");
  if (!(l2_lambda > 0) || !std::isfinite(l2_lambda)) bad("l2_lambda", "must be positive");
  if (batch_size < 1) bad("batch_size", "must be positive");
  if (max_epochs < 1) bad("max_epochs", "must be positive");
  if (early_stop_patience < 1) bad("early_stop_patience", "must be >= 1");
  if (!(validation_fraction > 0 && validation_fraction < 1)) {
    bad("validation_fraction", "must be in (0, 1)");
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

void check_training_set(std::span<const Example> examples, std::span<const Label> labels) {
  if (examples.size() != labels.size()) {
    throw Error(ErrorCode::kShape, "examples and labels differ in length");
  }
  if (examples.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 examples");
  bool dec = false, gen = false;
  for (Label l : labels) {
    dec |= l == Label::kDeceptive;
    gen |= l == Label::kGenuine;
    if (l == Label::kUnknown) {
      throw Error(ErrorCode::kInvalidArgument, "training labels must be deceptive or genuine");
    }
  }
  if (!dec || !gen) throw Error(ErrorCode::kClassMissing, "training set needs both classes");
}

}  // namespace revdec::models
