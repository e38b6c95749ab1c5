#pragma once

#include <string_view>
#include <variant>
#include <vector>

#include "revdec/features.hpp"
#include "revdec/models/linear.hpp"
#include "revdec/models/neural.hpp"
#include "revdec/models/types.hpp"

namespace revdec::models {

using Model = std::variant<LinearModel, NeuralModel>;

// "logistic_regression", "linear_svm", "ffnn", "cnn_bow", "cnn_embedding", "lstm".
std::string_view model_kind_name(const Model& model);
std::uint64_t model_schema_id(const Model& model);

// Deterministic; dropout is inactive. Throws SchemaError when the example was
// produced by a different feature pipeline.
Prediction predict(const Model& model, const Example& x);

// Per-feature contribution weight_i * x_i over non-zero features, sorted by
// decreasing magnitude. User features are named "user:<feature>". The sum of
// contributions plus the bias equals the pre-sigmoid score.
std::vector<Contribution> explain_linear(const LinearModel& model, const Example& x,
                                         const features::Vocabulary& vocab);
// Throws Unsupported for neural models.
std::vector<Contribution> explain(const Model& model, const Example& x,
                                  const features::Vocabulary& vocab);

}  // namespace revdec::models
