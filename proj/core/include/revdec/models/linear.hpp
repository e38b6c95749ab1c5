#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "revdec/models/types.hpp"

namespace revdec::models {

enum class LinearKind { kLogisticRegression, kLinearSvm };

struct LinearModel {
  LinearKind kind = LinearKind::kLogisticRegression;
  std::vector<double> weights;  // term dimension followed by user features
  double bias = 0;
  // SVM margin -> probability map sigmoid(platt_a * margin + platt_c).
  double platt_a = 1;
  double platt_c = 0;
  std::uint64_t schema_id = 0;

  std::size_t term_dimension = 0;

  double score(const Example& x) const;
  double probability(double score) const;
  Prediction predict(const Example& x) const;
};

// L2-regularized (lambda/2 |w|^2) binary cross-entropy by mini-batch gradient
// descent. Throws DivergenceError on a non-finite loss.
LinearModel train_logistic_regression(std::span<const Example> x, std::span<const Label> y,
                                      const TrainConfig& cfg);

// Pegasos: hinge loss + lambda/2 |w|^2 with step 1/(lambda t); the bias is an
// augmented constant feature. Probabilities come from a Platt fit on the
// training margins.
LinearModel train_linear_svm(std::span<const Example> x, std::span<const Label> y,
                             const TrainConfig& cfg);

// Fits (a, c) so that sigmoid(a * margin + c) matches the labels.
std::pair<double, double> fit_platt(std::span<const double> margins, std::span<const Label> y);

}  // namespace revdec::models
