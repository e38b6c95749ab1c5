#include "revdec/models/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "revdec/error.hpp"
#include "revdec/rng.hpp"

namespace revdec::models {

namespace {

std::size_t input_dimension(const Example& x) { return x.terms.dimension + x.user.size(); }

void check_dimensions(std::span<const Example> xs) {
  const std::size_t d = input_dimension(xs.front());
  const std::size_t td = xs.front().terms.dimension;
  for (const Example& x : xs) {
    if (input_dimension(x) != d || x.terms.dimension != td) {
      throw Error(ErrorCode::kShape, "examples have inconsistent feature dimensions");
    }
  }
}

// w.x over the sparse term part and the dense user tail.
double dot(std::span<const double> w, std::size_t term_dim, const Example& x) {
  double s = 0;
  for (const auto& [i, v] : x.terms.entries) s += w[i] * v;
  for (std::size_t k = 0; k < x.user.size(); ++k) s += w[term_dim + k] * x.user[k];
  return s;
}

template <typename F>
void for_each_feature(std::size_t term_dim, const Example& x, F&& f) {
  for (const auto& [i, v] : x.terms.entries) f(i, v);
  for (std::size_t k = 0; k < x.user.size(); ++k) f(term_dim + k, x.user[k]);
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

double LinearModel::score(const Example& x) const {
  if (x.schema_id != schema_id) {
    throw Error(ErrorCode::kSchema, "example schema does not match the model");
  }
  if (x.terms.dimension != term_dimension || input_dimension(x) != weights.size()) {
    throw Error(ErrorCode::kShape, "example dimension " + std::to_string(input_dimension(x)) +
                                       " does not match model dimension " +
                                       std::to_string(weights.size()));
  }
  return dot(weights, term_dimension, x) + bias;
}

double LinearModel::probability(double s) const {
  return kind == LinearKind::kLogisticRegression ? sigmoid(s) : sigmoid(platt_a * s + platt_c);
}

Prediction LinearModel::predict(const Example& x) const {
  Prediction p;
  p.score = score(x);
  p.p_deceptive = probability(p.score);
  p.label = label_for(p.p_deceptive);
  return p;
}

LinearModel train_logistic_regression(std::span<const Example> x, std::span<const Label> y,
                                      const TrainConfig& cfg) {
  cfg.validate();
  check_training_set(x, y);
  check_dimensions(x);
  LinearModel m;
  m.kind = LinearKind::kLogisticRegression;
  m.term_dimension = x.front().terms.dimension;
  m.schema_id = x.front().schema_id;
  m.weights.assign(input_dimension(x.front()), 0.0);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order = iota_indices(x.size());
  std::vector<double> grad(m.weights.size(), 0.0);
  std::vector<std::size_t> touched;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      double grad_b = 0;
      touched.clear();
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = x[order[k]];
        const double t = target_of(y[order[k]]);
        const double z = dot(m.weights, m.term_dimension, ex) + m.bias;
        epoch_loss += bce_with_logit(z, t);
        const double err = (sigmoid(z) - t) * inv_b;
        grad_b += err;
        for_each_feature(m.term_dimension, ex, [&](std::size_t i, double v) {
          if (grad[i] == 0) touched.push_back(i);
          grad[i] += err * v;
        });
      }
      const double decay = 1.0 - cfg.learning_rate * cfg.l2_lambda;
      for (double& w : m.weights) w *= decay;
      for (std::size_t i : touched) {
        m.weights[i] -= cfg.learning_rate * grad[i];
        grad[i] = 0;
      }
      m.bias -= cfg.learning_rate * grad_b;
    }
    if (!std::isfinite(epoch_loss) || !std::isfinite(m.bias)) {
      throw Error(ErrorCode::kDivergence,
                  "logistic regression diverged at epoch " + std::to_string(epoch + 1) +
                      "; lower the learning rate");
    }
  }
  return m;
}

LinearModel train_linear_svm(std::span<const Example> x, std::span<const Label> y,
                             const TrainConfig& cfg) {
  cfg.validate();
  check_training_set(x, y);
  check_dimensions(x);
  LinearModel m;
  m.kind = LinearKind::kLinearSvm;
  m.term_dimension = x.front().terms.dimension;
  m.schema_id = x.front().schema_id;
  const std::size_t d = input_dimension(x.front());
  // Last slot is the augmented bias feature (constant 1).
  std::vector<double> w(d + 1, 0.0);
  const double lambda = cfg.l2_lambda;
  const double radius = 1.0 / std::sqrt(lambda);

  Rng rng(cfg.seed);
  std::vector<std::size_t> order = iota_indices(x.size());
  std::vector<std::pair<std::size_t, double>> step;
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double coef = eta / static_cast<double>(end - start);
      step.clear();
      for (std::size_t k = start; k < end; ++k) {
        const Example& ex = x[order[k]];
        const double yy = y[order[k]] == Label::kDeceptive ? 1.0 : -1.0;
        const double margin = dot(w, m.term_dimension, ex) + w[d];
        if (yy * margin < 1.0) {
          for_each_feature(m.term_dimension, ex,
                           [&](std::size_t i, double v) { step.emplace_back(i, coef * yy * v); });
          step.emplace_back(d, coef * yy);
        }
      }
      const double shrink = 1.0 - eta * lambda;
      double sq = 0;
      for (double& wi : w) {
        wi *= shrink;
      }
      for (const auto& [i, v] : step) w[i] += v;
      for (double wi : w) sq += wi * wi;
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) {
        throw Error(ErrorCode::kDivergence, "linear SVM diverged at epoch " +
                                                std::to_string(epoch + 1));
      }
      if (norm > radius) {
        for (double& wi : w) wi *= radius / norm;
      }
    }
  }
  m.bias = w[d];
  w.pop_back();
  m.weights = std::move(w);

  std::vector<double> margins;
  margins.reserve(x.size());
  for (const Example& ex : x) margins.push_back(dot(m.weights, m.term_dimension, ex) + m.bias);
  std::tie(m.platt_a, m.platt_c) = fit_platt(margins, y);
  return m;
}

std::pair<double, double> fit_platt(std::span<const double> margins, std::span<const Label> y) {
  // Newton's method with backtracking on the regularized targets of Platt
  // (1999) as refined by Lin, Lin & Weng (2007).
  double n_pos = 0, n_neg = 0;
  for (Label l : y) (l == Label::kDeceptive ? n_pos : n_neg) += 1;
  const double hi = (n_pos + 1) / (n_pos + 2);
  const double lo = 1 / (n_neg + 2);
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = y[i] == Label::kDeceptive ? hi : lo;

  auto objective = [&](double a, double c) {
    double f = 0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      f += bce_with_logit(a * margins[i] + c, t[i]);
    }
    return f;
  };
  double a = 1, c = 0;
  double f = objective(a, c);
  for (int iter = 0; iter < 100; ++iter) {
    double g1 = 0, g2 = 0, h11 = 1e-12, h22 = 1e-12, h21 = 0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      const double p = sigmoid(a * margins[i] + c);
      const double d1 = p - t[i];
      const double d2 = p * (1 - p);
      g1 += margins[i] * d1;
      g2 += d1;
      h11 += margins[i] * margins[i] * d2;
      h22 += d2;
      h21 += margins[i] * d2;
    }
    if (std::abs(g1) < 1e-9 && std::abs(g2) < 1e-9) break;
    const double det = h11 * h22 - h21 * h21;
    if (!(det > 0)) break;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double dc = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * dc;
    double step = 1;
    bool moved = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nc = c + step * dc;
      const double nf = objective(na, nc);
      if (nf < f + 1e-4 * step * gd) {
        a = na;
        c = nc;
        f = nf;
        moved = true;
        break;
      }
      step /= 2;
    }
    if (!moved) break;
  }
  return {a, c};
}

}  // namespace revdec::models
