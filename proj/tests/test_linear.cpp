#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "revdec/error.hpp"
#include "revdec/models/model.hpp"
#include "revdec/rng.hpp"
#include "test_util.hpp"

using namespace revdec;
using namespace revdec::models;
using corpus::Label;
using testutil::code_of;

namespace {

constexpr Label D = Label::kDeceptive;
constexpr Label G = Label::kGenuine;

double normal(Rng& rng) {
  return std::sqrt(-2.0 * std::log(1.0 - rng.uniform())) * std::cos(2.0 * M_PI * rng.uniform());
}

// Dense feature vector stored as a full term vector.
Example dense(std::vector<double> v) {
  Example x;
  x.terms.dimension = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) x.terms.entries.emplace_back(i, v[i]);
  }
  return x;
}

double accuracy(const LinearModel& m, std::span<const Example> xs, std::span<const Label> ys) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) hit += m.predict(xs[i]).label == ys[i];
  return static_cast<double>(hit) / static_cast<double>(xs.size());
}

double weight_norm(const LinearModel& m) {
  double s = 0;
  for (double w : m.weights) s += w * w;
  return std::sqrt(s);
}

TrainConfig config(double lr = 0.1, std::size_t epochs = 200) {
  TrainConfig c;
  c.learning_rate = lr;
  c.max_epochs = epochs;
  c.batch_size = 4;
  c.l2_lambda = 1e-4;
  return c;
}

struct Blobs {
  std::vector<Example> x;
  std::vector<Label> y;
  std::vector<std::array<double, 2>> points;
};

// 25 points per class around (1, 1) and (-1, -1) with unit spread.
Blobs make_blobs(std::uint64_t seed) {
  Blobs b;
  Rng rng(seed);
  for (int i = 0; i < 50; ++i) {
    const double c = i % 2 == 0 ? 1.0 : -1.0;
    const std::array<double, 2> p{c + normal(rng), c + normal(rng)};
    b.points.push_back(p);
    b.x.push_back(dense({p[0], p[1]}));
    b.y.push_back(i % 2 == 0 ? D : G);
  }
  return b;
}

// Best accuracy of any linear rule sign(cos t * x + sin t * y + b) over a
// fine grid of directions and offsets.
double grid_search_accuracy(const Blobs& b) {
  double best = 0;
  for (int a = 0; a < 720; ++a) {
    const double t = a * M_PI / 360.0;
    for (int k = -400; k <= 400; ++k) {
      const double off = k * 0.01;
      std::size_t hit = 0;
      for (std::size_t i = 0; i < b.points.size(); ++i) {
        const double s = std::cos(t) * b.points[i][0] + std::sin(t) * b.points[i][1] + off;
        hit += (s >= 0 ? D : G) == b.y[i];
      }
      best = std::max(best, static_cast<double>(hit) / static_cast<double>(b.points.size()));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("separable two-point set") {
  const std::vector<Example> x{dense({1.0, 0.0}), dense({0.0, 1.0})};
  const std::vector<Label> y{D, G};
  const LinearModel lr = train_logistic_regression(x, y, config());
  CHECK(accuracy(lr, x, y) == 1.0);
  CHECK(lr.score(x[0]) > 0);
  CHECK(lr.score(x[1]) < 0);

  TrainConfig svm_cfg = config();
  svm_cfg.l2_lambda = 0.01;
  const LinearModel svm = train_linear_svm(x, y, svm_cfg);
  CHECK(svm.kind == LinearKind::kLinearSvm);
  CHECK(svm.score(x[0]) > 0);
  CHECK(svm.score(x[1]) < 0);
  CHECK(accuracy(svm, x, y) == 1.0);
}

TEST_CASE("XOR cannot be fit by a linear model") {
  // The best linear split of the four XOR corners gets 3 of 4 right.
  const std::vector<Example> x{dense({0, 0}), dense({1, 1}), dense({0, 1}), dense({1, 0})};
  const std::vector<Label> y{D, D, G, G};
  CHECK(accuracy(train_logistic_regression(x, y, config()), x, y) <= 0.75);
  CHECK(accuracy(train_linear_svm(x, y, config()), x, y) <= 0.75);
}

TEST_CASE("SVM on Gaussian blobs is close to the best linear split") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Blobs b = make_blobs(seed);
    const double oracle = grid_search_accuracy(b);
    TrainConfig cfg = config();
    cfg.l2_lambda = 0.01;
    const LinearModel svm = train_linear_svm(b.x, b.y, cfg);
    const double acc = accuracy(svm, b.x, b.y);
    CAPTURE(seed);
    CAPTURE(oracle);
    CHECK(acc >= oracle - 0.1);
    CHECK(acc <= oracle + 1e-12);
  }
}

TEST_CASE("stronger regularization never grows the weights") {
  const Blobs b = make_blobs(4);
  for (bool svm : {false, true}) {
    double previous = INFINITY;
    for (double lambda : {1e-3, 1e-2, 1e-1}) {
      TrainConfig cfg = config(0.1, 100);
      cfg.l2_lambda = lambda;
      const LinearModel m =
          svm ? train_linear_svm(b.x, b.y, cfg) : train_logistic_regression(b.x, b.y, cfg);
      const double norm = weight_norm(m);
      CAPTURE(svm);
      CAPTURE(lambda);
      CHECK(norm <= previous);
      previous = norm;
    }
  }
}

TEST_CASE("training preconditions") {
  const std::vector<Example> one{dense({1.0})};
  CHECK(code_of([&] { train_logistic_regression(one, std::vector<Label>{D}, config()); }) ==
        ErrorCode::kInvalidArgument);
  const std::vector<Example> two{dense({1.0}), dense({2.0})};
  CHECK(code_of([&] { train_linear_svm(two, std::vector<Label>{D, D}, config()); }) ==
        ErrorCode::kClassMissing);
  const std::vector<Example> ragged{dense({1.0}), dense({2.0, 3.0})};
  CHECK(code_of([&] {
          train_logistic_regression(ragged, std::vector<Label>{D, G}, config());
        }) == ErrorCode::kShape);
  TrainConfig bad = config();
  bad.learning_rate = -1;
  CHECK(code_of([&] { train_logistic_regression(two, std::vector<Label>{D, G}, bad); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("a runaway learning rate is reported as divergence") {
  const std::vector<Example> x{dense({1e200, 1.0}), dense({-1e200, 1.0})};
  TrainConfig cfg = config(1e200, 5);
  CHECK(code_of([&] { train_logistic_regression(x, std::vector<Label>{D, G}, cfg); }) ==
        ErrorCode::kDivergence);
}

TEST_CASE("zero model predicts one half") {
  LinearModel m;
  m.weights.assign(3, 0.0);
  m.term_dimension = 3;
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto p = predict(Model{m}, dense({normal(rng), normal(rng), normal(rng)}));
    CHECK(p.p_deceptive == 0.5);
    CHECK(p.label == D);
  }
}

TEST_CASE("labels of an unbiased linear model are scale invariant") {
  Rng rng(6);
  LinearModel m;
  m.term_dimension = 4;
  for (int i = 0; i < 4; ++i) m.weights.push_back(normal(rng));
  for (int i = 0; i < 100; ++i) {
    std::vector<double> v;
    for (int k = 0; k < 4; ++k) v.push_back(normal(rng));
    const Label base = m.predict(dense(v)).label;
    for (double s : {0.01, 2.0, 1000.0}) {
      std::vector<double> scaled = v;
      for (double& e : scaled) e *= s;
      CHECK(m.predict(dense(scaled)).label == base);
    }
  }
}

TEST_CASE("schema mismatch is rejected") {
  LinearModel m;
  m.weights.assign(2, 1.0);
  m.term_dimension = 2;
  m.schema_id = 7;
  Example x = dense({1.0, 1.0});
  CHECK(code_of([&] { predict(Model{m}, x); }) == ErrorCode::kSchema);
  x.schema_id = 7;
  CHECK_NOTHROW(predict(Model{m}, x));
  CHECK(code_of([&] { predict(Model{m}, dense({1.0})); }) == ErrorCode::kSchema);
}

TEST_CASE("explanations of a hand-set five-term model") {
  const features::Vocabulary vocab =
      features::build_vocabulary(std::vector<features::Tokens>{{"a", "b", "c", "d", "e"}});
  LinearModel m;
  m.term_dimension = 5;
  m.weights = {0.5, -2.0, 1.0, 0.1, -0.3};
  m.bias = 0.1;
  const Example x = dense({1.0, 1.0, 3.0, 2.0, 1.0});
  // Contributions: a 0.5, b -2, c 3, d 0.2, e -0.3.
  const auto c = explain_linear(m, x, vocab);
  REQUIRE(c.size() == 5);
  const std::vector<std::string> order{"c", "b", "a", "e", "d"};
  const std::vector<double> values{3.0, -2.0, 0.5, -0.3, 0.2};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(c[i].term == order[i]);
    CHECK(c[i].value == doctest::Approx(values[i]).epsilon(1e-12));
  }
  double sum = m.bias;
  for (const auto& e : c) sum += e.value;
  CHECK(std::abs(sum - m.score(x)) < 1e-9);
  CHECK(std::abs(sum - 1.5) < 1e-9);

  const auto single = explain_linear(m, dense({0, 0, 0, 4.0, 0}), vocab);
  REQUIRE(single.size() == 1);
  CHECK(single[0].term == "d");
  CHECK(single[0].value == doctest::Approx(0.4));
}

TEST_CASE("explanations name user features and sum to the logit") {
  const features::Vocabulary vocab =
      features::build_vocabulary(std::vector<features::Tokens>{{"a", "b"}});
  Rng rng(9);
  std::vector<Example> xs;
  std::vector<Label> ys;
  for (int i = 0; i < 40; ++i) {
    Example x = dense({rng.uniform(0, 1), rng.uniform(0, 1)});
    for (int k = 0; k < 5; ++k) x.user.push_back(rng.uniform(0, 1));
    xs.push_back(x);
    ys.push_back(x.user[0] > 0.5 ? D : G);
  }
  const LinearModel m = train_logistic_regression(xs, ys, config());
  for (const Example& x : xs) {
    const auto c = explain(Model{m}, x, vocab);
    double sum = m.bias;
    for (const auto& e : c) sum += e.value;
    const double p = m.predict(x).p_deceptive;
    CHECK(std::abs(sum - std::log(p / (1 - p))) < 1e-6);
    CHECK(std::abs(sum - m.score(x)) < 1e-9);
    CHECK(std::any_of(c.begin(), c.end(),
                      [](const Contribution& e) { return e.term.rfind("user:", 0) == 0; }));
    for (std::size_t i = 1; i < c.size(); ++i) {
      CHECK(std::abs(c[i - 1].value) >= std::abs(c[i].value));
    }
  }
}

TEST_CASE("explanations are unavailable for neural models") {
  NeuralArch arch;
  arch.term_dim = 2;
  arch.hidden1 = 2;
  arch.hidden2 = 2;
  const std::vector<Example> x{dense({1, 0}), dense({0, 1})};
  const NeuralModel n = train_ffnn(x, std::vector<Label>{D, G}, arch, config(0.01, 2));
  const features::Vocabulary vocab =
      features::build_vocabulary(std::vector<features::Tokens>{{"a", "b"}});
  CHECK(code_of([&] { explain(Model{n}, x[0], vocab); }) == ErrorCode::kUnsupported);
}

TEST_CASE("training is deterministic for a seed") {
  const Blobs b = make_blobs(7);
  TrainConfig cfg = config();
  cfg.seed = 42;
  const LinearModel a1 = train_logistic_regression(b.x, b.y, cfg);
  const LinearModel a2 = train_logistic_regression(b.x, b.y, cfg);
  CHECK(a1.weights == a2.weights);
  CHECK(a1.bias == a2.bias);
  const LinearModel s1 = train_linear_svm(b.x, b.y, cfg);
  const LinearModel s2 = train_linear_svm(b.x, b.y, cfg);
  CHECK(s1.weights == s2.weights);
  CHECK(s1.platt_a == s2.platt_a);
  for (const Example& x : b.x) {
    CHECK(predict(Model{s1}, x).p_deceptive == predict(Model{s1}, x).p_deceptive);
  }
}

TEST_CASE("Platt scaling orders probabilities by margin") {
  const Blobs b = make_blobs(8);
  TrainConfig cfg = config();
  cfg.l2_lambda = 0.01;
  const LinearModel svm = train_linear_svm(b.x, b.y, cfg);
  CHECK(svm.platt_a > 0);
  for (const Example& x : b.x) {
    const auto p = svm.predict(x);
    CHECK(p.p_deceptive >= 0.0);
    CHECK(p.p_deceptive <= 1.0);
  }
  const auto [a, c] = fit_platt(std::vector<double>{-2, -1, 1, 2}, std::vector<Label>{G, G, D, D});
  CHECK(a > 0);
  CHECK(std::abs(c) < 1e-6);
}
