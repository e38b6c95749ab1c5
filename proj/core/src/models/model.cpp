#include "revdec/models/model.hpp"

#include <algorithm>
#include <cmath>

#include "revdec/error.hpp"

namespace revdec::models {

std::string_view model_kind_name(const Model& model) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) {
    return lin->kind == LinearKind::kLogisticRegression ? "logistic_regression" : "linear_svm";
  }
  return neural_kind_name(std::get<NeuralModel>(model).net.arch().kind);
}

std::uint64_t model_schema_id(const Model& model) {
  return std::visit([](const auto& m) { return m.schema_id; }, model);
}

Prediction predict(const Model& model, const Example& x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

std::vector<Contribution> explain_linear(const LinearModel& model, const Example& x,
                                         const features::Vocabulary& vocab) {
  model.score(x);  // schema and shape checks
  std::vector<Contribution> out;
  for (const auto& [i, v] : x.terms.entries) {
    if (v == 0) continue;
    out.push_back({i < vocab.size() ? vocab.term(i) : "#" + std::to_string(i),
                   model.weights[i] * v});
  }
  for (std::size_t k = 0; k < x.user.size(); ++k) {
    if (x.user[k] == 0) continue;
    const std::string name = k < features::kReviewerFeatureNames.size()
                                 ? features::kReviewerFeatureNames[k]
                                 : std::to_string(k);
    out.push_back({"user:" + name, model.weights[model.term_dimension + k] * x.user[k]});
  }
  std::stable_sort(out.begin(), out.end(), [](const Contribution& a, const Contribution& b) {
    return std::abs(a.value) > std::abs(b.value);
  });
  return out;
}

std::vector<Contribution> explain(const Model& model, const Example& x,
                                  const features::Vocabulary& vocab) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) return explain_linear(*lin, x, vocab);
  throw Error(ErrorCode::kUnsupported, "word contributions are only defined for linear models");
}

}  // namespace revdec::models
