#include <benchmark/benchmark.h>

#include <numeric>

#include "revdec/features.hpp"
#include "revdec/model_io.hpp"
#include "revdec/models/neural.hpp"
#include "revdec/recipe.hpp"
#include "revdec/synthetic.hpp"
#include "revdec/text.hpp"

using namespace revdec;

namespace {

const corpus::Corpus& bench_corpus() {
  static const corpus::Corpus c = [] {
    synthetic::YelpStyleConfig cfg;
    cfg.reviews_per_class = 200;
    return synthetic::generate_yelp_style(cfg);
  }();
  return c;
}

std::vector<std::size_t> all_rows() {
  std::vector<std::size_t> idx(bench_corpus().size());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void BM_Tokenize(benchmark::State& state) {
  const auto& c = bench_corpus();
  std::size_t i = 0, tokens = 0;
  for (auto _ : state) {
    tokens += text::tokenize(c[i++ % c.size()].text).size();
  }
  state.counters["tokens/s"] = benchmark::Counter(static_cast<double>(tokens),
                                                  benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Tokenize);

void BM_BuildVocabulary(benchmark::State& state) {
  std::vector<features::Tokens> docs;
  for (const auto& r : bench_corpus().reviews()) docs.push_back(text::tokenize(r.text));
  for (auto _ : state) benchmark::DoNotOptimize(features::build_vocabulary(docs));
}
BENCHMARK(BM_BuildVocabulary);

void BM_TfidfVector(benchmark::State& state) {
  std::vector<features::Tokens> docs;
  for (const auto& r : bench_corpus().reviews()) docs.push_back(text::tokenize(r.text));
  const auto vocab = features::build_vocabulary(docs);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(features::tfidf_vector(docs[i++ % docs.size()], vocab));
  }
}
BENCHMARK(BM_TfidfVector);

void BM_FitRecipe(benchmark::State& state, const char* model) {
  Recipe r = default_recipe(model);
  r.train.max_epochs = 5;
  r.features.user_features = true;
  const auto rows = all_rows();
  for (auto _ : state) benchmark::DoNotOptimize(fit_recipe(r, bench_corpus(), rows, nullptr));
}
BENCHMARK_CAPTURE(BM_FitRecipe, logistic_regression, "logistic_regression")
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FitRecipe, linear_svm, "linear_svm")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FitRecipe, ffnn, "ffnn")->Unit(benchmark::kMillisecond);

void BM_ScoreReview(benchmark::State& state, const char* model) {
  Recipe r = default_recipe(model);
  r.train.max_epochs = 2;
  r.features.user_features = true;
  const TrainedModel m = fit_recipe(r, bench_corpus(), all_rows(), nullptr);
  const auto& c = bench_corpus();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(m.score(c[i++ % c.size()].text, {}));
}
BENCHMARK_CAPTURE(BM_ScoreReview, logistic_regression, "logistic_regression");
BENCHMARK_CAPTURE(BM_ScoreReview, ffnn, "ffnn");
BENCHMARK_CAPTURE(BM_ScoreReview, lstm, "lstm");

void BM_NeuralBatchGradient(benchmark::State& state) {
  models::NeuralArch arch = models::cnn_embedding_arch(5);
  arch.seq_len = 64;
  arch.embedding_dim = 50;
  models::Network net(arch, 1);
  Rng rng(1);
  std::vector<models::Example> xs(8);
  std::vector<corpus::Label> ys;
  for (auto& x : xs) {
    x.sequence = Matrix(64, 50);
    for (double& v : x.sequence.data) v = rng.uniform(-1, 1);
    x.sequence_length = 64;
    ys.push_back(ys.size() % 2 ? corpus::Label::kGenuine : corpus::Label::kDeceptive);
  }
  for (auto _ : state) {
    models::Gradients g = net.zero_gradients();
    benchmark::DoNotOptimize(models::batch_loss(net, xs, ys, 1e-4, &g));
  }
}
BENCHMARK(BM_NeuralBatchGradient)->Unit(benchmark::kMillisecond);

void BM_SerializeModel(benchmark::State& state) {
  Recipe r = default_recipe("logistic_regression");
  r.train.max_epochs = 1;
  const TrainedModel m = fit_recipe(r, bench_corpus(), all_rows(), nullptr);
  for (auto _ : state) benchmark::DoNotOptimize(deserialize_model(serialize_model(m)));
}
BENCHMARK(BM_SerializeModel);

}  // namespace
BENCHMARK_MAIN();
