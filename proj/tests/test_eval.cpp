#include "doctest.h"

#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "revdec/error.hpp"
#include "revdec/eval.hpp"
#include "revdec/rng.hpp"
#include "revdec/synthetic.hpp"
#include "test_util.hpp"

using namespace revdec;
using namespace revdec::eval;
using corpus::Review;
using testutil::code_of;
using testutil::error_message;

namespace {

constexpr Label D = Label::kDeceptive;
constexpr Label G = Label::kGenuine;

Review make(std::string id, std::string text, Label label) {
  Review r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.label = label;
  return r;
}

corpus::Corpus small_synthetic(std::uint64_t seed = 5) {
  synthetic::YelpStyleConfig cfg;
  cfg.reviews_per_class = 20;
  cfg.vocabulary_size = 80;
  cfg.seed = seed;
  return synthetic::generate_yelp_style(cfg);
}

// 20 reviews in pairs sharing their filler words; the deceptive one of each
// pair, and only it, contains "scam".
corpus::Corpus token_fixture() {
  const char* filler[] = {"room", "hotel", "stay", "staff", "bed", "view", "pool", "lobby"};
  Rng rng(13);
  std::vector<Review> rs;
  std::string t;
  for (int i = 0; i < 20; ++i) {
    const bool dec = i % 2 == 0;
    if (dec) {
      t.clear();
      for (int k = 0; k < 4; ++k) t += std::string(filler[rng.index(8)]) + " ";
    }
    rs.push_back(make("t" + std::to_string(i), dec ? t + "scam" : t, dec ? D : G));
  }
  return corpus::Corpus(std::move(rs));
}

Recipe fast_lr() {
  Recipe r = default_recipe("logistic_regression");
  return r;
}

}  // namespace

TEST_CASE("confusion matrix examples") {
  const std::vector<Label> gold{D, D, D, D, D, D, G, G, G, G};
  CHECK(confusion_matrix(gold, gold) == Confusion{6, 0, 4, 0});
  const std::vector<Label> all_g(10, G);
  CHECK(confusion_matrix(all_g, gold) == Confusion{0, 0, 4, 6});

  const std::vector<Label> pred8{D, D, G, G, D, G, G, D};
  const std::vector<Label> gold8{D, G, G, D, D, G, D, D};
  const Confusion c = confusion_matrix(pred8, gold8);
  CHECK(c == Confusion{3, 1, 2, 2});
  CHECK(c.total() == 8);
  CHECK(c.accuracy() == doctest::Approx(5.0 / 8.0));

  CHECK(code_of([&] { confusion_matrix(pred8, gold); }) == ErrorCode::kShape);
}

TEST_CASE("error analysis with an empty partition") {
  const std::vector<Review> rs{make("a", "One two three. Four five six.", D)};
  const std::vector<Label> gold{D};
  const ErrorStats s = error_analysis(gold, gold, rs);
  CHECK(s.avg_words_per_sentence_correct == 3.0);
  CHECK(s.avg_review_words_correct == 6.0);
  CHECK(s.avg_word_length_correct == doctest::Approx(22.0 / 6.0));
  CHECK_FALSE(s.avg_words_per_sentence_incorrect.has_value());
  CHECK_FALSE(s.avg_review_words_incorrect.has_value());
  CHECK_FALSE(s.avg_word_length_incorrect.has_value());
}

TEST_CASE("error analysis on a four-review fixture") {
  const std::vector<Review> rs{
      make("1", "The room was clean. Staff were nice and friendly.", D),
      make("2", "Great stay.", G),
      make("3", "Bad. Very bad hotel!", D),
      make("4", "I would not return", G),
  };
  const std::vector<Label> gold{D, G, D, G};
  const std::vector<Label> pred{D, G, G, D};
  const ErrorStats s = error_analysis(pred, gold, rs);
  // Correct: sentences of 4, 5 and 2 words; 9 and 2 words; 48 characters.
  CHECK(*s.avg_words_per_sentence_correct == doctest::Approx(11.0 / 3.0));
  CHECK(*s.avg_review_words_correct == doctest::Approx(5.5));
  CHECK(*s.avg_word_length_correct == doctest::Approx(48.0 / 11.0));
  // Incorrect: sentences of 1, 3 and 4 words; 4 and 4 words; 30 characters.
  CHECK(*s.avg_words_per_sentence_incorrect == doctest::Approx(8.0 / 3.0));
  CHECK(*s.avg_review_words_incorrect == doctest::Approx(4.0));
  CHECK(*s.avg_word_length_incorrect == doctest::Approx(30.0 / 8.0));

  CHECK(code_of([&] { error_analysis(pred, gold, std::span(rs).first(3)); }) ==
        ErrorCode::kShape);
}

TEST_CASE("constant predictor on balanced data") {
  const corpus::Corpus c = small_synthetic();
  const EvalReport r = run_protocol(c, default_recipe("constant"), Protocol::kfold(5, 1));
  CHECK(r.mean_accuracy == doctest::Approx(0.5));
  CHECK(r.confusion.tn == 0);
  CHECK(r.confusion.fn == 0);
}

TEST_CASE("a single separating token is learned perfectly") {
  const EvalReport r = run_protocol(token_fixture(), fast_lr(), Protocol::kfold(5, 2));
  CHECK(r.mean_accuracy == 1.0);
  CHECK(r.confusion == Confusion{10, 0, 10, 0});
}

TEST_CASE("report aggregates") {
  const corpus::Corpus c = small_synthetic();
  for (const Protocol p : {Protocol::kfold(5, 3), Protocol::kfold(4, 9), Protocol::bootstrap(10, 3)}) {
    CAPTURE(p.name());
    const EvalReport r = run_protocol(c, fast_lr(), p);
    CHECK(r.splits.size() == p.count);
    const auto acc = r.per_split_accuracy();
    const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
    CHECK(r.mean_accuracy == doctest::Approx(mean).epsilon(1e-12));
    Confusion sum;
    std::size_t n_test = 0;
    for (const auto& s : r.splits) {
      sum += s.confusion;
      n_test += s.n_test;
      CHECK(s.accuracy == doctest::Approx(s.confusion.accuracy()));
    }
    CHECK(sum == r.confusion);
    CHECK(r.confusion.total() == n_test);
    if (p.kind == Protocol::Kind::kKFold) {
      CHECK(n_test == c.size());
      // Folds have equal size here, so pooled and mean accuracy agree.
      CHECK(r.confusion.accuracy() == doctest::Approx(r.mean_accuracy).epsilon(0.05));
    }
  }
  CHECK(Protocol::kfold(5, 1).name() == "kfold-5");
  CHECK(Protocol::bootstrap(10, 1).name() == "bootstrap-10");
}

TEST_CASE("test texts never reach the trained parameters") {
  const corpus::Corpus c = small_synthetic(8);
  for (const Protocol p : {Protocol::kfold(5, 4), Protocol::bootstrap(3, 4)}) {
    CAPTURE(p.name());
    const auto splits = p.kind == Protocol::Kind::kKFold
                            ? corpus::stratified_kfold(c.labels(), p.count, p.seed)
                            : corpus::bootstrap_splits(c.labels(), p.count, p.seed);
    std::vector<Review> rs = c.reviews();
    for (std::size_t i : splits[0].test_idx) rs[i].text = "qzxv wvvq zzqx";
    const corpus::Corpus scrambled(std::move(rs));

    const Recipe recipe = fast_lr();
    const EvalReport a = run_protocol(c, recipe, p);
    const EvalReport b = run_protocol(scrambled, recipe, p);
    CHECK(a.splits[0].fingerprint == b.splits[0].fingerprint);
    CHECK(a.splits[0].n_test == b.splits[0].n_test);
    for (std::size_t s = 1; s < a.splits.size(); ++s) {
      CHECK(a.splits[s].fingerprint != b.splits[s].fingerprint);
    }
  }
}

TEST_CASE("reports are deterministic and independent of thread count") {
  const corpus::Corpus c = small_synthetic(6);
  Recipe recipe = default_recipe("ffnn");
  recipe.arch.hidden1 = 4;
  recipe.arch.hidden2 = 3;
  recipe.train.max_epochs = 4;
  const Protocol p = Protocol::kfold(3, 7);
  const std::string one = report_to_json(run_protocol(c, recipe, p));
  CHECK(one == report_to_json(run_protocol(c, recipe, p)));
  EvalOptions opts;
  opts.threads = 3;
  CHECK(one == report_to_json(run_protocol(c, recipe, p, opts)));
  const std::string other_seed = report_to_json(run_protocol(c, recipe, Protocol::kfold(3, 8)));
  CHECK(one != other_seed);
}

TEST_CASE("report record mirrors the report") {
  const EvalReport r = run_protocol(token_fixture(), fast_lr(), Protocol::bootstrap(4, 2));
  const auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j.at("protocol") == "bootstrap-4");
  CHECK(j.at("model") == "logistic_regression");
  CHECK(j.at("per_split_accuracy").size() == 4);
  CHECK(j.at("mean_accuracy").get<double>() == r.mean_accuracy);
  CHECK(j.at("confusion").at("tp").get<std::size_t>() == r.confusion.tp);
  const bool any_error = r.confusion.fp + r.confusion.fn > 0;
  CHECK(j.at("error_stats").at("avg_review_words_incorrect").is_null() == !any_error);
  CHECK(j.at("error_stats").at("avg_review_words_correct").is_number());
  const std::string table = report_table(r);
  CHECK(table.find("bootstrap 4") != std::string::npos);
  CHECK(table.find("mean") != std::string::npos);
}

TEST_CASE("training failures name the split") {
  std::vector<Review> rs = token_fixture().reviews();
  rs[0].label = Label::kUnknown;
  CHECK(code_of([&] { run_protocol(corpus::Corpus(rs), fast_lr(), Protocol::kfold(5, 1)); }) ==
        ErrorCode::kInvalidArgument);

  Recipe bad = fast_lr();
  bad.features.representation = Representation::kCounts;
  bad.train.learning_rate = 1e308;
  const std::string msg =
      error_message([&] { run_protocol(token_fixture(), bad, Protocol::kfold(5, 1)); });
  CHECK(msg.rfind("fold 1/5: ", 0) == 0);
}
