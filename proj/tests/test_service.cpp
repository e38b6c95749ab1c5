#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "revdec/error.hpp"
#include "revdec/model_io.hpp"
#include "revdec/rng.hpp"
#include "revdec/service.hpp"
#include "revdec/synthetic.hpp"
#include "test_util.hpp"

using namespace revdec;
using namespace revdec::service;
using nlohmann::json;
using testutil::code_of;
using testutil::error_message;

namespace {

// Returns a fixed probability, or one chosen per text by a lookup function.
class StubScorer final : public Scorer {
 public:
  explicit StubScorer(double p, bool reviewer = false) : p_(p), reviewer_(reviewer) {}
  std::string kind() const override { return "stub"; }
  bool uses_reviewer_features() const override { return reviewer_; }
  models::Prediction score(std::string_view text, std::span<const double>) const override {
    models::Prediction pr;
    pr.p_deceptive = text.rfind("p=", 0) == 0 ? std::stod(std::string(text.substr(2))) : p_;
    pr.label = models::label_for(pr.p_deceptive);
    return pr;
  }

 private:
  double p_;
  bool reviewer_;
};

corpus::Review review(std::string id, std::string text, std::optional<corpus::Date> date = {},
                      std::optional<int> rating = {}, std::string reviewer = "u") {
  corpus::Review r;
  r.id = std::move(id);
  r.text = std::move(text);
  r.date = date;
  r.rating = rating;
  r.reviewer_id = std::move(reviewer);
  return r;
}

const TrainedModel& trained(bool user_features, const std::string& kind = "logistic_regression") {
  static std::map<std::pair<bool, std::string>, TrainedModel> cache;
  auto key = std::make_pair(user_features, kind);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  synthetic::YelpStyleConfig cfg;
  cfg.reviews_per_class = 30;
  cfg.vocabulary_size = 80;
  const corpus::Corpus c = synthetic::generate_yelp_style(cfg);
  std::vector<std::size_t> rows(c.size());
  std::iota(rows.begin(), rows.end(), 0);
  Recipe r = default_recipe(kind);
  r.features.user_features = user_features;
  r.arch.hidden1 = 4;
  r.arch.hidden2 = 3;
  r.train.max_epochs = 20;
  TrainedModel m = fit_recipe(r, c, rows, nullptr);
  m.meta.trained_on = "synthetic";
  m.meta.accuracy_report_ref = "reports/" + kind + ".json";
  return cache.emplace(key, std::move(m)).first->second;
}

std::shared_ptr<ModelRegistry> registry_with_models() {
  auto reg = std::make_shared<ModelRegistry>();
  reg->put("lr", std::make_shared<TrainedModelScorer>(trained(true)));
  reg->put("lr-text", std::make_shared<TrainedModelScorer>(trained(false)));
  reg->put("ffnn", std::make_shared<TrainedModelScorer>(trained(true, "ffnn")));
  return reg;
}

std::shared_ptr<Api> make_api() {
  return std::make_shared<Api>(registry_with_models(), std::make_shared<LocalFileProvider>(
                                                           testutil::data("businesses")));
}

}  // namespace

TEST_CASE("bucket boundaries") {
  for (int i = 0; i < 10; ++i) CHECK(bucket_of(0.05 + 0.1 * i) == static_cast<std::size_t>(i));
  CHECK(bucket_of(0.0) == 0);
  CHECK(bucket_of(0.1) == 1);
  CHECK(bucket_of(0.9) == 9);
  CHECK(bucket_of(1.0) == 9);
  CHECK(bucket_of(0.0999999) == 0);
}

TEST_CASE("one review per bucket") {
  StubScorer s(0.5);
  std::vector<corpus::Review> rs;
  for (int i = 0; i < 10; ++i) {
    rs.push_back(review("r" + std::to_string(i), "p=" + std::to_string(0.05 + 0.1 * i)));
  }
  const auto a = analyze_reviews(s, "stub", "b", rs);
  CHECK(a.n_reviews == 10);
  for (auto b : a.buckets) CHECK(b == 1);

  rs.push_back(review("top", "p=1.0"));
  CHECK(analyze_reviews(s, "stub", "b", rs).buckets[9] == 2);
}

TEST_CASE("buckets partition randomized analyses") {
  StubScorer s(0.5);
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<corpus::Review> rs;
    const std::size_t n = rng.index(40);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = rng.index(10) == 0 ? static_cast<double>(rng.index(11)) / 10.0 : rng.uniform();
      rs.push_back(review("r" + std::to_string(i), "p=" + std::to_string(p)));
    }
    const auto a = analyze_reviews(s, "stub", "b", rs);
    CHECK(a.n_reviews == n);
    CHECK(std::accumulate(a.buckets.begin(), a.buckets.end(), std::size_t{0}) == n);
    std::array<std::size_t, kBucketCount> recount{};
    for (const auto& p : a.predictions) ++recount[bucket_of(p.p_deceptive)];
    CHECK(recount == a.buckets);
  }
}

TEST_CASE("badge thresholds are strict") {
  features::ReviewerProfile at;
  at.max_reviews_one_day = 2;
  at.avg_review_length_chars = 1000;
  at.rating_stddev = 1.5;
  CHECK(assign_badges({{"a", at}}).empty());

  features::ReviewerProfile over = at;
  over.max_reviews_one_day = 3;
  over.avg_review_length_chars = 1001;
  over.rating_stddev = 1.6;
  const auto badges = assign_badges({{"b", over}});
  REQUIRE(badges.size() == 3);
  CHECK(badges[0] == Badge{"b", BadgeKind::kHighDailyVolume, 3});
  CHECK(badges[1] == Badge{"b", BadgeKind::kLongAvgReview, 1001});
  CHECK(badges[2] == Badge{"b", BadgeKind::kHighRatingDeviation, 1.6});
  CHECK(badge_indicator(BadgeKind::kHighDailyVolume) == "deceptive");
  CHECK(badge_indicator(BadgeKind::kLongAvgReview) == "genuine");
  CHECK(badge_indicator(BadgeKind::kHighRatingDeviation) == "genuine");

  BadgeThresholds loose;
  loose.max_reviews_one_day = 5;
  loose.avg_review_length_chars = 2000;
  loose.rating_stddev = 0.5;
  const auto custom = assign_badges({{"b", over}}, loose);
  REQUIRE(custom.size() == 1);
  CHECK(custom[0].kind == BadgeKind::kHighRatingDeviation);
}

TEST_CASE("monthly time series") {
  using corpus::Date;
  const std::vector<corpus::Review> rs{
      review("1", "x", Date{2021, 3, 31}, 2), review("2", "x", Date{2021, 1, 5}, 5),
      review("3", "x", Date{2021, 1, 20}, 3), review("4", "x", Date{2021, 2, 10}, 1),
      review("5", "x", Date{2021, 3, 1}, 4),  review("6", "x", Date{2021, 3, 15}, 5),
      review("7", "x", std::nullopt, 1),       review("8", "x", Date{2021, 2, 11})};
  const auto ts = monthly_timeseries(rs);
  REQUIRE(ts.size() == 3);
  CHECK(ts[0].period == Date{2021, 1, 1});
  CHECK(ts[0].count == 2);
  CHECK(*ts[0].mean_rating == doctest::Approx(4.0));
  CHECK(ts[1].period == Date{2021, 2, 1});
  CHECK(ts[1].count == 2);
  CHECK(*ts[1].mean_rating == doctest::Approx(1.0));
  CHECK(ts[2].count == 3);
  CHECK(*ts[2].mean_rating == doctest::Approx(11.0 / 3.0));
  CHECK(monthly_timeseries(std::vector<corpus::Review>{review("9", "x", Date{2020, 5, 5})})[0]
            .mean_rating == std::nullopt);
}

TEST_CASE("business analysis from the local provider") {
  auto reg = std::make_shared<ModelRegistry>();
  reg->put("stub", std::make_shared<StubScorer>(0.42));
  const LocalFileProvider provider(testutil::data("businesses"));
  const BusinessAnalysis a = analyze_business(*reg, provider, "cafe-1", "");
  CHECK(a.model == "stub");
  CHECK(a.n_reviews == 7);
  CHECK(a.buckets[4] == 7);
  REQUIRE(a.timeseries.size() == 3);
  CHECK(a.timeseries[0].count == 2);
  CHECK(*a.timeseries[0].mean_rating == doctest::Approx(4.0));
  CHECK(a.timeseries[1].count == 1);
  CHECK(*a.timeseries[1].mean_rating == doctest::Approx(1.0));
  CHECK(a.timeseries[2].count == 3);
  CHECK(*a.timeseries[2].mean_rating == doctest::Approx(11.0 / 3.0));
  // kim: ratings 5, 3, 1; lee: three reviews on one day; max: one long review.
  REQUIRE(a.badges.size() == 3);
  CHECK(a.badges[0].reviewer_id == "kim");
  CHECK(a.badges[0].kind == BadgeKind::kHighRatingDeviation);
  CHECK(a.badges[0].value == doctest::Approx(1.632993161855452));
  CHECK(a.badges[1] == Badge{"lee", BadgeKind::kHighDailyVolume, 3});
  CHECK(a.badges[2].reviewer_id == "max");
  CHECK(a.badges[2].kind == BadgeKind::kLongAvgReview);
  CHECK(a.badges[2].value == 1203);

  const BusinessAnalysis empty = analyze_business(*reg, provider, "empty", "");
  CHECK(empty.n_reviews == 0);
  CHECK(empty.timeseries.empty());
  CHECK(std::accumulate(empty.buckets.begin(), empty.buckets.end(), std::size_t{0}) == 0);

  CHECK(code_of([&] { analyze_business(*reg, provider, "nowhere", ""); }) ==
        ErrorCode::kNotFound);
  CHECK(code_of([&] { analyze_business(*reg, provider, "../etc/passwd", ""); }) ==
        ErrorCode::kInvalidArgument);
  const std::string msg = error_message([&] { analyze_business(*reg, provider, "broken", ""); });
  CHECK(msg.find("local provider") != std::string::npos);
  CHECK(code_of([&] { analyze_business(*reg, provider, "broken", ""); }) ==
        ErrorCode::kProvider);
}

TEST_CASE("registry lookups and defaults") {
  ModelRegistry reg;
  CHECK(code_of([&] { reg.get(""); }) == ErrorCode::kUnknownModel);
  reg.put("beta", std::make_shared<StubScorer>(0.1));
  reg.put("alpha", std::make_shared<StubScorer>(0.9));
  CHECK(reg.default_name() == "beta");
  CHECK(reg.get("")->score("x", {}).p_deceptive == 0.1);
  reg.set_default("alpha");
  CHECK(reg.get("")->score("x", {}).p_deceptive == 0.9);
  const std::string msg = error_message([&] { reg.get("gamma"); });
  CHECK(msg.find("gamma") != std::string::npos);
  CHECK(msg.find("alpha") != std::string::npos);
  CHECK(msg.find("beta") != std::string::npos);
  CHECK(code_of([&] { reg.set_default("gamma"); }) == ErrorCode::kUnknownModel);
  CHECK(reg.list().size() == 2);
  CHECK(reg.remove("alpha"));
  CHECK_FALSE(reg.remove("alpha"));
  CHECK(reg.default_name() == "beta");
}

TEST_CASE("hot swap keeps in-flight requests on their model") {
  ModelRegistry reg;
  reg.put("m", std::make_shared<StubScorer>(0.2));
  const auto held = reg.get("m");
  reg.put("m", std::make_shared<StubScorer>(0.8));
  CHECK(held->score("x", {}).p_deceptive == 0.2);
  CHECK(reg.get("m")->score("x", {}).p_deceptive == 0.8);

  // Readers racing a writer only ever see one of the two complete models.
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&] {
      while (!done) {
        const double p = reg.get("m")->score("x", {}).p_deceptive;
        if (p != 0.2 && p != 0.8) ++bad;
      }
    });
  }
  for (int i = 0; i < 2000; ++i) reg.put("m", std::make_shared<StubScorer>(i % 2 ? 0.2 : 0.8));
  done = true;
  for (auto& t : readers) t.join();
  CHECK(bad == 0);
}

TEST_CASE("registry loads model files by name") {
  testutil::TempDir dir;
  save_model(trained(false), dir / "plain.rvm");
  save_model(trained(true), dir / "with-user.rvm");
  testutil::write_file(dir / "notes.txt", "ignored");
  ModelRegistry reg;
  const auto names = reg.load_directory(dir.path());
  CHECK(names == std::vector<std::string>{"plain", "with-user"});
  CHECK(reg.get("with-user")->uses_reviewer_features());
  CHECK(reg.list()[0].trained_on == "synthetic");
}

TEST_CASE("scoring reviews") {
  const auto reg = registry_with_models();
  const auto a = score_review(*reg, "great stay lovely room", std::nullopt, "lr");
  const auto b = score_review(*reg, "great stay lovely room", std::nullopt, "lr");
  CHECK(a.prediction.p_deceptive == b.prediction.p_deceptive);
  CHECK(a.reviewer_features_defaulted);
  CHECK(a.model == "lr");

  const ReviewerStats stats{3, 200, 0.5, 1.0, 0.0};
  const auto c = score_review(*reg, "great stay lovely room", stats, "lr");
  CHECK_FALSE(c.reviewer_features_defaulted);

  const auto d = score_review(*reg, "great stay", std::nullopt, "lr-text");
  CHECK_FALSE(d.reviewer_features_defaulted);

  // A missing reviewer scores like an explicit all-zero scaled vector.
  const auto& model = trained(true);
  const auto neutral = model.pipeline.vectorize("great stay lovely room", {});
  CHECK(neutral.user == std::vector<double>(features::kReviewerFeatureCount, 0.0));

  CHECK(code_of([&] { score_review(*reg, "   ", std::nullopt, "lr"); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { score_review(*reg, "text", std::nullopt, "nope"); }) ==
        ErrorCode::kUnknownModel);

  for (const auto& text : {"great", "the room was awful and dirty", "x y z"}) {
    const auto r = score_review(*reg, text, stats, "lr");
    REQUIRE(r.bias.has_value());
    double sum = *r.bias;
    for (const auto& cn : r.prediction.contributions) sum += cn.value;
    const double p = r.prediction.p_deceptive;
    CHECK(std::abs(sum - std::log(p / (1 - p))) < 1e-6);
  }
}

TEST_CASE("error codes map to HTTP statuses") {
  CHECK(http_status_for(ErrorCode::kInvalidArgument) == 400);
  CHECK(http_status_for(ErrorCode::kSchema) == 400);
  CHECK(http_status_for(ErrorCode::kUnknownModel) == 404);
  CHECK(http_status_for(ErrorCode::kNotFound) == 404);
  CHECK(http_status_for(ErrorCode::kProvider) == 502);
  CHECK(http_status_for(ErrorCode::kDivergence) == 500);
}

TEST_CASE("API responses keep one shape across model kinds") {
  const auto api = make_api();
  const json lr = json::parse(api->score(R"({"text":"lovely room","model":"lr"})").body);
  const json nn = json::parse(api->score(R"({"text":"lovely room","model":"ffnn"})").body);
  for (const json* j : {&lr, &nn}) {
    for (const char* key : {"p_deceptive", "label", "score", "bias", "contributions", "model",
                            "reviewer_features_defaulted"}) {
      CHECK(j->contains(key));
    }
  }
  CHECK(nn.at("contributions").empty());
  CHECK(nn.at("bias").is_null());
  CHECK(lr.at("bias").is_number());

  CHECK(api->score("not json").status == 400);
  CHECK(api->score(R"({"text":""})").status == 400);
  CHECK(api->score(R"({"text":"ok","reviewer":{"max_reviews_one_day":1}})").status == 400);
  const auto unknown = api->score(R"({"text":"ok","model":"nope"})");
  CHECK(unknown.status == 404);
  CHECK(json::parse(unknown.body).at("error").at("code") == "UnknownModel");
  CHECK(api->analyze(R"({"business_id":"broken"})").status == 502);
  CHECK(api->analyze(R"({"business_id":"nowhere"})").status == 404);
  CHECK(api->analyze(R"({})").status == 400);
}

TEST_CASE("service configuration from file and environment") {
  testutil::TempDir dir;
  testutil::write_file(dir / "svc.json", R"({"host":"0.0.0.0","port":9000,"model_dir":"/m",
      "default_model":"lr","badges":{"max_reviews_one_day":4,"rating_stddev":2.0}})");
  ServiceConfig c = load_service_config(dir / "svc.json");
  CHECK(c.host == "0.0.0.0");
  CHECK(c.port == 9000);
  CHECK(c.model_dir == "/m");
  CHECK(c.default_model == "lr");
  CHECK(c.thresholds.max_reviews_one_day == 4);
  CHECK(c.thresholds.avg_review_length_chars == 1000);
  CHECK(c.thresholds.rating_stddev == 2.0);

  ::setenv("REVDEC_PORT", "9100", 1);
  ::setenv("REVDEC_BADGE_LENGTH", "1500", 1);
  c = load_service_config(dir / "svc.json");
  ::unsetenv("REVDEC_PORT");
  ::unsetenv("REVDEC_BADGE_LENGTH");
  CHECK(c.port == 9100);
  CHECK(c.thresholds.avg_review_length_chars == 1500);

  CHECK(load_service_config(std::nullopt).port == 8080);
  CHECK(code_of([&] { load_service_config(dir / "missing.json"); }) == ErrorCode::kNotFound);
}

TEST_CASE("HTTP endpoints") {
  const auto api = make_api();
  HttpServer server(api);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread loop([&] { server.listen(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);

  auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body).at("status") == "ok");

  auto models = client.Get("/api/v1/models");
  REQUIRE(models);
  const json list = json::parse(models->body);
  REQUIRE(list.size() == 3);
  for (const auto& m : list) {
    CHECK(m.contains("name"));
    CHECK(m.contains("kind"));
    CHECK(m.contains("trained_on"));
    CHECK(m.contains("accuracy_report_ref"));
  }

  auto scored = client.Post("/api/v1/score",
                            R"({"text":"The room was lovely","model":"lr","reviewer":{
                               "max_reviews_one_day":1,"avg_review_length_chars":300,
                               "rating_stddev":1,"pct_positive":0.5,"pct_negative":0.5}})",
                            "application/json");
  REQUIRE(scored);
  CHECK(scored->status == 200);
  const json s = json::parse(scored->body);
  double sum = s.at("bias").get<double>();
  for (const auto& c : s.at("contributions")) sum += c.at("value").get<double>();
  const double p = s.at("p_deceptive").get<double>();
  CHECK(std::abs(sum - std::log(p / (1 - p))) < 1e-6);
  CHECK(s.at("reviewer_features_defaulted") == false);

  auto analyzed =
      client.Post("/api/v1/business/analyze", R"({"business_id":"cafe-1"})", "application/json");
  REQUIRE(analyzed);
  CHECK(analyzed->status == 200);
  const json a = json::parse(analyzed->body);
  CHECK(a.at("n_reviews") == 7);
  CHECK(a.at("buckets").size() == 10);
  CHECK(a.at("timeseries").size() == 3);
  CHECK(a.at("timeseries")[0].at("period") == "2021-01-01");
  CHECK(a.at("badges").size() == 3);
  CHECK(a.at("predictions").size() == 7);

  auto missing = client.Post("/api/v1/score", R"({"text":"x","model":"nope"})",
                             "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body).at("error").at("message").get<std::string>().find("lr") !=
        std::string::npos);

  auto notfound = client.Get("/api/v1/unknown");
  REQUIRE(notfound);
  CHECK(notfound->status == 404);

  server.stop();
  loop.join();
}
