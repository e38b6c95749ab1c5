#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "revdec/corpus.hpp"
#include "revdec/error.hpp"
#include "revdec/features.hpp"
#include "revdec/models/types.hpp"
#include "revdec/recipe.hpp"

namespace revdec::service {

// Anything that can score a review. The registry stores scorers, so models
// that are not built by this library can be registered alongside ours.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::string kind() const = 0;
  virtual bool uses_reviewer_features() const = 0;
  // Empty raw_reviewer means "no reviewer statistics available".
  virtual models::Prediction score(std::string_view text,
                                   std::span<const double> raw_reviewer) const = 0;
  // Bias term for linear scorers (contributions + bias = score).
  virtual std::optional<double> bias() const { return std::nullopt; }
  virtual std::string trained_on() const { return ""; }
  virtual std::string accuracy_report_ref() const { return ""; }
};

class TrainedModelScorer final : public Scorer {
 public:
  explicit TrainedModelScorer(TrainedModel model) : model_(std::move(model)) {}

  std::string kind() const override { return std::string(model_.kind()); }
  bool uses_reviewer_features() const override { return model_.pipeline.config().user_features; }
  models::Prediction score(std::string_view text,
                           std::span<const double> raw_reviewer) const override {
    return model_.score(text, raw_reviewer);
  }
  std::optional<double> bias() const override;
  std::string trained_on() const override { return model_.meta.trained_on; }
  std::string accuracy_report_ref() const override { return model_.meta.accuracy_report_ref; }

  const TrainedModel& model() const { return model_; }

 private:
  TrainedModel model_;
};

struct ModelInfo {
  std::string name;
  std::string kind;
  std::string trained_on;
  std::string accuracy_report_ref;
};

// Thread-safe name -> scorer map. Lookups hand out shared ownership, so a
// request keeps the scorer it started with even if the entry is replaced.
class ModelRegistry {
 public:
  // Inserts or atomically replaces. The first model added becomes the default.
  void put(const std::string& name, std::shared_ptr<const Scorer> scorer);
  bool remove(const std::string& name);
  // Empty name selects the default. Throws UnknownModel naming the
  // available models.
  std::shared_ptr<const Scorer> get(std::string_view name) const;
  void set_default(const std::string& name);
  std::string default_name() const;
  std::vector<ModelInfo> list() const;
  std::size_t size() const;

  // Loads every *.rvm file in dir, named by file stem. Returns the names.
  std::vector<std::string> load_directory(const std::filesystem::path& dir);

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const Scorer>, std::less<>> models_;
  std::string default_;
};

// The five behavioural statistics, in reviewer feature order.
struct ReviewerStats {
  double max_reviews_one_day = 0;
  double avg_review_length_chars = 0;
  double rating_stddev = 0;
  double pct_positive = 0;
  double pct_negative = 0;

  std::vector<double> to_vector() const;
};

struct ScoreResult {
  models::Prediction prediction;
  std::optional<double> bias;
  std::string model;
  bool reviewer_features_defaulted = false;
};

// Throws InvalidArgument on blank text, UnknownModel on a bad name.
ScoreResult score_review(const ModelRegistry& registry, std::string_view text,
                         const std::optional<ReviewerStats>& reviewer,
                         std::string_view model_name);

enum class BadgeKind { kHighDailyVolume, kLongAvgReview, kHighRatingDeviation };
std::string_view badge_kind_name(BadgeKind kind);
// "deceptive" or "genuine".
std::string_view badge_indicator(BadgeKind kind);

struct BadgeThresholds {
  double max_reviews_one_day = 2;
  double avg_review_length_chars = 1000;
  double rating_stddev = 1.5;
};

struct Badge {
  std::string reviewer_id;
  BadgeKind kind;
  double value = 0;

  friend bool operator==(const Badge&, const Badge&) = default;
};

// Strict inequalities; output ordered by reviewer id, then kind.
std::vector<Badge> assign_badges(const std::map<std::string, features::ReviewerProfile>& profiles,
                                 const BadgeThresholds& thresholds = {});

inline constexpr std::size_t kBucketCount = 10;
// [0,0.1), ..., [0.8,0.9), [0.9,1.0]
std::size_t bucket_of(double p_deceptive);

struct TimePoint {
  corpus::Date period;  // first day of the month
  std::size_t count = 0;
  std::optional<double> mean_rating;
};

struct ReviewPrediction {
  std::string review_id;
  std::optional<std::string> reviewer_id;
  double p_deceptive = 0;
  corpus::Label label = corpus::Label::kUnknown;
};

struct BusinessAnalysis {
  std::string business_id;
  std::string model;
  std::size_t n_reviews = 0;
  std::array<std::size_t, kBucketCount> buckets{};
  std::vector<Badge> badges;
  std::vector<TimePoint> timeseries;
  std::vector<ReviewPrediction> predictions;
};

// Source of a business's reviews.
class ReviewProvider {
 public:
  virtual ~ReviewProvider() = default;
  virtual std::string name() const = 0;
  // Throws NotFound for unknown businesses, Provider for upstream failures.
  virtual std::vector<corpus::Review> fetch(std::string_view business_id) const = 0;
};

// Reads <dir>/<business_id>.jsonl in the review record format.
class LocalFileProvider final : public ReviewProvider {
 public:
  explicit LocalFileProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::string name() const override { return "local"; }
  std::vector<corpus::Review> fetch(std::string_view business_id) const override;

 private:
  std::filesystem::path dir_;
};

// Monthly review counts and mean ratings of dated reviews, oldest first.
std::vector<TimePoint> monthly_timeseries(std::span<const corpus::Review> reviews);

BusinessAnalysis analyze_reviews(const Scorer& scorer, std::string_view model_name,
                                 std::string_view business_id,
                                 std::span<const corpus::Review> reviews,
                                 const BadgeThresholds& thresholds = {});

BusinessAnalysis analyze_business(const ModelRegistry& registry, const ReviewProvider& provider,
                                  std::string_view business_id, std::string_view model_name,
                                  const BadgeThresholds& thresholds = {});

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path model_dir = "models";
  std::string default_model;
  BadgeThresholds thresholds;
  std::string provider = "local";
  std::filesystem::path provider_dir = "businesses";
};

// Reads a JSON config file (all keys optional), then applies REVDEC_HOST,
// REVDEC_PORT, REVDEC_MODEL_DIR, REVDEC_DEFAULT_MODEL, REVDEC_PROVIDER,
// REVDEC_PROVIDER_DIR, REVDEC_BADGE_DAILY, REVDEC_BADGE_LENGTH and
// REVDEC_BADGE_STDDEV from the environment.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path);

struct HttpResult {
  int status = 200;
  std::string body;  // JSON
};

// Request handling independent of the HTTP transport.
class Api {
 public:
  Api(std::shared_ptr<ModelRegistry> registry, std::shared_ptr<const ReviewProvider> provider,
      BadgeThresholds thresholds = {})
      : registry_(std::move(registry)), provider_(std::move(provider)), thresholds_(thresholds) {}

  HttpResult score(std::string_view body) const;
  HttpResult analyze(std::string_view body) const;
  HttpResult models() const;
  HttpResult health() const;

  ModelRegistry& registry() { return *registry_; }

 private:
  std::shared_ptr<ModelRegistry> registry_;
  std::shared_ptr<const ReviewProvider> provider_;
  BadgeThresholds thresholds_;
};

int http_status_for(ErrorCode code);

// Serves the API over HTTP until stop() is called.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<Api> api);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // port 0 binds an ephemeral port. Returns the bound port; throws on failure.
  int bind(const std::string& host, int port);
  void listen();  // blocks
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace revdec::service
