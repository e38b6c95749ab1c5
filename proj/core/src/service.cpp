#include "revdec/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "revdec/error.hpp"
#include "revdec/model_io.hpp"
#include "revdec/pipeline.hpp"
#include "revdec/text.hpp"

namespace revdec::service {

using nlohmann::json;

std::optional<double> TrainedModelScorer::bias() const {
  if (const auto* lin = std::get_if<models::LinearModel>(&model_.model)) return lin->bias;
  return std::nullopt;
}

void ModelRegistry::put(const std::string& name, std::shared_ptr<const Scorer> scorer) {
  if (name.empty()) throw Error(ErrorCode::kInvalidArgument, "model name must not be empty");
  if (!scorer) throw Error(ErrorCode::kInvalidArgument, "model " + name + " has no scorer");
  std::lock_guard lock(mutex_);
  models_[name] = std::move(scorer);
  if (default_.empty()) default_ = name;
}

bool ModelRegistry::remove(const std::string& name) {
  std::lock_guard lock(mutex_);
  if (models_.erase(name) == 0) return false;
  if (default_ == name) default_ = models_.empty() ? "" : models_.begin()->first;
  return true;
}

std::shared_ptr<const Scorer> ModelRegistry::get(std::string_view name) const {
  std::lock_guard lock(mutex_);
  const std::string_view key = name.empty() ? std::string_view(default_) : name;
  if (auto it = models_.find(key); it != models_.end()) return it->second;
  std::string available;
  for (const auto& [n, _] : models_) available += (available.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::kUnknownModel,
              "unknown model '" + std::string(key) + "'; available: [" + available + "]");
}

void ModelRegistry::set_default(const std::string& name) {
  std::lock_guard lock(mutex_);
  if (!models_.contains(name)) {
    throw Error(ErrorCode::kUnknownModel, "cannot make unknown model '" + name + "' the default");
  }
  default_ = name;
}

std::string ModelRegistry::default_name() const {
  std::lock_guard lock(mutex_);
  return default_;
}

std::vector<ModelInfo> ModelRegistry::list() const {
  std::lock_guard lock(mutex_);
  std::vector<ModelInfo> out;
  for (const auto& [name, s] : models_) {
    out.push_back({name, s->kind(), s->trained_on(), s->accuracy_report_ref()});
  }
  return out;
}

std::size_t ModelRegistry::size() const {
  std::lock_guard lock(mutex_);
  return models_.size();
}

std::vector<std::string> ModelRegistry::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kNotFound, "model directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".rvm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::string> names;
  for (const auto& f : files) {
    put(f.stem().string(), std::make_shared<TrainedModelScorer>(load_model(f)));
    names.push_back(f.stem().string());
  }
  return names;
}

std::vector<double> ReviewerStats::to_vector() const {
  return {max_reviews_one_day, avg_review_length_chars, rating_stddev, pct_positive, pct_negative};
}

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

ScoreResult score_review(const ModelRegistry& registry, std::string_view text,
                         const std::optional<ReviewerStats>& reviewer,
                         std::string_view model_name) {
  if (is_blank(text)) throw Error(ErrorCode::kInvalidArgument, "text: must not be empty");
  const auto scorer = registry.get(model_name);
  ScoreResult r;
  r.model = model_name.empty() ? registry.default_name() : std::string(model_name);
  const std::vector<double> raw = reviewer ? reviewer->to_vector() : std::vector<double>{};
  r.reviewer_features_defaulted = scorer->uses_reviewer_features() && !reviewer;
  r.prediction = scorer->score(text, raw);
  r.bias = scorer->bias();
  return r;
}

std::string_view badge_kind_name(BadgeKind kind) {
  switch (kind) {
    case BadgeKind::kHighDailyVolume: return "HighDailyVolume";
    case BadgeKind::kLongAvgReview: return "LongAvgReview";
    case BadgeKind::kHighRatingDeviation: return "HighRatingDeviation";
  }
  return "?";
}

std::string_view badge_indicator(BadgeKind kind) {
  return kind == BadgeKind::kHighDailyVolume ? "deceptive" : "genuine";
}

std::vector<Badge> assign_badges(const std::map<std::string, features::ReviewerProfile>& profiles,
                                 const BadgeThresholds& t) {
  std::vector<Badge> out;
  for (const auto& [id, p] : profiles) {
    const double daily = static_cast<double>(p.max_reviews_one_day);
    if (daily > t.max_reviews_one_day) out.push_back({id, BadgeKind::kHighDailyVolume, daily});
    if (p.avg_review_length_chars > t.avg_review_length_chars) {
      out.push_back({id, BadgeKind::kLongAvgReview, p.avg_review_length_chars});
    }
    if (p.rating_stddev > t.rating_stddev) {
      out.push_back({id, BadgeKind::kHighRatingDeviation, p.rating_stddev});
    }
  }
  return out;
}

std::size_t bucket_of(double p) {
  if (!(p > 0)) return 0;
  return std::min<std::size_t>(static_cast<std::size_t>(std::floor(p * 10.0)), kBucketCount - 1);
}

std::vector<corpus::Review> LocalFileProvider::fetch(std::string_view business_id) const {
  const bool safe = !business_id.empty() && business_id.front() != '.' &&
                    std::all_of(business_id.begin(), business_id.end(), [](unsigned char c) {
                      return std::isalnum(c) || c == '-' || c == '_' || c == '.';
                    });
  if (!safe) {
    throw Error(ErrorCode::kInvalidArgument,
                "business_id: must be non-empty and contain only [A-Za-z0-9._-]");
  }
  const auto path = dir_ / (std::string(business_id) + ".jsonl");
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kNotFound,
                "local provider: no reviews for business '" + std::string(business_id) + "'");
  }
  try {
    return corpus::parse_reviews_records(path).reviews();
  } catch (const Error& e) {
    throw Error(ErrorCode::kProvider, "local provider: " + std::string(e.what()));
  }
}

std::vector<TimePoint> monthly_timeseries(std::span<const corpus::Review> reviews) {
  struct Acc {
    std::size_t count = 0, rated = 0;
    double rating_sum = 0;
  };
  std::map<corpus::Date, Acc> months;
  for (const auto& r : reviews) {
    if (!r.date) continue;
    Acc& a = months[corpus::Date{r.date->year, r.date->month, 1}];
    ++a.count;
    if (r.rating) {
      ++a.rated;
      a.rating_sum += *r.rating;
    }
  }
  std::vector<TimePoint> out;
  for (const auto& [d, a] : months) {
    TimePoint tp{d, a.count, std::nullopt};
    if (a.rated > 0) tp.mean_rating = a.rating_sum / static_cast<double>(a.rated);
    out.push_back(tp);
  }
  return out;
}

BusinessAnalysis analyze_reviews(const Scorer& scorer, std::string_view model_name,
                                 std::string_view business_id,
                                 std::span<const corpus::Review> reviews,
                                 const BadgeThresholds& thresholds) {
  BusinessAnalysis a;
  a.business_id = business_id;
  a.model = model_name;
  a.n_reviews = reviews.size();
  const corpus::Corpus c(std::vector<corpus::Review>(reviews.begin(), reviews.end()));
  const auto profiles = features::build_reviewer_profiles(c);
  for (const auto& r : reviews) {
    const auto raw = scorer.uses_reviewer_features() ? raw_user_features(r, profiles)
                                                     : std::vector<double>{};
    const auto p = scorer.score(r.text, raw);
    ++a.buckets[bucket_of(p.p_deceptive)];
    a.predictions.push_back({r.id, r.reviewer_id, p.p_deceptive, p.label});
  }
  a.badges = assign_badges(profiles, thresholds);
  a.timeseries = monthly_timeseries(reviews);
  return a;
}

BusinessAnalysis analyze_business(const ModelRegistry& registry, const ReviewProvider& provider,
                                  std::string_view business_id, std::string_view model_name,
                                  const BadgeThresholds& thresholds) {
  const auto scorer = registry.get(model_name);
  const std::string name = model_name.empty() ? registry.default_name() : std::string(model_name);
  const auto reviews = provider.fetch(business_id);
  return analyze_reviews(*scorer, name, business_id, reviews, thresholds);
}

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, where + ": invalid value for '" + key + "'");
  }
}

void env_string(const char* name, std::string& out) {
  if (const char* v = std::getenv(name)) out = v;
}

void env_double(const char* name, double& out) {
  if (const char* v = std::getenv(name)) {
    char* end = nullptr;
    const double d = std::strtod(v, &end);
    if (end == v || *end != '\0') {
      throw Error(ErrorCode::kInvalidArgument, std::string(name) + ": not a number");
    }
    out = d;
  }
}

}  // namespace

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path) {
  ServiceConfig c;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorCode::kNotFound, "config file not found: " + path->string());
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, path->string() + ": " + e.what());
    }
    const std::string where = path->string();
    read_key(j, "host", c.host, where);
    read_key(j, "port", c.port, where);
    std::string s;
    if (j.contains("model_dir")) {
      read_key(j, "model_dir", s, where);
      c.model_dir = s;
    }
    read_key(j, "default_model", c.default_model, where);
    read_key(j, "provider", c.provider, where);
    if (j.contains("provider_dir")) {
      read_key(j, "provider_dir", s, where);
      c.provider_dir = s;
    }
    if (j.contains("badges")) {
      const json& b = j.at("badges");
      read_key(b, "max_reviews_one_day", c.thresholds.max_reviews_one_day, where + ": badges");
      read_key(b, "avg_review_length_chars", c.thresholds.avg_review_length_chars,
               where + ": badges");
      read_key(b, "rating_stddev", c.thresholds.rating_stddev, where + ": badges");
    }
  }
  env_string("REVDEC_HOST", c.host);
  if (const char* v = std::getenv("REVDEC_PORT")) {
    char* end = nullptr;
    const long p = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || p < 0 || p > 65535) {
      throw Error(ErrorCode::kInvalidArgument, "REVDEC_PORT: not a port number");
    }
    c.port = static_cast<int>(p);
  }
  std::string dir;
  env_string("REVDEC_MODEL_DIR", dir);
  if (!dir.empty()) c.model_dir = dir;
  env_string("REVDEC_DEFAULT_MODEL", c.default_model);
  env_string("REVDEC_PROVIDER", c.provider);
  dir.clear();
  env_string("REVDEC_PROVIDER_DIR", dir);
  if (!dir.empty()) c.provider_dir = dir;
  env_double("REVDEC_BADGE_DAILY", c.thresholds.max_reviews_one_day);
  env_double("REVDEC_BADGE_LENGTH", c.thresholds.avg_review_length_chars);
  env_double("REVDEC_BADGE_STDDEV", c.thresholds.rating_stddev);
  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::kInvalidArgument, "port: out of range");
  return c;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParse:
    case ErrorCode::kShape:
    case ErrorCode::kSchema:
      return 400;
    case ErrorCode::kNotFound:
    case ErrorCode::kUnknownModel:
      return 404;
    case ErrorCode::kProvider:
      return 502;
    default:
      return 500;
  }
}

namespace {

HttpResult error_result(int status, std::string_view code, std::string_view message) {
  json j = {{"error", {{"code", code}, {"message", message}}}};
  return {status, j.dump()};
}

template <typename F>
HttpResult guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return error_result(http_status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_result(500, "Internal", e.what());
  }
}

json parse_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "body: not valid JSON");
  }
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "body: must be a JSON object");
  return j;
}

std::string optional_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return "";
  if (!j.at(key).is_string()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(key) + ": must be a string");
  }
  return j.at(key).get<std::string>();
}

std::optional<ReviewerStats> parse_reviewer(const json& j) {
  if (!j.contains("reviewer") || j.at("reviewer").is_null()) return std::nullopt;
  const json& r = j.at("reviewer");
  if (!r.is_object()) throw Error(ErrorCode::kInvalidArgument, "reviewer: must be an object");
  ReviewerStats s;
  double* fields[] = {&s.max_reviews_one_day, &s.avg_review_length_chars, &s.rating_stddev,
                      &s.pct_positive, &s.pct_negative};
  for (std::size_t i = 0; i < features::kReviewerFeatureCount; ++i) {
    const char* key = features::kReviewerFeatureNames[i];
    if (!r.contains(key) || !r.at(key).is_number()) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("reviewer.") + key + ": required number");
    }
    *fields[i] = r.at(key).get<double>();
  }
  return s;
}

}  // namespace

HttpResult Api::score(std::string_view body) const {
  return guarded([&] {
    const json req = parse_body(body);
    if (!req.contains("text") || !req.at("text").is_string()) {
      throw Error(ErrorCode::kInvalidArgument, "text: required string");
    }
    const ScoreResult r = score_review(*registry_, req.at("text").get<std::string>(),
                                       parse_reviewer(req), optional_string(req, "model"));
    json contributions = json::array();
    for (const auto& c : r.prediction.contributions) {
      contributions.push_back({{"term", c.term}, {"value", c.value}});
    }
    json out = {{"p_deceptive", r.prediction.p_deceptive},
                {"label", corpus::label_name(r.prediction.label)},
                {"score", r.prediction.score},
                {"bias", r.bias ? json(*r.bias) : json(nullptr)},
                {"contributions", contributions},
                {"model", r.model},
                {"reviewer_features_defaulted", r.reviewer_features_defaulted}};
    return HttpResult{200, out.dump()};
  });
}

HttpResult Api::analyze(std::string_view body) const {
  return guarded([&] {
    const json req = parse_body(body);
    if (!req.contains("business_id") || !req.at("business_id").is_string()) {
      throw Error(ErrorCode::kInvalidArgument, "business_id: required string");
    }
    const BusinessAnalysis a =
        analyze_business(*registry_, *provider_, req.at("business_id").get<std::string>(),
                         optional_string(req, "model"), thresholds_);
    json badges = json::array();
    for (const auto& b : a.badges) {
      badges.push_back({{"reviewer_id", b.reviewer_id},
                        {"kind", badge_kind_name(b.kind)},
                        {"indicator", badge_indicator(b.kind)},
                        {"value", b.value}});
    }
    json series = json::array();
    for (const auto& t : a.timeseries) {
      series.push_back({{"period", corpus::format_date(t.period)},
                        {"count", t.count},
                        {"mean_rating", t.mean_rating ? json(*t.mean_rating) : json(nullptr)}});
    }
    json preds = json::array();
    for (const auto& p : a.predictions) {
      preds.push_back({{"review_id", p.review_id},
                       {"reviewer_id", p.reviewer_id ? json(*p.reviewer_id) : json(nullptr)},
                       {"p_deceptive", p.p_deceptive},
                       {"label", corpus::label_name(p.label)}});
    }
    json out = {{"business_id", a.business_id}, {"model", a.model},
                {"n_reviews", a.n_reviews},     {"buckets", a.buckets},
                {"badges", badges},             {"timeseries", series},
                {"predictions", preds}};
    return HttpResult{200, out.dump()};
  });
}

HttpResult Api::models() const {
  return guarded([&] {
    json out = json::array();
    for (const auto& m : registry_->list()) {
      out.push_back({{"name", m.name},
                     {"kind", m.kind},
                     {"trained_on", m.trained_on},
                     {"accuracy_report_ref", m.accuracy_report_ref},
                     {"default", m.name == registry_->default_name()}});
    }
    return HttpResult{200, out.dump()};
  });
}

HttpResult Api::health() const {
  return HttpResult{200, json{{"status", "ok"}, {"models", registry_->size()}}.dump()};
}

}  // namespace revdec::service
