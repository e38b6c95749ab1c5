#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "revdec/corpus.hpp"
#include "revdec/error.hpp"
#include "revdec/hash.hpp"
#include "revdec/model_io.hpp"
#include "revdec/rng.hpp"
#include "revdec/synthetic.hpp"

namespace revdec::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::pair<std::string, std::string> hashed(const fs::path& p) {
  return {p.string(), sha256_file(p)};
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kNotFound, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::kNotFound, "write failed: " + path.string());
}

std::optional<std::string> opt_path(const std::optional<fs::path>& p) {
  if (!p) return std::nullopt;
  return p->string();
}

json to_json_opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

// Per class, the first round(fraction * n_c) members of a seeded shuffle
// form the test set.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    const corpus::Corpus& c, double fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> train, test;
  for (corpus::Label label : {corpus::Label::kDeceptive, corpus::Label::kGenuine}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c[i].label == label) members.push_back(i);
    }
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_test = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(members.size())));
    if (n_test == 0 || n_test >= members.size()) {
      throw Error(ErrorCode::kStratificationImpossible,
                  "holdout leaves class " + std::string(corpus::label_name(label)) +
                      " without train or test reviews");
    }
    test.insert(test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

}  // namespace

json Manifest::to_json() const {
  auto list = [](const auto& items) {
    json a = json::array();
    for (const auto& [path, sha] : items) a.push_back({{"path", path}, {"sha256", sha}});
    return a;
  };
  return {{"command", command},         {"config", config},
          {"seed", seed},               {"inputs", list(inputs)},
          {"artifacts", list(artifacts)}, {"wall_clock_seconds", wall_clock_seconds}};
}

void Manifest::write(const fs::path& path) const { write_text(path, to_json().dump(2) + "\n"); }

fs::path manifest_path_for(const fs::path& artifact) {
  return fs::path(artifact.string() + ".manifest.json");
}

std::string error_record(const std::string& code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}}.dump();
}

IngestResult cmd_ingest(const IngestOptions& o) {
  const auto t0 = Clock::now();
  const int sources = (o.opspam ? 1 : 0) + (o.records ? 1 : 0) + (o.synthetic_per_class ? 1 : 0);
  if (sources != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "exactly one of --opspam, --records, --synthetic is required");
  }
  if (o.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  IngestResult result;
  Manifest& m = result.manifest;
  m.command = "ingest";
  m.seed = o.seed;

  corpus::Corpus c;
  if (o.opspam) {
    corpus::ParseSummary summary;
    c = corpus::parse_opspam_dir(*o.opspam, &summary);
    result.skipped = summary.skipped.size();
  } else if (o.records) {
    c = corpus::parse_reviews_records(*o.records);
    m.inputs.push_back(hashed(*o.records));
  } else {
    synthetic::YelpStyleConfig cfg;
    cfg.reviews_per_class = *o.synthetic_per_class;
    cfg.seed = o.seed;
    c = synthetic::generate_yelp_style(cfg);
  }
  if (o.max_words) c = corpus::filter_by_length(c, *o.max_words);
  if (o.balance) c = corpus::balance_classes(c, o.seed);

  corpus::write_reviews_records(c, o.out);
  result.n_reviews = c.size();
  m.artifacts.push_back(hashed(o.out));
  m.config = {{"opspam", to_json_opt(opt_path(o.opspam))},
              {"records", to_json_opt(opt_path(o.records))},
              {"synthetic_per_class",
               o.synthetic_per_class ? json(*o.synthetic_per_class) : json(nullptr)},
              {"max_words", o.max_words ? json(*o.max_words) : json(nullptr)},
              {"balance", o.balance},
              {"out", o.out.string()},
              {"n_reviews", c.size()},
              {"skipped_files", result.skipped}};
  m.wall_clock_seconds = seconds_since(t0);
  m.write(manifest_path_for(o.out));
  return result;
}

std::optional<features::EmbeddingTable> load_recipe_embeddings(
    const Recipe& recipe, const fs::path& recipe_path, const std::optional<fs::path>& override) {
  fs::path p;
  if (override) {
    p = *override;
  } else if (!recipe.embeddings_path.empty()) {
    p = recipe.embeddings_path;
    if (p.is_relative() && !fs::exists(p)) p = recipe_path.parent_path() / p;
  } else {
    return std::nullopt;
  }
  return features::load_embeddings(p).table;
}

TrainResult cmd_train(const TrainOptions& o) {
  const auto t0 = Clock::now();
  if (o.out.empty()) throw Error(ErrorCode::kInvalidArgument, "--out is required");
  Recipe recipe = load_recipe(o.recipe);
  if (o.seed) recipe.train.seed = *o.seed;
  const corpus::Corpus c = corpus::parse_reviews_records(o.corpus);
  const auto emb = load_recipe_embeddings(recipe, o.recipe, o.embeddings);

  TrainResult result;
  std::vector<std::size_t> train_idx(c.size());
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::vector<std::size_t> test_idx;
  if (o.holdout) {
    if (!(*o.holdout > 0 && *o.holdout < 1)) {
      throw Error(ErrorCode::kInvalidArgument, "--holdout: must be in (0, 1)");
    }
    std::tie(train_idx, test_idx) = holdout_split(c, *o.holdout, recipe.train.seed);
  }
  TrainedModel tm = fit_recipe(recipe, c, train_idx, emb ? &*emb : nullptr);
  tm.meta.trained_on = o.corpus.filename().string() + " sha256:" + sha256_file(o.corpus);
  tm.meta.accuracy_report_ref = o.report_ref;
  if (!test_idx.empty()) {
    const auto profiles = features::build_reviewer_profiles(c);
    std::size_t correct = 0;
    for (std::size_t i : test_idx) {
      const auto raw = recipe.features.user_features ? raw_user_features(c[i], profiles)
                                                     : std::vector<double>{};
      if (tm.score(c[i].text, raw).label == c[i].label) ++correct;
    }
    result.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
  }
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  save_model(tm, o.out);

  Manifest& m = result.manifest;
  m.command = "train";
  m.seed = recipe.train.seed;
  m.inputs.push_back(hashed(o.corpus));
  m.inputs.push_back(hashed(o.recipe));
  if (o.embeddings) m.inputs.push_back(hashed(*o.embeddings));
  m.artifacts.push_back(hashed(o.out));
  m.config = {{"recipe", json::parse(recipe_to_json(recipe))},
              {"holdout", o.holdout ? json(*o.holdout) : json(nullptr)},
              {"holdout_accuracy",
               result.holdout_accuracy ? json(*result.holdout_accuracy) : json(nullptr)},
              {"n_train", train_idx.size()},
              {"n_test", test_idx.size()}};
  m.wall_clock_seconds = seconds_since(t0);
  m.write(manifest_path_for(o.out));
  return result;
}

EvalResult cmd_eval(const EvalCommandOptions& o) {
  const auto t0 = Clock::now();
  if (o.kfold.has_value() == o.bootstrap.has_value()) {
    throw Error(ErrorCode::kInvalidArgument, "exactly one of --kfold, --bootstrap is required");
  }
  if (o.kfold && *o.kfold < 2) throw Error(ErrorCode::kInvalidArgument, "--kfold: must be >= 2");
  if (o.bootstrap && *o.bootstrap < 1) {
    throw Error(ErrorCode::kInvalidArgument, "--bootstrap: must be >= 1");
  }
  const Recipe recipe = load_recipe(o.recipe);
  const corpus::Corpus c = corpus::parse_reviews_records(o.corpus);
  const auto emb = load_recipe_embeddings(recipe, o.recipe, o.embeddings);
  const eval::Protocol protocol = o.kfold ? eval::Protocol::kfold(*o.kfold, o.seed)
                                          : eval::Protocol::bootstrap(*o.bootstrap, o.seed);
  EvalResult r;
  r.report = eval::run_protocol(c, recipe, protocol, {emb ? &*emb : nullptr, o.threads});
  r.report_json = eval::report_to_json(r.report);
  r.table = eval::report_table(r.report);

  Manifest& m = r.manifest;
  m.command = "eval";
  m.seed = o.seed;
  m.inputs.push_back(hashed(o.corpus));
  m.inputs.push_back(hashed(o.recipe));
  if (o.embeddings) m.inputs.push_back(hashed(*o.embeddings));
  m.config = {{"recipe", json::parse(recipe_to_json(recipe))},
              {"protocol", protocol.name()},
              {"threads", o.threads}};
  if (o.report) {
    write_text(*o.report, r.report_json);
    m.artifacts.push_back(hashed(*o.report));
  }
  m.wall_clock_seconds = seconds_since(t0);
  if (o.report) m.write(manifest_path_for(*o.report));
  return r;
}

std::vector<std::string> cmd_predict(const fs::path& model, const std::vector<std::string>& texts) {
  auto registry = std::make_shared<service::ModelRegistry>();
  registry->put(model.stem().string(),
                std::make_shared<service::TrainedModelScorer>(load_model(model)));
  const service::Api api(registry, nullptr);
  std::vector<std::string> out;
  for (const auto& t : texts) {
    const auto res = api.score(json{{"text", t}}.dump());
    if (res.status != 200) {
      const json err = json::parse(res.body).at("error");
      throw Error(ErrorCode::kInvalidArgument, err.at("message").get<std::string>());
    }
    out.push_back(res.body);
  }
  return out;
}

void cmd_serve(const service::ServiceConfig& config) {
  auto registry = std::make_shared<service::ModelRegistry>();
  const auto names = registry->load_directory(config.model_dir);
  if (names.empty()) {
    throw Error(ErrorCode::kNotFound, "no *.rvm models in " + config.model_dir.string());
  }
  if (!config.default_model.empty()) registry->set_default(config.default_model);
  if (config.provider != "local") {
    throw Error(ErrorCode::kUnsupported, "unknown provider '" + config.provider + "'");
  }
  auto provider = std::make_shared<service::LocalFileProvider>(config.provider_dir);
  auto api = std::make_shared<service::Api>(registry, provider, config.thresholds);
  service::HttpServer server(api);
  const int port = server.bind(config.host, config.port);
  std::cerr << "serving " << names.size() << " model(s) on http://" << config.host << ":" << port
            << " (default " << registry->default_name() << ")\n";
  server.listen();
}

}  // namespace revdec::cli
