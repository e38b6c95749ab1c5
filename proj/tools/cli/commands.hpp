#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "revdec/eval.hpp"
#include "revdec/service.hpp"

namespace revdec::cli {

namespace fs = std::filesystem;

// Record of one command run: what went in, what came out, and how long it
// took. Written next to the primary artifact as <artifact>.manifest.json.
struct Manifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;     // path, sha256
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, sha256
  double wall_clock_seconds = 0;

  nlohmann::json to_json() const;
  void write(const fs::path& path) const;
};

fs::path manifest_path_for(const fs::path& artifact);

struct IngestOptions {
  std::optional<fs::path> opspam;
  std::optional<fs::path> records;
  std::optional<std::size_t> synthetic_per_class;
  std::optional<std::size_t> max_words;
  bool balance = false;
  std::uint64_t seed = 1;
  fs::path out;
};

struct IngestResult {
  Manifest manifest;
  std::size_t n_reviews = 0;
  std::size_t skipped = 0;
};

// Exactly one of opspam / records / synthetic_per_class must be set.
IngestResult cmd_ingest(const IngestOptions& options);

struct TrainOptions {
  fs::path corpus;
  fs::path recipe;
  fs::path out;
  std::optional<std::uint64_t> seed;  // overrides the recipe's training seed
  std::optional<double> holdout;      // stratified test fraction in (0, 1)
  std::optional<fs::path> embeddings;
  std::string report_ref;
};

struct TrainResult {
  Manifest manifest;
  std::optional<double> holdout_accuracy;
};

TrainResult cmd_train(const TrainOptions& options);

struct EvalCommandOptions {
  fs::path corpus;
  fs::path recipe;
  std::optional<std::size_t> kfold;
  std::optional<std::size_t> bootstrap;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::optional<fs::path> report;
  std::optional<fs::path> embeddings;
};

struct EvalResult {
  eval::EvalReport report;
  std::string report_json;
  std::string table;
  Manifest manifest;
};

// Exactly one of kfold (>= 2) / bootstrap (>= 1) must be set.
EvalResult cmd_eval(const EvalCommandOptions& options);

// One JSON object per text, shaped like the score endpoint's response.
std::vector<std::string> cmd_predict(const fs::path& model, const std::vector<std::string>& texts);

// Loads models and blocks serving HTTP until the process is stopped.
void cmd_serve(const service::ServiceConfig& config);

// Embedding file named by a recipe, resolved against the recipe's directory
// when relative and not found from the working directory.
std::optional<features::EmbeddingTable> load_recipe_embeddings(
    const Recipe& recipe, const fs::path& recipe_path, const std::optional<fs::path>& override);

// Machine-readable error record for stderr.
std::string error_record(const std::string& code, const std::string& message);

}  // namespace revdec::cli
