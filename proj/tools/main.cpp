#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli/commands.hpp"
#include "revdec/error.hpp"

namespace fs = std::filesystem;
using namespace revdec;

namespace {

// Optional "seed" and "threads" defaults from the --config file.
struct FileDefaults {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

FileDefaults read_defaults(const std::optional<fs::path>& path) {
  FileDefaults d;
  if (!path) return d;
  std::ifstream in(*path);
  if (!in) throw Error(ErrorCode::kNotFound, "config file not found: " + path->string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kParse, path->string() + ": not a JSON object");
  }
  if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("threads")) d.threads = j.at("threads").get<std::size_t>();
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deceptive review detection: ingest, train, evaluate, predict, serve"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config_path;
  app.add_option("--seed", seed, "Random seed (default 1)");
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  cli::IngestOptions ingest;
  std::optional<std::string> opspam, records;
  std::string ingest_out;
  auto* ingest_cmd = app.add_subcommand("ingest", "Convert a corpus to the review record format");
  ingest_cmd->add_option("--opspam", opspam, "OpSpam directory")->check(CLI::ExistingDirectory);
  ingest_cmd->add_option("--records", records, "Review records file (JSON lines)")
      ->check(CLI::ExistingFile);
  ingest_cmd->add_option("--synthetic", ingest.synthetic_per_class,
                         "Generate a synthetic Yelp-style corpus with N reviews per class")
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--max-words", ingest.max_words, "Drop reviews longer than N words")
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_flag("--balance", ingest.balance, "Downsample to equal class sizes");
  ingest_cmd->add_option("--out", ingest_out, "Output records file")->required();

  cli::TrainOptions train;
  std::string train_corpus, train_recipe, train_out;
  std::optional<std::string> train_emb;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a corpus and a recipe");
  train_cmd->add_option("--corpus", train_corpus)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--recipe", train_recipe)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_out, "Model file (.rvm)")->required();
  train_cmd->add_option("--holdout", train.holdout, "Stratified test fraction")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--embeddings", train_emb, "Embedding file (overrides the recipe)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--report-ref", train.report_ref, "Reference to an evaluation report");

  cli::EvalCommandOptions ev;
  std::string eval_corpus, eval_recipe;
  std::optional<std::string> eval_report, eval_emb;
  std::optional<std::size_t> threads;
  auto* eval_cmd = app.add_subcommand("eval", "Run a validation protocol");
  eval_cmd->add_option("--corpus", eval_corpus)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--recipe", eval_recipe)->required()->check(CLI::ExistingFile);
  auto* kfold = eval_cmd->add_option("--kfold", ev.kfold, "Stratified k-fold (k >= 2)")
                    ->check(CLI::Range(std::size_t{2}, std::size_t{1000}));
  auto* boot = eval_cmd->add_option("--bootstrap", ev.bootstrap, "Bootstrap repeats")
                   ->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
  kfold->excludes(boot);
  eval_cmd->add_option("--report", eval_report, "Machine-readable report (JSON)");
  eval_cmd->add_option("--threads", threads, "Splits run in parallel")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--embeddings", eval_emb, "Embedding file (overrides the recipe)")
      ->check(CLI::ExistingFile);

  std::string predict_model;
  std::vector<std::string> predict_texts;
  std::optional<std::string> predict_input;
  auto* predict_cmd = app.add_subcommand("predict", "Score review texts with a trained model");
  predict_cmd->add_option("--model", predict_model)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--text", predict_texts, "Review text (repeatable)");
  predict_cmd->add_option("--input", predict_input, "Records file to score")
      ->check(CLI::ExistingFile);

  std::optional<std::string> host, models_dir, businesses_dir, default_model;
  std::optional<int> port;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--models", models_dir, "Directory of .rvm models");
  serve_cmd->add_option("--businesses", businesses_dir,
                        "Local provider directory of <business_id>.jsonl files");
  serve_cmd->add_option("--default-model", default_model);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // Usage errors get the same machine-readable record as runtime errors.
    std::cerr << cli::error_record("InvalidArgument", e.what()) << "\n";
    return 2;
  }

  try {
    std::optional<fs::path> cfg;
    if (config_path) cfg = *config_path;
    const FileDefaults defaults = read_defaults(cfg);
    const std::uint64_t run_seed = seed.value_or(defaults.seed.value_or(1));

    if (*ingest_cmd) {
      if (opspam) ingest.opspam = *opspam;
      if (records) ingest.records = *records;
      ingest.seed = run_seed;
      ingest.out = ingest_out;
      const auto r = cli::cmd_ingest(ingest);
      std::cout << "wrote " << r.n_reviews << " reviews to " << ingest.out.string();
      if (r.skipped > 0) std::cout << " (" << r.skipped << " files skipped)";
      std::cout << "\n";
    } else if (*train_cmd) {
      train.corpus = train_corpus;
      train.recipe = train_recipe;
      train.out = train_out;
      if (train_emb) train.embeddings = fs::path(*train_emb);
      if (seed || defaults.seed) train.seed = run_seed;
      const auto r = cli::cmd_train(train);
      std::cout << "wrote " << train.out.string() << " sha256 " << r.manifest.artifacts[0].second
                << "\n";
      if (r.holdout_accuracy) std::printf("holdout accuracy %.4f\n", *r.holdout_accuracy);
    } else if (*eval_cmd) {
      ev.corpus = eval_corpus;
      ev.recipe = eval_recipe;
      ev.seed = run_seed;
      ev.threads = threads.value_or(defaults.threads.value_or(1));
      if (eval_report) ev.report = fs::path(*eval_report);
      if (eval_emb) ev.embeddings = fs::path(*eval_emb);
      const auto r = cli::cmd_eval(ev);
      std::cout << r.table;
    } else if (*predict_cmd) {
      if (predict_input) {
        for (const auto& rv : corpus::parse_reviews_records(*predict_input).reviews()) {
          predict_texts.push_back(rv.text);
        }
      }
      if (predict_texts.empty()) throw Error(ErrorCode::kInvalidArgument, "no --text or --input");
      for (const auto& line : cli::cmd_predict(predict_model, predict_texts)) {
        std::cout << line << "\n";
      }
    } else if (*serve_cmd) {
      service::ServiceConfig sc = service::load_service_config(cfg);
      if (host) sc.host = *host;
      if (port) sc.port = *port;
      if (models_dir) sc.model_dir = *models_dir;
      if (businesses_dir) sc.provider_dir = *businesses_dir;
      if (default_model) sc.default_model = *default_model;
      cli::cmd_serve(sc);
    }
  } catch (const Error& e) {
    std::cerr << cli::error_record(std::string(error_code_name(e.code())), e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << cli::error_record("Internal", e.what()) << "\n";
    return 1;
  }
  return 0;
}
