#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "revdec/corpus.hpp"
#include "revdec/features.hpp"
#include "revdec/models/model.hpp"
#include "revdec/pipeline.hpp"

namespace revdec {

// Declarative training recipe: model kind, architecture numbers, feature
// pipeline and optimizer settings.
//
// JSON shape:
//   {"model": "logistic_regression" | "linear_svm" | "ffnn" | "cnn_bow" |
//             "cnn_embedding" | "lstm" | "constant",
//    "arch": {"hidden1", "hidden2", "dropout", "filters", "kernel", "pool",
//             "conv_dropout", "lstm_units", "dense_units"},
//    "features": {"representation": "tfidf"|"counts"|"embeddings"|"onehot",
//                 "max_terms", "user_features", "max_len", "embeddings"},
//    "train": {"seed", "learning_rate", "l2_lambda", "batch_size",
//              "max_epochs", "early_stop_patience", "validation_fraction"}}
// Omitted fields take the defaults of the chosen model kind.
struct Recipe {
  std::string model = "logistic_regression";
  models::NeuralArch arch;
  PipelineConfig features;
  std::string embeddings_path;
  models::TrainConfig train;

  bool is_neural() const;
};

// Recipe with the published hyperparameters for a model kind.
Recipe default_recipe(std::string_view model);

// Throws InvalidArgument with the JSON path of the offending field, e.g.
// "train.learning_rate: must be positive".
Recipe parse_recipe(std::string_view json_text);
Recipe load_recipe(const std::filesystem::path& path);
std::string recipe_to_json(const Recipe& recipe);

struct ModelMetadata {
  std::string trained_on;
  std::string accuracy_report_ref;
  std::string recipe_json;
};

// A model bound to the pipeline that produced its inputs.
struct TrainedModel {
  Pipeline pipeline;
  models::Model model;
  ModelMetadata meta;

  std::string_view kind() const { return models::model_kind_name(model); }
  bool is_linear() const { return std::holds_alternative<models::LinearModel>(model); }

  // Vectorizes and predicts; linear models also fill contributions.
  models::Prediction score(std::string_view text, std::span<const double> raw_user) const;
};

// Fits the pipeline and model on the reviews at train_idx. Reviewer profiles
// come from the training reviews only.
TrainedModel fit_recipe(const Recipe& recipe, const corpus::Corpus& corpus,
                        std::span<const std::size_t> train_idx,
                        const features::EmbeddingTable* embeddings);

}  // namespace revdec
