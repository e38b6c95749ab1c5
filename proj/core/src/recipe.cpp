#include "revdec/recipe.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "revdec/error.hpp"

namespace revdec {

using nlohmann::json;

namespace {

constexpr std::string_view kModelKinds[] = {"logistic_regression", "linear_svm", "ffnn",
                                            "cnn_bow",             "cnn_embedding", "lstm",
                                            "constant"};

[[noreturn]] void field_error(const std::string& path, const std::string& rule) {
  throw Error(ErrorCode::kInvalidArgument, path + ": " + rule);
}

}  // namespace

bool Recipe::is_neural() const {
  return model == "ffnn" || model == "cnn_bow" || model == "cnn_embedding" || model == "lstm";
}

Recipe default_recipe(std::string_view model) {
  Recipe r;
  r.model = std::string(model);
  if (model == "logistic_regression" || model == "constant") {
    r.features.representation = Representation::kTfidf;
    r.train.learning_rate = 1.0;
    r.train.l2_lambda = 1e-4;
    r.train.batch_size = 16;
    r.train.max_epochs = 100;
  } else if (model == "linear_svm") {
    r.features.representation = Representation::kTfidf;
    r.train.learning_rate = 1.0;
    r.train.l2_lambda = 1e-3;
    r.train.batch_size = 16;
    r.train.max_epochs = 100;
  } else if (model == "ffnn") {
    r.arch = models::ffnn_arch(32, 16);
    r.features.representation = Representation::kCounts;
  } else if (model == "cnn_bow") {
    r.arch = models::cnn_bow_arch(10);
    r.features.representation = Representation::kCounts;
  } else if (model == "cnn_embedding") {
    r.arch = models::cnn_embedding_arch(5);
    r.features.representation = Representation::kEmbeddings;
  } else if (model == "lstm") {
    r.arch = models::lstm_arch(models::InputMode::kTokenIds);
    r.features.representation = Representation::kOneHot;
  } else {
    field_error("model", "unknown model kind \"" + std::string(model) + "\"");
  }
  return r;
}

namespace {

template <typename T>
void read_number(const json& obj, const char* key, const std::string& path, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string p = path + "." + key;
  if constexpr (std::is_same_v<T, double>) {
    if (!it->is_number()) field_error(p, "must be a number");
    out = it->get<double>();
  } else {
    if (!it->is_number_integer()) field_error(p, "must be an integer");
    if (it->get<long long>() < 0) field_error(p, "must be non-negative");
    out = static_cast<T>(it->get<unsigned long long>());
  }
}

const json& section(const json& root, const char* key, const json& empty) {
  auto it = root.find(key);
  if (it == root.end()) return empty;
  if (!it->is_object()) field_error(key, "must be an object");
  return *it;
}

}  // namespace

Recipe parse_recipe(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("recipe: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) field_error("recipe", "must be an object");
  auto mit = root.find("model");
  if (mit == root.end()) field_error("model", "is required");
  if (!mit->is_string()) field_error("model", "must be a string");
  const std::string kind = mit->get<std::string>();
  if (std::find(std::begin(kModelKinds), std::end(kModelKinds), kind) == std::end(kModelKinds)) {
    field_error("model", "unknown model kind \"" + kind + "\"");
  }
  Recipe r = default_recipe(kind);
  const json empty = json::object();

  const json& arch = section(root, "arch", empty);
  read_number(arch, "hidden1", "arch", r.arch.hidden1);
  read_number(arch, "hidden2", "arch", r.arch.hidden2);
  read_number(arch, "dropout", "arch", r.arch.dropout);
  read_number(arch, "filters", "arch", r.arch.filters);
  read_number(arch, "kernel", "arch", r.arch.kernel);
  read_number(arch, "pool", "arch", r.arch.pool);
  read_number(arch, "conv_dropout", "arch", r.arch.conv_dropout);
  read_number(arch, "lstm_units", "arch", r.arch.lstm_units);
  read_number(arch, "dense_units", "arch", r.arch.dense_units);
  if (!(r.arch.dropout >= 0 && r.arch.dropout < 1)) field_error("arch.dropout", "must be in [0, 1)");
  if (!(r.arch.conv_dropout >= 0 && r.arch.conv_dropout < 1)) {
    field_error("arch.conv_dropout", "must be in [0, 1)");
  }

  const json& feats = section(root, "features", empty);
  if (auto it = feats.find("representation"); it != feats.end()) {
    if (!it->is_string()) field_error("features.representation", "must be a string");
    auto rep = parse_representation(it->get<std::string>());
    if (!rep) field_error("features.representation", "unknown representation");
    r.features.representation = *rep;
  }
  if (auto it = feats.find("max_terms"); it != feats.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) {
      field_error("features.max_terms", "must be a positive integer");
    }
    r.features.max_terms = it->get<std::size_t>();
  }
  if (auto it = feats.find("user_features"); it != feats.end()) {
    if (!it->is_boolean()) field_error("features.user_features", "must be a boolean");
    r.features.user_features = it->get<bool>();
  }
  read_number(feats, "max_len", "features", r.features.max_len);
  if (r.features.max_len < 1) field_error("features.max_len", "must be positive");
  if (auto it = feats.find("embeddings"); it != feats.end()) {
    if (!it->is_string()) field_error("features.embeddings", "must be a path string");
    r.embeddings_path = it->get<std::string>();
  }
  if (r.features.representation == Representation::kEmbeddings && r.embeddings_path.empty()) {
    field_error("features.embeddings", "is required for the embeddings representation");
  }

  const json& train = section(root, "train", empty);
  read_number(train, "seed", "train", r.train.seed);
  read_number(train, "learning_rate", "train", r.train.learning_rate);
  read_number(train, "l2_lambda", "train", r.train.l2_lambda);
  read_number(train, "batch_size", "train", r.train.batch_size);
  read_number(train, "max_epochs", "train", r.train.max_epochs);
  read_number(train, "early_stop_patience", "train", r.train.early_stop_patience);
  read_number(train, "validation_fraction", "train", r.train.validation_fraction);
  r.train.validate();

  const bool linear = !r.is_neural();
  const auto rep = r.features.representation;
  if (linear && rep != Representation::kTfidf && rep != Representation::kCounts) {
    field_error("features.representation", "linear models need tfidf or counts");
  }
  if (r.model == "ffnn" && rep == Representation::kOneHot) {
    field_error("features.representation", "ffnn cannot take onehot sequences");
  }
  if (r.model == "cnn_bow" && rep != Representation::kTfidf && rep != Representation::kCounts) {
    field_error("features.representation", "cnn_bow needs tfidf or counts");
  }
  if (r.model == "cnn_embedding" && rep != Representation::kEmbeddings) {
    field_error("features.representation", "cnn_embedding needs embeddings");
  }
  if (r.model == "lstm" && rep != Representation::kEmbeddings && rep != Representation::kOneHot) {
    field_error("features.representation", "lstm needs embeddings or onehot");
  }
  return r;
}

Recipe load_recipe(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open recipe " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_recipe(ss.str());
}

std::string recipe_to_json(const Recipe& r) {
  json j;
  j["model"] = r.model;
  if (r.is_neural()) {
    j["arch"] = {{"hidden1", r.arch.hidden1},         {"hidden2", r.arch.hidden2},
                 {"dropout", r.arch.dropout},         {"filters", r.arch.filters},
                 {"kernel", r.arch.kernel},           {"pool", r.arch.pool},
                 {"conv_dropout", r.arch.conv_dropout}, {"lstm_units", r.arch.lstm_units},
                 {"dense_units", r.arch.dense_units}};
  }
  j["features"] = {{"representation", representation_name(r.features.representation)},
                   {"user_features", r.features.user_features},
                   {"max_len", r.features.max_len}};
  if (r.features.max_terms) j["features"]["max_terms"] = *r.features.max_terms;
  if (!r.embeddings_path.empty()) j["features"]["embeddings"] = r.embeddings_path;
  j["train"] = {{"seed", r.train.seed},
                {"learning_rate", r.train.learning_rate},
                {"l2_lambda", r.train.l2_lambda},
                {"batch_size", r.train.batch_size},
                {"max_epochs", r.train.max_epochs},
                {"early_stop_patience", r.train.early_stop_patience},
                {"validation_fraction", r.train.validation_fraction}};
  return j.dump(2);
}

models::Prediction TrainedModel::score(std::string_view text,
                                       std::span<const double> raw_user) const {
  const models::Example x = pipeline.vectorize(text, raw_user);
  models::Prediction p = models::predict(model, x);
  if (const auto* lin = std::get_if<models::LinearModel>(&model)) {
    p.contributions = models::explain_linear(*lin, x, pipeline.vocabulary());
  }
  return p;
}

TrainedModel fit_recipe(const Recipe& recipe, const corpus::Corpus& corpus,
                        std::span<const std::size_t> train_idx,
                        const features::EmbeddingTable* embeddings) {
  TrainedModel tm;
  tm.pipeline = Pipeline::fit(recipe.features, corpus, train_idx, embeddings);
  tm.meta.recipe_json = recipe_to_json(recipe);

  std::map<std::string, features::ReviewerProfile> profiles;
  if (recipe.features.user_features) profiles = features::build_reviewer_profiles(corpus, train_idx);
  std::vector<models::Example> xs;
  std::vector<models::Label> ys;
  xs.reserve(train_idx.size());
  ys.reserve(train_idx.size());
  for (std::size_t i : train_idx) {
    const auto raw = recipe.features.user_features ? raw_user_features(corpus[i], profiles)
                                                   : std::vector<double>{};
    xs.push_back(tm.pipeline.vectorize(corpus[i].text, raw));
    ys.push_back(corpus[i].label);
  }

  if (recipe.model == "logistic_regression") {
    tm.model = models::train_logistic_regression(xs, ys, recipe.train);
  } else if (recipe.model == "linear_svm") {
    tm.model = models::train_linear_svm(xs, ys, recipe.train);
  } else if (recipe.model == "constant") {
    models::check_training_set(xs, ys);
    models::LinearModel m;
    m.term_dimension = xs.front().terms.dimension;
    m.weights.assign(m.term_dimension + xs.front().user.size(), 0.0);
    m.schema_id = tm.pipeline.schema_id();
    tm.model = std::move(m);
  } else {
    models::NeuralArch arch = recipe.arch;
    const Pipeline& p = tm.pipeline;
    arch.term_dim = p.vocabulary().size();
    arch.seq_len = recipe.features.max_len;
    arch.embedding_dim = p.embeddings().dimension();
    arch.user_dim = p.user_dim();
    switch (recipe.features.representation) {
      case Representation::kTfidf:
      case Representation::kCounts: arch.input = models::InputMode::kTerms; break;
      case Representation::kEmbeddings: arch.input = models::InputMode::kSequence; break;
      case Representation::kOneHot: arch.input = models::InputMode::kTokenIds; break;
    }
    tm.model = models::train_network(arch, xs, ys, recipe.train);
  }
  return tm;
}

}  // namespace revdec
