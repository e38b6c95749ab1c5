#include "revdec/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "revdec/error.hpp"
#include "revdec/hash.hpp"

namespace revdec {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "RVDM";
constexpr std::size_t kChecksumLen = 64;

struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

class Writer {
 public:
  void bytes(std::string_view s) { out_.append(s); }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::kFormat, "model file is truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

json arch_json(const models::NeuralArch& a) {
  return {{"kind", models::neural_kind_name(a.kind)},
          {"input", models::input_mode_name(a.input)},
          {"term_dim", a.term_dim},
          {"seq_len", a.seq_len},
          {"embedding_dim", a.embedding_dim},
          {"user_dim", a.user_dim},
          {"hidden1", a.hidden1},
          {"hidden2", a.hidden2},
          {"dropout", a.dropout},
          {"filters", a.filters},
          {"kernel", a.kernel},
          {"pool", a.pool},
          {"conv_dropout", a.conv_dropout},
          {"lstm_units", a.lstm_units},
          {"dense_units", a.dense_units}};
}

models::NeuralArch arch_from_json(const json& j) {
  models::NeuralArch a;
  const std::string kind = j.at("kind").get<std::string>();
  bool found = false;
  for (auto k : {models::NeuralKind::kFfnn, models::NeuralKind::kCnnBow,
                 models::NeuralKind::kCnnEmbedding, models::NeuralKind::kLstm}) {
    if (models::neural_kind_name(k) == kind) {
      a.kind = k;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::kFormat, "unknown neural kind " + kind);
  const std::string input = j.at("input").get<std::string>();
  found = false;
  for (auto m : {models::InputMode::kTerms, models::InputMode::kSequence,
                 models::InputMode::kTokenIds}) {
    if (models::input_mode_name(m) == input) {
      a.input = m;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::kFormat, "unknown input mode " + input);
  a.term_dim = j.at("term_dim").get<std::size_t>();
  a.seq_len = j.at("seq_len").get<std::size_t>();
  a.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  a.user_dim = j.at("user_dim").get<std::size_t>();
  a.hidden1 = j.at("hidden1").get<std::size_t>();
  a.hidden2 = j.at("hidden2").get<std::size_t>();
  a.dropout = j.at("dropout").get<double>();
  a.filters = j.at("filters").get<std::size_t>();
  a.kernel = j.at("kernel").get<std::size_t>();
  a.pool = j.at("pool").get<std::size_t>();
  a.conv_dropout = j.at("conv_dropout").get<double>();
  a.lstm_units = j.at("lstm_units").get<std::size_t>();
  a.dense_units = j.at("dense_units").get<std::size_t>();
  return a;
}

json train_json(const models::TrainConfig& c) {
  return {{"seed", c.seed},
          {"learning_rate", c.learning_rate},
          {"l2_lambda", c.l2_lambda},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"validation_fraction", c.validation_fraction}};
}

models::TrainConfig train_from_json(const json& j) {
  models::TrainConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.l2_lambda = j.at("l2_lambda").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  return c;
}

std::uint64_t parse_hex(const std::string& s) {
  std::size_t used = 0;
  const std::uint64_t v = std::stoull(s, &used, 16);
  if (used != s.size()) throw Error(ErrorCode::kFormat, "bad hex value " + s);
  return v;
}

}  // namespace

std::string serialize_model(const TrainedModel& tm) {
  const Pipeline& p = tm.pipeline;
  std::map<std::string, Tensor> tensors;

  json header;
  header["format_version"] = kModelFormatVersion;
  header["model_kind"] = tm.kind();
  header["feature_schema_id"] = to_hex(models::model_schema_id(tm.model));
  header["pipeline_schema_id"] = to_hex(p.schema_id());
  json pipe;
  pipe["representation"] = representation_name(p.config().representation);
  pipe["max_terms"] = p.config().max_terms ? json(*p.config().max_terms) : json(nullptr);
  pipe["user_features"] = p.config().user_features;
  pipe["max_len"] = p.config().max_len;
  pipe["n_docs"] = p.vocabulary().n_docs();
  pipe["terms"] = p.vocabulary().terms();
  pipe["embedding_dim"] = p.embeddings().dimension();
  pipe["embedding_terms"] = p.embeddings().terms();
  header["pipeline"] = pipe;

  {
    const auto& df = p.vocabulary().doc_freqs();
    tensors["pipeline.doc_freq"] = {{df.size()}, std::vector<double>(df.begin(), df.end())};
  }
  if (p.scaler()) {
    tensors["pipeline.scaler.min"] = {{p.scaler()->dimension()}, p.scaler()->mins()};
    tensors["pipeline.scaler.max"] = {{p.scaler()->dimension()}, p.scaler()->maxs()};
  }
  if (p.embeddings().size() > 0) {
    Tensor t;
    t.shape = {p.embeddings().size(), p.embeddings().dimension()};
    for (const std::string& term : p.embeddings().terms()) {
      const double* row = p.embeddings().find(term);
      t.values.insert(t.values.end(), row, row + p.embeddings().dimension());
    }
    tensors["pipeline.embeddings"] = std::move(t);
  }

  json hyper;
  if (const auto* lin = std::get_if<models::LinearModel>(&tm.model)) {
    hyper["term_dimension"] = lin->term_dimension;
    tensors["linear.weights"] = {{lin->weights.size()}, lin->weights};
    tensors["linear.bias"] = {{1}, {lin->bias}};
    tensors["linear.platt"] = {{2}, {lin->platt_a, lin->platt_c}};
  } else {
    const auto& nm = std::get<models::NeuralModel>(tm.model);
    hyper["arch"] = arch_json(nm.net.arch());
    hyper["train"] = train_json(nm.config);
    hyper["best_epoch"] = nm.best_epoch;
    for (const auto& param : nm.net.params()) {
      tensors["net." + param.name] = {
          std::vector<std::uint64_t>(param.shape.begin(), param.shape.end()), param.value};
    }
  }
  header["hyperparameters"] = hyper;
  header["metadata"] = {{"trained_on", tm.meta.trained_on},
                        {"accuracy_report_ref", tm.meta.accuracy_report_ref},
                        {"recipe", tm.meta.recipe_json}};

  Writer w;
  w.bytes(kMagic);
  w.le<std::uint32_t>(kModelFormatVersion);
  const std::string header_text = header.dump();
  w.le<std::uint64_t>(header_text.size());
  w.bytes(header_text);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (std::uint64_t d : t.shape) w.le<std::uint64_t>(d);
    for (double v : t.values) w.f64(v);
  }
  const std::string digest = sha256_hex(w.str());
  w.bytes(digest);
  return std::move(w.str());
}

TrainedModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 4 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::kFormat, "not a model file (bad magic)");
  }
  Reader r(bytes);
  r.bytes(kMagic.size());
  const auto version = r.le<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::kVersion, "unsupported model format version " + std::to_string(version) +
                                         " (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  if (bytes.size() < kChecksumLen + 8) throw Error(ErrorCode::kFormat, "model file is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - kChecksumLen);
  if (sha256_hex(body) != bytes.substr(bytes.size() - kChecksumLen)) {
    throw Error(ErrorCode::kFormat, "model checksum mismatch (corrupt or truncated file)");
  }
  Reader br(body);
  br.bytes(kMagic.size() + 4);

  try {
    const auto header_len = br.le<std::uint64_t>();
    if (header_len > br.remaining()) throw Error(ErrorCode::kFormat, "header length out of range");
    const json header = json::parse(br.bytes(header_len));
    std::map<std::string, Tensor> tensors;
    const auto count = br.le<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto name_len = br.le<std::uint32_t>();
      std::string name(br.bytes(name_len));
      Tensor t;
      const auto rank = br.le<std::uint32_t>();
      std::uint64_t n = 1;
      for (std::uint32_t k = 0; k < rank; ++k) {
        t.shape.push_back(br.le<std::uint64_t>());
        n *= t.shape.back();
      }
      if (n > br.remaining() / 8) throw Error(ErrorCode::kFormat, "tensor " + name + " truncated");
      t.values.resize(n);
      for (auto& v : t.values) v = br.f64();
      tensors.emplace(std::move(name), std::move(t));
    }
    if (br.remaining() != 0) throw Error(ErrorCode::kFormat, "trailing bytes after tensors");
    auto tensor = [&](const std::string& name) -> const Tensor& {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw Error(ErrorCode::kFormat, "missing tensor " + name);
      return it->second;
    };

    const json& pj = header.at("pipeline");
    PipelineConfig cfg;
    auto rep = parse_representation(pj.at("representation").get<std::string>());
    if (!rep) throw Error(ErrorCode::kFormat, "unknown representation");
    cfg.representation = *rep;
    if (!pj.at("max_terms").is_null()) cfg.max_terms = pj.at("max_terms").get<std::size_t>();
    cfg.user_features = pj.at("user_features").get<bool>();
    cfg.max_len = pj.at("max_len").get<std::size_t>();
    const auto& df_t = tensor("pipeline.doc_freq");
    std::vector<std::size_t> df;
    df.reserve(df_t.values.size());
    for (double v : df_t.values) df.push_back(static_cast<std::size_t>(v));
    features::Vocabulary vocab(pj.at("terms").get<std::vector<std::string>>(), std::move(df),
                               pj.at("n_docs").get<std::size_t>());
    std::optional<features::FeatureScaler> scaler;
    if (cfg.user_features) {
      scaler = features::FeatureScaler(tensor("pipeline.scaler.min").values,
                                       tensor("pipeline.scaler.max").values);
    }
    features::EmbeddingTable table(pj.at("embedding_dim").get<std::size_t>());
    const auto emb_terms = pj.at("embedding_terms").get<std::vector<std::string>>();
    if (!emb_terms.empty()) {
      const auto& et = tensor("pipeline.embeddings");
      const std::size_t d = table.dimension();
      if (et.values.size() != emb_terms.size() * d) {
        throw Error(ErrorCode::kFormat, "embedding tensor shape mismatch");
      }
      for (std::size_t i = 0; i < emb_terms.size(); ++i) {
        table.insert(emb_terms[i], std::vector<double>(et.values.begin() + i * d,
                                                       et.values.begin() + (i + 1) * d));
      }
    }
    TrainedModel tm;
    tm.pipeline = Pipeline(cfg, std::move(vocab), std::move(scaler), std::move(table));
    if (to_hex(tm.pipeline.schema_id()) != header.at("pipeline_schema_id").get<std::string>()) {
      throw Error(ErrorCode::kFormat, "pipeline schema id does not match its content");
    }
    const std::uint64_t schema = parse_hex(header.at("feature_schema_id").get<std::string>());

    const std::string kind = header.at("model_kind").get<std::string>();
    const json& hyper = header.at("hyperparameters");
    if (kind == "logistic_regression" || kind == "linear_svm") {
      models::LinearModel m;
      m.kind = kind == "logistic_regression" ? models::LinearKind::kLogisticRegression
                                             : models::LinearKind::kLinearSvm;
      m.term_dimension = hyper.at("term_dimension").get<std::size_t>();
      m.weights = tensor("linear.weights").values;
      const auto& b = tensor("linear.bias").values;
      const auto& platt = tensor("linear.platt").values;
      if (b.size() != 1 || platt.size() != 2) throw Error(ErrorCode::kFormat, "bad linear tensors");
      m.bias = b[0];
      m.platt_a = platt[0];
      m.platt_c = platt[1];
      m.schema_id = schema;
      tm.model = std::move(m);
    } else {
      models::NeuralModel nm;
      const models::NeuralArch arch = arch_from_json(hyper.at("arch"));
      nm.net = models::Network(arch, 0);
      for (auto& param : nm.net.params()) {
        const Tensor& t = tensor("net." + param.name);
        if (t.values.size() != param.value.size()) {
          throw Error(ErrorCode::kFormat, "tensor net." + param.name + " has wrong size");
        }
        param.value = t.values;
      }
      nm.net.bind();
      nm.config = train_from_json(hyper.at("train"));
      nm.best_epoch = hyper.at("best_epoch").get<std::size_t>();
      nm.schema_id = schema;
      tm.model = std::move(nm);
    }
    const json& meta = header.at("metadata");
    tm.meta.trained_on = meta.at("trained_on").get<std::string>();
    tm.meta.accuracy_report_ref = meta.at("accuracy_report_ref").get<std::string>();
    tm.meta.recipe_json = meta.at("recipe").get<std::string>();
    return tm;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("bad model header: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kNotFound, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace revdec
