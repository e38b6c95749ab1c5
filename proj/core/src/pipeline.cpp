#include "revdec/pipeline.hpp"

#include "revdec/error.hpp"
#include "revdec/hash.hpp"
#include "revdec/text.hpp"

namespace revdec {

std::string_view representation_name(Representation r) {
  switch (r) {
    case Representation::kTfidf: return "tfidf";
    case Representation::kCounts: return "counts";
    case Representation::kEmbeddings: return "embeddings";
    case Representation::kOneHot: return "onehot";
  }
  return "unknown";
}

std::optional<Representation> parse_representation(std::string_view name) {
  for (auto r : {Representation::kTfidf, Representation::kCounts, Representation::kEmbeddings,
                 Representation::kOneHot}) {
    if (representation_name(r) == name) return r;
  }
  return std::nullopt;
}

std::vector<double> raw_user_features(
    const corpus::Review& review,
    const std::map<std::string, features::ReviewerProfile>& profiles) {
  if (review.reviewer_id) {
    if (auto it = profiles.find(*review.reviewer_id); it != profiles.end()) {
      return features::reviewer_feature_vector(it->second);
    }
  }
  const corpus::Review* self = &review;
  return features::reviewer_feature_vector(features::profile_from_reviews(
      review.reviewer_id.value_or(review.id), std::span<const corpus::Review* const>(&self, 1)));
}

Pipeline::Pipeline(PipelineConfig config, features::Vocabulary vocab,
                   std::optional<features::FeatureScaler> scaler,
                   features::EmbeddingTable embeddings)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      scaler_(std::move(scaler)),
      embeddings_(std::move(embeddings)) {
  if (config_.user_features && !scaler_) {
    throw Error(ErrorCode::kInvalidArgument, "user features need a fitted scaler");
  }
  Fnv1a h;
  h.update(representation_name(config_.representation));
  h.update(static_cast<std::uint64_t>(config_.max_terms.value_or(0)));
  h.update(static_cast<std::uint64_t>(config_.user_features));
  h.update(static_cast<std::uint64_t>(config_.max_len));
  h.update(static_cast<std::uint64_t>(vocab_.n_docs()));
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    h.update(vocab_.term(i)).update(std::string_view("\0", 1));
    h.update(static_cast<std::uint64_t>(vocab_.doc_freq(i)));
  }
  if (scaler_) {
    for (double v : scaler_->mins()) h.update(v);
    for (double v : scaler_->maxs()) h.update(v);
  }
  h.update(static_cast<std::uint64_t>(embeddings_.dimension()));
  for (const std::string& t : embeddings_.terms()) {
    h.update(t);
    const double* row = embeddings_.find(t);
    for (std::size_t k = 0; k < embeddings_.dimension(); ++k) h.update(row[k]);
  }
  schema_id_ = h.digest();
}

Pipeline Pipeline::fit(const PipelineConfig& config, const corpus::Corpus& corpus,
                       std::span<const std::size_t> train_idx,
                       const features::EmbeddingTable* embeddings) {
  if (train_idx.empty()) throw Error(ErrorCode::kEmptyCorpus, "no training reviews");
  std::vector<features::Tokens> docs;
  docs.reserve(train_idx.size());
  for (std::size_t i : train_idx) docs.push_back(text::tokenize(corpus[i].text));
  features::Vocabulary vocab = features::build_vocabulary(docs, config.max_terms);

  std::optional<features::FeatureScaler> scaler;
  if (config.user_features) {
    const auto profiles = features::build_reviewer_profiles(corpus, train_idx);
    std::vector<std::vector<double>> rows;
    rows.reserve(train_idx.size());
    for (std::size_t i : train_idx) rows.push_back(raw_user_features(corpus[i], profiles));
    scaler = features::FeatureScaler::fit(rows);
  }

  features::EmbeddingTable table;
  if (config.representation == Representation::kEmbeddings) {
    if (embeddings == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "embedding representation needs an embedding file");
    }
    table = features::EmbeddingTable(embeddings->dimension());
    for (const std::string& term : vocab.terms()) {
      if (const double* row = embeddings->find(term)) {
        table.insert(term, std::vector<double>(row, row + embeddings->dimension()));
      }
    }
  }
  return Pipeline(config, std::move(vocab), std::move(scaler), std::move(table));
}

models::Example Pipeline::vectorize(std::string_view text, std::span<const double> raw_user) const {
  models::Example x;
  x.schema_id = schema_id_;
  const features::Tokens tokens = text::tokenize(text);
  switch (config_.representation) {
    case Representation::kTfidf:
      x.terms = features::tfidf_vector(tokens, vocab_);
      break;
    case Representation::kCounts:
      x.terms = features::bow_counts(tokens, vocab_);
      break;
    case Representation::kEmbeddings:
      x.sequence = features::embed_sequence(tokens, embeddings_, config_.max_len);
      x.sequence_length = std::min(tokens.size(), config_.max_len);
      break;
    case Representation::kOneHot: {
      const std::size_t n = std::min(tokens.size(), config_.max_len);
      x.token_ids.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        x.token_ids.push_back(vocab_.index_of(tokens[i]).value_or(models::kOutOfVocabulary));
      }
      x.sequence_length = n;
      break;
    }
  }
  if (config_.user_features) {
    x.user = raw_user.empty() ? std::vector<double>(features::kReviewerFeatureCount, 0.0)
                              : scaler_->apply(raw_user);
  }
  return x;
}

}  // namespace revdec
