#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "revdec/corpus.hpp"
#include "revdec/features.hpp"
#include "revdec/models/types.hpp"

namespace revdec {

enum class Representation {
  kTfidf,       // L2-normalized TF-IDF term vector
  kCounts,      // raw bag-of-words counts
  kEmbeddings,  // max_len x D embedding rows
  kOneHot,      // token ids over the vocabulary (one-hot sequence)
};

std::string_view representation_name(Representation r);
std::optional<Representation> parse_representation(std::string_view name);

struct PipelineConfig {
  Representation representation = Representation::kTfidf;
  std::optional<std::size_t> max_terms;
  bool user_features = false;
  std::size_t max_len = features::kDefaultMaxLen;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Raw (unscaled) reviewer feature vector for a review: its reviewer's profile
// if known, otherwise a profile of the review alone.
std::vector<double> raw_user_features(const corpus::Review& review,
                                      const std::map<std::string, features::ReviewerProfile>&
                                          profiles);

// Fitted feature extraction: vocabulary, IDF, scaler and (for embedding
// input) the embedding rows of the vocabulary. Immutable once fitted.
class Pipeline {
 public:
  Pipeline() = default;
  Pipeline(PipelineConfig config, features::Vocabulary vocab,
           std::optional<features::FeatureScaler> scaler, features::EmbeddingTable embeddings);

  // Fits on the reviews at train_idx only. Reviewer profiles are built from
  // the same training reviews. Embedding input requires `embeddings`.
  static Pipeline fit(const PipelineConfig& config, const corpus::Corpus& corpus,
                      std::span<const std::size_t> train_idx,
                      const features::EmbeddingTable* embeddings);

  // raw_user is ignored unless the pipeline uses user features; when it
  // does, an empty raw_user yields the neutral all-zero scaled vector.
  models::Example vectorize(std::string_view text, std::span<const double> raw_user) const;

  const PipelineConfig& config() const { return config_; }
  const features::Vocabulary& vocabulary() const { return vocab_; }
  const std::optional<features::FeatureScaler>& scaler() const { return scaler_; }
  const features::EmbeddingTable& embeddings() const { return embeddings_; }
  std::uint64_t schema_id() const { return schema_id_; }
  std::size_t user_dim() const { return config_.user_features ? features::kReviewerFeatureCount : 0; }

 private:
  PipelineConfig config_;
  features::Vocabulary vocab_;
  std::optional<features::FeatureScaler> scaler_;
  features::EmbeddingTable embeddings_;
  std::uint64_t schema_id_ = 0;
};

}  // namespace revdec
