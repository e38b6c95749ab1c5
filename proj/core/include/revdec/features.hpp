#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "revdec/corpus.hpp"
#include "revdec/matrix.hpp"

namespace revdec::features {

using Tokens = std::vector<std::string>;

// Smoothed inverse document frequency: ln((1 + n_docs) / (1 + df)) + 1.
double smoothed_idf(std::size_t n_docs, std::size_t doc_freq);

// Term -> dense index, assigned in lexicographic term order.
class Vocabulary {
 public:
  Vocabulary() = default;
  // terms must be sorted and unique; doc_freq aligned with terms.
  Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
             std::size_t n_docs);

  std::size_t size() const { return terms_.size(); }
  std::size_t n_docs() const { return n_docs_; }
  std::optional<std::size_t> index_of(const std::string& term) const;
  const std::string& term(std::size_t index) const { return terms_[index]; }
  const std::vector<std::string>& terms() const { return terms_; }
  std::size_t doc_freq(std::size_t index) const { return doc_freq_[index]; }
  const std::vector<std::size_t>& doc_freqs() const { return doc_freq_; }
  double idf(std::size_t index) const { return idf_[index]; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.terms_ == b.terms_ && a.doc_freq_ == b.doc_freq_ && a.n_docs_ == b.n_docs_;
  }

 private:
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::vector<double> idf_;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

// Keeps the max_terms most frequent terms (total count; ties broken
// lexicographically). Throws EmptyVocabulary when no token is present.
Vocabulary build_vocabulary(const std::vector<Tokens>& docs,
                            std::optional<std::size_t> max_terms = std::nullopt);
Vocabulary build_vocabulary(const corpus::Corpus& c,
                            std::optional<std::size_t> max_terms = std::nullopt);

// Sparse vector; entries sorted by strictly increasing index.
struct TermVector {
  std::size_t dimension = 0;
  std::vector<std::pair<std::size_t, double>> entries;

  double l2_norm() const;
  std::vector<double> dense() const;

  friend bool operator==(const TermVector&, const TermVector&) = default;
};

// Raw count x idf, then L2-normalized. OOV tokens are ignored.
TermVector tfidf_vector(const Tokens& tokens, const Vocabulary& v);
TermVector bow_counts(const Tokens& tokens, const Vocabulary& v);

struct StructuralFeatures {
  double review_length_words = 0;
  double avg_word_length_chars = 0;
  double avg_sentence_length_words = 0;
  double pct_capitalized_words = 0;
  double pct_numerals = 0;
};

StructuralFeatures structural_features(const corpus::Review& r);

struct ReviewerProfile {
  std::string reviewer_id;
  std::size_t n_reviews = 0;
  std::size_t max_reviews_one_day = 0;
  double avg_review_length_chars = 0;
  double rating_stddev = 0;
  double pct_positive = 0;
  double pct_negative = 0;
};

inline constexpr std::size_t kReviewerFeatureCount = 5;
inline constexpr std::array<const char*, kReviewerFeatureCount> kReviewerFeatureNames = {
    "max_reviews_one_day", "avg_review_length_chars", "rating_stddev", "pct_positive",
    "pct_negative"};

// Positive rating: >= 4 stars; negative: <= 2 stars.
ReviewerProfile profile_from_reviews(const std::string& reviewer_id,
                                     std::span<const corpus::Review* const> reviews);
std::map<std::string, ReviewerProfile> build_reviewer_profiles(const corpus::Corpus& c);
// Restricted to the given review indices.
std::map<std::string, ReviewerProfile> build_reviewer_profiles(
    const corpus::Corpus& c, std::span<const std::size_t> indices);

std::vector<double> reviewer_feature_vector(const ReviewerProfile& p);

using TagLexicon = std::unordered_map<std::string, std::string>;
TagLexicon load_tag_lexicon(const std::filesystem::path& path);
std::map<std::string, double> pos_percentages(const Tokens& tokens, const TagLexicon& lexicon);

using TermSet = std::set<std::string>;
TermSet load_term_set(const std::filesystem::path& path);
// Throws LexiconConflict if the lexicons overlap.
std::pair<double, double> sentiment_percentages(const Tokens& tokens, const TermSet& pos_lex,
                                                const TermSet& neg_lex);

// Min-max scaling to [0, 1], fit on training rows only.
class FeatureScaler {
 public:
  FeatureScaler() = default;
  FeatureScaler(std::vector<double> mins, std::vector<double> maxs);

  static FeatureScaler fit(std::span<const std::vector<double>> rows);

  // Values outside the fitted range are clamped; constant features map to 0.
  std::vector<double> apply(std::span<const double> v) const;

  std::size_t dimension() const { return mins_.size(); }
  const std::vector<double>& mins() const { return mins_; }
  const std::vector<double>& maxs() const { return maxs_; }

  friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;

 private:
  std::vector<double> mins_;
  std::vector<double> maxs_;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return index_.size(); }
  // Returns false and overwrites when the term already exists.
  bool insert(const std::string& term, std::vector<double> vector);
  const double* find(const std::string& term) const;
  std::vector<std::string> terms() const;

 private:
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> rows_;
};

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::size_t duplicate_terms = 0;
};

// Text format: optional "<count> <dim>" header, then "term v1 ... vD" lines.
EmbeddingLoadResult load_embeddings(const std::filesystem::path& path);

inline constexpr std::size_t kDefaultMaxLen = 320;

// max_len x D; OOV rows and padding rows are zero.
Matrix embed_sequence(const Tokens& tokens, const EmbeddingTable& table,
                      std::size_t max_len = kDefaultMaxLen);

std::vector<double> concat_features(std::span<const double> word_rep,
                                    std::span<const double> user_features);

}  // namespace revdec::features
