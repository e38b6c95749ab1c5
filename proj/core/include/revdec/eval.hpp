#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revdec/corpus.hpp"
#include "revdec/recipe.hpp"

namespace revdec::eval {

using corpus::Label;

struct Protocol {
  enum class Kind { kKFold, kBootstrap };
  Kind kind = Kind::kKFold;
  std::size_t count = 5;  // k for k-fold, repeats for bootstrap
  std::uint64_t seed = 1;

  static Protocol kfold(std::size_t k, std::uint64_t seed) { return {Kind::kKFold, k, seed}; }
  static Protocol bootstrap(std::size_t repeats, std::uint64_t seed) {
    return {Kind::kBootstrap, repeats, seed};
  }
  std::string name() const;
};

// Deceptive is the positive class.
struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  double accuracy() const;
  Confusion& operator+=(const Confusion& o);
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

// Throws ShapeError on length mismatch.
Confusion confusion_matrix(std::span<const Label> predicted, std::span<const Label> gold);

// Unset fields mean the partition was empty.
struct ErrorStats {
  std::optional<double> avg_words_per_sentence_correct;
  std::optional<double> avg_words_per_sentence_incorrect;
  std::optional<double> avg_review_words_correct;
  std::optional<double> avg_review_words_incorrect;
  std::optional<double> avg_word_length_correct;
  std::optional<double> avg_word_length_incorrect;

  friend bool operator==(const ErrorStats&, const ErrorStats&) = default;
};

// Words per sentence and word length are pooled over all sentences / tokens
// of a partition; review length is the mean over its reviews.
ErrorStats error_analysis(std::span<const Label> predicted, std::span<const Label> gold,
                          std::span<const corpus::Review> reviews);

struct SplitResult {
  std::string name;
  double accuracy = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Confusion confusion;
  std::string fingerprint;  // pipeline schema + trained parameters
};

struct EvalReport {
  std::string protocol;
  std::uint64_t seed = 0;
  std::string model;
  std::vector<SplitResult> splits;
  double mean_accuracy = 0;
  Confusion confusion;
  ErrorStats error_stats;

  std::vector<double> per_split_accuracy() const;
};

struct EvalOptions {
  const features::EmbeddingTable* embeddings = nullptr;
  std::size_t threads = 1;
};

// Per split: fit pipeline and model on the training partition, score the test
// partition. Training rows see reviewer profiles from the training partition;
// test rows see profiles from the whole corpus. Splits may run in parallel;
// results are merged in split order. Training errors are rethrown with the
// split name prepended.
EvalReport run_protocol(const corpus::Corpus& corpus, const Recipe& recipe,
                        const Protocol& protocol, const EvalOptions& options = {});

std::uint64_t model_fingerprint(const TrainedModel& model);

// Machine-readable record (stable key order, no timing data).
std::string report_to_json(const EvalReport& report);
// Human-readable accuracy table.
std::string report_table(const EvalReport& report);

}  // namespace revdec::eval
