#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace revdec::corpus {

enum class Label { kDeceptive, kGenuine, kUnknown };
enum class Source { kOpSpam, kYelpStyle, kOther };

std::string_view label_name(Label label);

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend auto operator<=>(const Date&, const Date&) = default;
};

// Parses strict ISO-8601 "YYYY-MM-DD"; returns nullopt on any violation.
std::optional<Date> parse_date(std::string_view iso);
std::string format_date(const Date& date);

struct Review {
  std::string id;
  std::string text;
  std::optional<int> rating;
  std::optional<Date> date;
  std::optional<std::string> reviewer_id;
  Label label = Label::kUnknown;
  Source source = Source::kOther;

  friend bool operator==(const Review&, const Review&) = default;
};

// Ordered reviews with unique ids. Class counts are always recomputed from
// the review list, so they cannot drift.
class Corpus {
 public:
  Corpus() = default;
  // Throws DuplicateId, or InvalidArgument for empty text / out-of-range rating.
  explicit Corpus(std::vector<Review> reviews);

  const std::vector<Review>& reviews() const { return reviews_; }
  std::size_t size() const { return reviews_.size(); }
  bool empty() const { return reviews_.empty(); }
  const Review& operator[](std::size_t i) const { return reviews_[i]; }

  std::map<Label, std::size_t> class_counts() const;
  std::size_t count(Label label) const;
  std::vector<Label> labels() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::vector<Review> reviews_;
};

struct ParseSummary {
  std::size_t files_read = 0;
  std::vector<std::filesystem::path> skipped;  // undecodable files
};

// Reads the published OpSpam tree
// {negative,positive}_polarity/{deceptive_*,truthful_*}/fold*/*.txt.
// Files are visited in sorted path order.
Corpus parse_opspam_dir(const std::filesystem::path& root, ParseSummary* summary = nullptr);

// Newline-delimited JSON review records.
Corpus parse_reviews_records(const std::filesystem::path& path);
Corpus parse_reviews_records_text(std::string_view content);

std::string serialize_record(const Review& review);
std::string serialize_records(const Corpus& corpus);
void write_reviews_records(const Corpus& corpus, const std::filesystem::path& path);

Corpus filter_by_length(const Corpus& corpus, std::size_t max_words);

// Keeps min(#deceptive, #genuine) reviews of each class, sampled uniformly
// without replacement; original order is preserved. Unknown-label reviews are
// dropped.
Corpus balance_classes(const Corpus& corpus, std::uint64_t seed);

struct KFoldTag {
  std::size_t fold_no;
  std::size_t k;
};
struct BootstrapTag {
  std::size_t rep_no;
};

struct Split {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::variant<KFoldTag, BootstrapTag> kind;

  std::string name() const;
};

std::vector<Split> stratified_kfold(const std::vector<Label>& labels, std::size_t k,
                                    std::uint64_t seed);

// Per repeat, each class draws its own size with replacement from its own
// members; the test set is the out-of-bag remainder. Repeats whose test set
// is empty or single-class are redrawn up to kBootstrapRetries times.
inline constexpr std::size_t kBootstrapRetries = 100;
std::vector<Split> bootstrap_splits(const std::vector<Label>& labels, std::size_t repeats,
                                    std::uint64_t seed);

}  // namespace revdec::corpus
