#include "revdec/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "revdec/error.hpp"
#include "revdec/rng.hpp"
#include "revdec/text.hpp"

namespace revdec::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view label_name(Label label) {
  switch (label) {
    case Label::kDeceptive: return "deceptive";
    case Label::kGenuine: return "genuine";
    case Label::kUnknown: return "unknown";
  }
  return "unknown";
}

std::optional<Date> parse_date(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t b, std::size_t n) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = b; i < b + n; ++i) {
      if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
      v = v * 10 + (iso[i] - '0');
    }
    return v;
  };
  const auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
  if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1) return std::nullopt;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (*y % 4 == 0 && *y % 100 != 0) || *y % 400 == 0;
  const int max_day = kDays[*m - 1] + ((*m == 2 && leap) ? 1 : 0);
  if (*d > max_day) return std::nullopt;
  return Date{*y, *m, *d};
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", date.year, date.month, date.day);
  return buf;
}

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  });
}

void validate(const Review& r) {
  if (blank(r.text)) {
    throw Error(ErrorCode::kInvalidArgument, "review " + r.id + ": empty text");
  }
  if (r.rating && (*r.rating < 1 || *r.rating > 5)) {
    throw Error(ErrorCode::kInvalidArgument, "review " + r.id + ": rating out of [1,5]");
  }
}

}  // namespace

Corpus::Corpus(std::vector<Review> reviews) : reviews_(std::move(reviews)) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(reviews_.size());
  for (const Review& r : reviews_) {
    validate(r);
    if (!seen.insert(r.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate review id: " + r.id);
    }
  }
}

std::map<Label, std::size_t> Corpus::class_counts() const {
  std::map<Label, std::size_t> counts;
  for (const Review& r : reviews_) ++counts[r.label];
  return counts;
}

std::size_t Corpus::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      reviews_.begin(), reviews_.end(), [&](const Review& r) { return r.label == label; }));
}

std::vector<Label> Corpus::labels() const {
  std::vector<Label> out;
  out.reserve(reviews_.size());
  for (const Review& r : reviews_) out.push_back(r.label);
  return out;
}

// ---------------------------------------------------------------------------
// OpSpam

namespace {

std::optional<Label> opspam_label(const std::string& dir_name) {
  if (dir_name.rfind("deceptive", 0) == 0) return Label::kDeceptive;
  if (dir_name.rfind("truthful", 0) == 0) return Label::kGenuine;
  return std::nullopt;
}

std::vector<fs::path> sorted_txt_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Corpus parse_opspam_dir(const fs::path& root, ParseSummary* summary) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::kNotFound, "OpSpam root not found: " + root.string());
  }
  ParseSummary local;
  std::vector<Review> reviews;
  bool any_polarity = false;
  for (const char* polarity : {"negative_polarity", "positive_polarity"}) {
    const fs::path pdir = root / polarity;
    if (!fs::is_directory(pdir)) continue;
    any_polarity = true;
    std::size_t files_here = 0;
    for (const fs::path& cdir : sorted_subdirs(pdir)) {
      const auto label = opspam_label(cdir.filename().string());
      if (!label) continue;
      for (const fs::path& file : sorted_txt_files(cdir)) {
        ++files_here;
        ++local.files_read;
        std::string content = read_file(file);
        if (!text::is_valid_utf8(content) || blank(content)) {
          local.skipped.push_back(file);
          continue;
        }
        while (!content.empty() && (content.back() == '\n' || content.back() == '\r')) {
          content.pop_back();
        }
        Review r;
        r.id = fs::relative(file, root).generic_string();
        r.text = std::move(content);
        r.label = *label;
        r.source = Source::kOpSpam;
        reviews.push_back(std::move(r));
      }
    }
    if (files_here == 0) {
      throw Error(ErrorCode::kEmptyCorpus, std::string("no review files under ") + polarity);
    }
  }
  if (!any_polarity) {
    throw Error(ErrorCode::kEmptyCorpus, "no polarity directories under " + root.string());
  }
  if (summary) *summary = std::move(local);
  return Corpus(std::move(reviews));
}

// ---------------------------------------------------------------------------
// Record format

namespace {

[[noreturn]] void record_error(std::size_t line_no, const std::string& what) {
  throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": " + what);
}

Review parse_record(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    record_error(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) record_error(line_no, "record is not an object");
  Review r;
  r.source = Source::kYelpStyle;
  auto req_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) record_error(line_no, std::string("missing field \"") + key + "\"");
    if (!it->is_string()) record_error(line_no, std::string("\"") + key + "\" must be a string");
    return it->get<std::string>();
  };
  r.id = req_string("id");
  r.text = req_string("text");
  if (blank(r.text)) record_error(line_no, "\"text\" is empty");
  if (auto it = j.find("rating"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) record_error(line_no, "\"rating\" must be an integer");
    const int rating = it->get<int>();
    if (rating < 1 || rating > 5) record_error(line_no, "\"rating\" out of range 1..5");
    r.rating = rating;
  }
  if (auto it = j.find("date"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) record_error(line_no, "\"date\" must be a string");
    r.date = parse_date(it->get<std::string>());
    if (!r.date) record_error(line_no, "\"date\" is not YYYY-MM-DD");
  }
  if (auto it = j.find("reviewer_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) record_error(line_no, "\"reviewer_id\" must be a string");
    r.reviewer_id = it->get<std::string>();
  }
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) {
    const std::string label = it->is_string() ? it->get<std::string>() : std::string();
    if (label == "deceptive") {
      r.label = Label::kDeceptive;
    } else if (label == "genuine") {
      r.label = Label::kGenuine;
    } else {
      record_error(line_no, "\"label\" must be \"deceptive\" or \"genuine\"");
    }
  }
  return r;
}

}  // namespace

Corpus parse_reviews_records_text(std::string_view content) {
  std::vector<Review> reviews;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? content.size() : nl;
    std::string line(content.substr(pos, end - pos));
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!blank(line)) {
      Review r = parse_record(line, line_no);
      if (!ids.insert(r.id).second) {
        throw Error(ErrorCode::kDuplicateId,
                    "line " + std::to_string(line_no) + ": duplicate id " + r.id);
      }
      reviews.push_back(std::move(r));
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return Corpus(std::move(reviews));
}

Corpus parse_reviews_records(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kNotFound, "no such file: " + path.string());
  return parse_reviews_records_text(read_file(path));
}

std::string serialize_record(const Review& r) {
  json j;
  j["id"] = r.id;
  j["text"] = r.text;
  if (r.rating) j["rating"] = *r.rating;
  if (r.date) j["date"] = format_date(*r.date);
  if (r.reviewer_id) j["reviewer_id"] = *r.reviewer_id;
  if (r.label != Label::kUnknown) j["label"] = std::string(label_name(r.label));
  return j.dump();
}

std::string serialize_records(const Corpus& corpus) {
  std::string out;
  for (const Review& r : corpus.reviews()) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

void write_reviews_records(const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kNotFound, "cannot write " + path.string());
  out << serialize_records(corpus);
}

// ---------------------------------------------------------------------------
// Filtering and balancing

Corpus filter_by_length(const Corpus& corpus, std::size_t max_words) {
  if (max_words < 1) throw Error(ErrorCode::kInvalidArgument, "max_words must be >= 1");
  std::vector<Review> kept;
  for (const Review& r : corpus.reviews()) {
    if (text::tokenize(r.text).size() <= max_words) kept.push_back(r);
  }
  return Corpus(std::move(kept));
}

Corpus balance_classes(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::size_t> dec, gen;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].label == Label::kDeceptive) dec.push_back(i);
    if (corpus[i].label == Label::kGenuine) gen.push_back(i);
  }
  if (dec.empty() || gen.empty()) {
    throw Error(ErrorCode::kClassMissing,
                dec.empty() ? "no deceptive reviews" : "no genuine reviews");
  }
  const std::size_t per_class = std::min(dec.size(), gen.size());
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto* members : {&dec, &gen}) {
    // Partial Fisher-Yates: the first per_class slots become the sample.
    for (std::size_t i = 0; i < per_class; ++i) {
      std::swap((*members)[i], (*members)[i + rng.index(members->size() - i)]);
    }
    chosen.insert(chosen.end(), members->begin(), members->begin() + per_class);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<Review> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(corpus[i]);
  return Corpus(std::move(out));
}

// ---------------------------------------------------------------------------
// Splits

std::string Split::name() const {
  if (const auto* kf = std::get_if<KFoldTag>(&kind)) {
    return "fold " + std::to_string(kf->fold_no + 1) + "/" + std::to_string(kf->k);
  }
  return "bootstrap " + std::to_string(std::get<BootstrapTag>(kind).rep_no + 1);
}

namespace {

std::map<Label, std::vector<std::size_t>> members_by_class(const std::vector<Label>& labels) {
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  return by_class;
}

}  // namespace

std::vector<Split> stratified_kfold(const std::vector<Label>& labels, std::size_t k,
                                    std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k must be >= 2");
  auto by_class = members_by_class(labels);
  for (const auto& [label, members] : by_class) {
    if (members.size() < k) {
      throw Error(ErrorCode::kStratificationImpossible,
                  "class " + std::string(label_name(label)) + " has " +
                      std::to_string(members.size()) + " members, fewer than k=" +
                      std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> fold_of(labels.size());
  // Round-robin continues across classes so total fold sizes also stay within 1.
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      fold_of[idx] = next;
      next = (next + 1) % k;
    }
  }
  std::vector<Split> splits(k);
  for (std::size_t f = 0; f < k; ++f) splits[f].kind = KFoldTag{f, k};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? splits[f].test_idx : splits[f].train_idx).push_back(i);
    }
  }
  return splits;
}

std::vector<Split> bootstrap_splits(const std::vector<Label>& labels, std::size_t repeats,
                                    std::uint64_t seed) {
  if (repeats < 1) throw Error(ErrorCode::kInvalidArgument, "repeats must be >= 1");
  if (labels.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 samples");
  const auto by_class = members_by_class(labels);
  if (by_class.size() < 2) {
    throw Error(ErrorCode::kClassMissing, "bootstrap needs at least two classes");
  }
  Rng rng(seed);
  std::vector<Split> splits;
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    bool ok = false;
    for (std::size_t attempt = 0; attempt < kBootstrapRetries && !ok; ++attempt) {
      Split s;
      s.kind = BootstrapTag{rep};
      std::vector<bool> drawn(labels.size(), false);
      for (const auto& [label, members] : by_class) {
        for (std::size_t d = 0; d < members.size(); ++d) {
          const std::size_t idx = members[rng.index(members.size())];
          s.train_idx.push_back(idx);
          drawn[idx] = true;
        }
      }
      std::sort(s.train_idx.begin(), s.train_idx.end());
      std::set<Label> test_classes;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!drawn[i]) {
          s.test_idx.push_back(i);
          test_classes.insert(labels[i]);
        }
      }
      if (test_classes.size() >= 2) {
        splits.push_back(std::move(s));
        ok = true;
      }
    }
    if (!ok) {
      throw Error(ErrorCode::kDegenerateResample,
                  "bootstrap repeat " + std::to_string(rep + 1) + ": no resample with a "
                  "two-class out-of-bag set after " + std::to_string(kBootstrapRetries) +
                  " attempts");
    }
  }
  return splits;
}

}  // namespace revdec::corpus
