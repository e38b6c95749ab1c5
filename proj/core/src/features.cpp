#include "revdec/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "revdec/error.hpp"
#include "revdec/text.hpp"

namespace revdec::features {

namespace fs = std::filesystem;

double smoothed_idf(std::size_t n_docs, std::size_t doc_freq) {
  return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(doc_freq))) +
         1.0;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                       std::size_t n_docs)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_docs_(n_docs) {
  if (terms_.size() != doc_freq_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "vocabulary terms/doc_freq length mismatch");
  }
  idf_.reserve(terms_.size());
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i > 0 && !(terms_[i - 1] < terms_[i])) {
      throw Error(ErrorCode::kInvalidArgument, "vocabulary terms must be sorted and unique");
    }
    if (doc_freq_[i] < 1 || doc_freq_[i] > n_docs_) {
      throw Error(ErrorCode::kInvalidArgument, "doc_freq out of range for " + terms_[i]);
    }
    idf_.push_back(smoothed_idf(n_docs_, doc_freq_[i]));
    index_.emplace(terms_[i], i);
  }
}

std::optional<std::size_t> Vocabulary::index_of(const std::string& term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary build_vocabulary(const std::vector<Tokens>& docs,
                            std::optional<std::size_t> max_terms) {
  if (docs.empty()) throw Error(ErrorCode::kEmptyVocabulary, "no documents");
  struct Stats {
    std::size_t total = 0;
    std::size_t df = 0;
    std::size_t last_doc = SIZE_MAX;
  };
  std::unordered_map<std::string, Stats> stats;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const std::string& t : docs[d]) {
      Stats& s = stats[t];
      ++s.total;
      if (s.last_doc != d) {
        ++s.df;
        s.last_doc = d;
      }
    }
  }
  if (stats.empty()) throw Error(ErrorCode::kEmptyVocabulary, "documents contain no tokens");
  std::vector<std::pair<std::string, Stats>> items(stats.begin(), stats.end());
  if (max_terms && *max_terms < items.size()) {
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second.total != b.second.total) return a.second.total > b.second.total;
      return a.first < b.first;
    });
    items.resize(*max_terms);
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> terms;
  std::vector<std::size_t> dfs;
  terms.reserve(items.size());
  dfs.reserve(items.size());
  for (auto& [term, s] : items) {
    terms.push_back(term);
    dfs.push_back(s.df);
  }
  return Vocabulary(std::move(terms), std::move(dfs), docs.size());
}

Vocabulary build_vocabulary(const corpus::Corpus& c, std::optional<std::size_t> max_terms) {
  if (c.empty()) throw Error(ErrorCode::kEmptyVocabulary, "empty corpus");
  std::vector<Tokens> docs;
  docs.reserve(c.size());
  for (const auto& r : c.reviews()) docs.push_back(text::tokenize(r.text));
  return build_vocabulary(docs, max_terms);
}

double TermVector::l2_norm() const {
  double sq = 0;
  for (const auto& [i, w] : entries) sq += w * w;
  return std::sqrt(sq);
}

std::vector<double> TermVector::dense() const {
  std::vector<double> out(dimension, 0.0);
  for (const auto& [i, w] : entries) out[i] = w;
  return out;
}

namespace {

std::map<std::size_t, double> count_terms(const Tokens& tokens, const Vocabulary& v) {
  std::map<std::size_t, double> counts;
  for (const std::string& t : tokens) {
    if (auto idx = v.index_of(t)) counts[*idx] += 1.0;
  }
  return counts;
}

}  // namespace

TermVector tfidf_vector(const Tokens& tokens, const Vocabulary& v) {
  TermVector out{v.size(), {}};
  double sq = 0;
  for (const auto& [idx, tf] : count_terms(tokens, v)) {
    const double w = tf * v.idf(idx);
    out.entries.emplace_back(idx, w);
    sq += w * w;
  }
  if (sq > 0) {
    const double norm = std::sqrt(sq);
    for (auto& e : out.entries) e.second /= norm;
  }
  return out;
}

TermVector bow_counts(const Tokens& tokens, const Vocabulary& v) {
  TermVector out{v.size(), {}};
  for (const auto& [idx, n] : count_terms(tokens, v)) out.entries.emplace_back(idx, n);
  return out;
}

StructuralFeatures structural_features(const corpus::Review& r) {
  StructuralFeatures f;
  const Tokens words = text::tokenize_cased(r.text);
  if (words.empty()) return f;
  const double n = static_cast<double>(words.size());
  std::size_t chars = 0, caps = 0, numerals = 0;
  for (const std::string& w : words) {
    chars += text::char_count(w);
    if (text::is_capitalized(w)) ++caps;
    if (text::is_all_digits(w)) ++numerals;
  }
  const auto sentences = text::split_sentences(r.text);
  f.review_length_words = n;
  f.avg_word_length_chars = static_cast<double>(chars) / n;
  f.avg_sentence_length_words = sentences.empty() ? n : n / static_cast<double>(sentences.size());
  f.pct_capitalized_words = static_cast<double>(caps) / n;
  f.pct_numerals = static_cast<double>(numerals) / n;
  return f;
}

ReviewerProfile profile_from_reviews(const std::string& reviewer_id,
                                     std::span<const corpus::Review* const> reviews) {
  ReviewerProfile p;
  p.reviewer_id = reviewer_id;
  p.n_reviews = reviews.size();
  if (reviews.empty()) return p;
  std::map<corpus::Date, std::size_t> per_day;
  std::size_t chars = 0;
  std::vector<double> ratings;
  for (const corpus::Review* r : reviews) {
    chars += text::char_count(r->text);
    if (r->date) ++per_day[*r->date];
    if (r->rating) ratings.push_back(*r->rating);
  }
  p.max_reviews_one_day = 1;
  for (const auto& [day, n] : per_day) p.max_reviews_one_day = std::max(p.max_reviews_one_day, n);
  p.avg_review_length_chars = static_cast<double>(chars) / static_cast<double>(reviews.size());
  if (!ratings.empty()) {
    const double m = static_cast<double>(ratings.size());
    double mean = 0;
    for (double x : ratings) mean += x;
    mean /= m;
    if (ratings.size() >= 2) {
      double var = 0;
      for (double x : ratings) var += (x - mean) * (x - mean);
      p.rating_stddev = std::sqrt(var / m);
    }
    const auto pos = std::count_if(ratings.begin(), ratings.end(), [](double x) { return x >= 4; });
    const auto neg = std::count_if(ratings.begin(), ratings.end(), [](double x) { return x <= 2; });
    p.pct_positive = static_cast<double>(pos) / m;
    p.pct_negative = static_cast<double>(neg) / m;
  }
  return p;
}

std::map<std::string, ReviewerProfile> build_reviewer_profiles(
    const corpus::Corpus& c, std::span<const std::size_t> indices) {
  std::map<std::string, std::vector<const corpus::Review*>> grouped;
  for (std::size_t i : indices) {
    const corpus::Review& r = c[i];
    if (r.reviewer_id) grouped[*r.reviewer_id].push_back(&r);
  }
  std::map<std::string, ReviewerProfile> out;
  for (const auto& [id, reviews] : grouped) out.emplace(id, profile_from_reviews(id, reviews));
  return out;
}

std::map<std::string, ReviewerProfile> build_reviewer_profiles(const corpus::Corpus& c) {
  std::vector<std::size_t> all(c.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return build_reviewer_profiles(c, all);
}

std::vector<double> reviewer_feature_vector(const ReviewerProfile& p) {
  return {static_cast<double>(p.max_reviews_one_day), p.avg_review_length_chars,
          p.rating_stddev, p.pct_positive, p.pct_negative};
}

namespace {

std::ifstream open_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path.string());
  return in;
}

void trim_cr(std::string& line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
}

}  // namespace

TagLexicon load_tag_lexicon(const fs::path& path) {
  std::ifstream in = open_text(path);
  TagLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    trim_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) +
                                         ": expected term<TAB>TAG");
    }
    lex[text::to_lower(line.substr(0, tab))] = line.substr(tab + 1);
  }
  return lex;
}

std::map<std::string, double> pos_percentages(const Tokens& tokens, const TagLexicon& lexicon) {
  std::map<std::string, double> out;
  if (tokens.empty()) return out;
  for (const std::string& t : tokens) {
    auto it = lexicon.find(t);
    out[it == lexicon.end() ? std::string("UNK") : it->second] += 1.0;
  }
  for (auto& [tag, v] : out) v /= static_cast<double>(tokens.size());
  return out;
}

TermSet load_term_set(const fs::path& path) {
  std::ifstream in = open_text(path);
  TermSet set;
  std::string line;
  while (std::getline(in, line)) {
    trim_cr(line);
    if (!line.empty()) set.insert(text::to_lower(line));
  }
  return set;
}

std::pair<double, double> sentiment_percentages(const Tokens& tokens, const TermSet& pos_lex,
                                                const TermSet& neg_lex) {
  for (const std::string& t : pos_lex) {
    if (neg_lex.count(t)) {
      throw Error(ErrorCode::kLexiconConflict, "term in both sentiment lexicons: " + t);
    }
  }
  if (tokens.empty()) return {0.0, 0.0};
  double pos = 0, neg = 0;
  for (const std::string& t : tokens) {
    if (pos_lex.count(t)) pos += 1;
    if (neg_lex.count(t)) neg += 1;
  }
  const double n = static_cast<double>(tokens.size());
  return {pos / n, neg / n};
}

FeatureScaler::FeatureScaler(std::vector<double> mins, std::vector<double> maxs)
    : mins_(std::move(mins)), maxs_(std::move(maxs)) {
  if (mins_.size() != maxs_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "scaler min/max length mismatch");
  }
  for (std::size_t i = 0; i < mins_.size(); ++i) {
    if (maxs_[i] < mins_[i]) throw Error(ErrorCode::kInvalidArgument, "scaler max < min");
  }
}

FeatureScaler FeatureScaler::fit(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyFit, "cannot fit scaler on zero rows");
  std::vector<double> mins = rows.front(), maxs = rows.front();
  for (const auto& row : rows) {
    if (row.size() != mins.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "scaler rows differ in length");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      mins[i] = std::min(mins[i], row[i]);
      maxs[i] = std::max(maxs[i], row[i]);
    }
  }
  return FeatureScaler(std::move(mins), std::move(maxs));
}

std::vector<double> FeatureScaler::apply(std::span<const double> v) const {
  if (v.size() != mins_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scaler expects " + std::to_string(mins_.size()) +
                                                   " features, got " + std::to_string(v.size()));
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double range = maxs_[i] - mins_[i];
    out[i] = range > 0 ? std::clamp((v[i] - mins_[i]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

bool EmbeddingTable::insert(const std::string& term, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "embedding for " + term + " has dimension " + std::to_string(vector.size()) +
                    ", expected " + std::to_string(dimension_));
  }
  auto [it, fresh] = index_.emplace(term, rows_.size() / std::max<std::size_t>(dimension_, 1));
  if (fresh) {
    rows_.insert(rows_.end(), vector.begin(), vector.end());
  } else {
    std::copy(vector.begin(), vector.end(), rows_.begin() + it->second * dimension_);
  }
  return fresh;
}

const double* EmbeddingTable::find(const std::string& term) const {
  auto it = index_.find(term);
  return it == index_.end() ? nullptr : rows_.data() + it->second * dimension_;
}

std::vector<std::string> EmbeddingTable::terms() const {
  std::vector<std::string> out;
  out.reserve(index_.size());
  for (const auto& [t, i] : index_) out.push_back(t);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_count(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

EmbeddingLoadResult load_embeddings(const fs::path& path) {
  std::ifstream in = open_text(path);
  EmbeddingLoadResult result;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](ErrorCode code, const std::string& what) {
    throw Error(code, path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    trim_cr(line);
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2 && is_count(fields[0]) && is_count(fields[1])) {
      dim = std::stoul(std::string(fields[1]));
      result.table = EmbeddingTable(*dim);
      continue;
    }
    const std::size_t n_values = fields.size() - 1;
    if (!dim) {
      if (n_values == 0) fail(ErrorCode::kParse, "term without values");
      dim = n_values;
      result.table = EmbeddingTable(*dim);
    }
    if (n_values != *dim) {
      fail(ErrorCode::kDimensionMismatch,
           "expected " + std::to_string(*dim) + " values, found " + std::to_string(n_values));
    }
    std::vector<double> values;
    values.reserve(n_values);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      auto v = parse_real(fields[k]);
      if (!v) fail(ErrorCode::kParse, "unparsable number \"" + std::string(fields[k]) + "\"");
      values.push_back(*v);
    }
    if (!result.table.insert(std::string(fields[0]), std::move(values))) {
      ++result.duplicate_terms;
    }
  }
  return result;
}

Matrix embed_sequence(const Tokens& tokens, const EmbeddingTable& table, std::size_t max_len) {
  if (max_len < 1) throw Error(ErrorCode::kInvalidArgument, "max_len must be >= 1");
  const std::size_t d = table.dimension();
  Matrix m(max_len, d);
  const std::size_t n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) {
    if (const double* vec = table.find(tokens[i])) {
      std::copy(vec, vec + d, m.row(i).begin());
    }
  }
  return m;
}

std::vector<double> concat_features(std::span<const double> word_rep,
                                    std::span<const double> user_features) {
  std::vector<double> out;
  out.reserve(word_rep.size() + user_features.size());
  out.insert(out.end(), word_rep.begin(), word_rep.end());
  out.insert(out.end(), user_features.begin(), user_features.end());
  return out;
}

}  // namespace revdec::features
