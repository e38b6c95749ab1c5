#include "revdec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "revdec/rng.hpp"

namespace revdec::synthetic {

using corpus::Date;
using corpus::Label;
using corpus::Review;

namespace {

constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "l", "m", "n",  "p",
                                   "r", "s", "t", "v", "w", "st", "tr", "pl", "gr", "ch"};
constexpr const char* kNuclei[] = {"a", "e", "i", "o", "u", "ea", "ou", "ai"};
constexpr const char* kCodas[] = {"", "n", "r", "s", "t", "l", "nd", "st"};

std::vector<std::string> make_words(std::size_t n, Rng& rng) {
  std::vector<std::string> words;
  while (words.size() < n) {
    std::string w;
    const std::size_t syllables = 1 + rng.index(3);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng.index(std::size(kOnsets))];
      w += kNuclei[rng.index(std::size(kNuclei))];
    }
    w += kCodas[rng.index(std::size(kCodas))];
    if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
  }
  return words;
}

// Zipf-distributed index sampler over n items.
class Zipf {
 public:
  explicit Zipf(std::size_t n) : cdf_(n) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) cdf_[i] = total += 1.0 / static_cast<double>(i + 1);
    for (double& c : cdf_) c /= total;
  }
  std::size_t sample(Rng& rng) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), rng.uniform());
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

struct TextModel {
  std::vector<std::string> common;
  std::vector<std::string> deceptive_lean;
  std::vector<std::string> genuine_lean;
  Zipf zipf;
  double signal;

  std::string write(Label label, std::size_t n_words, Rng& rng) const {
    const auto& lean = label == Label::kDeceptive ? deceptive_lean : genuine_lean;
    std::string out;
    std::size_t in_sentence = 0;
    std::size_t sentence_len = 6 + rng.index(12);
    for (std::size_t i = 0; i < n_words; ++i) {
      std::string w = rng.uniform() < signal ? lean[rng.index(lean.size())]
                                             : common[zipf.sample(rng)];
      if (in_sentence == 0) {
        if (!out.empty()) out += ' ';
        w[0] = static_cast<char>(w[0] - 'a' + 'A');
      } else {
        out += ' ';
      }
      out += w;
      if (++in_sentence == sentence_len || i + 1 == n_words) {
        out += rng.uniform() < 0.15 ? "!" : ".";
        in_sentence = 0;
        sentence_len = 6 + rng.index(12);
      }
    }
    return out;
  }
};

Date random_date(Rng& rng) {
  return Date{2015 + static_cast<int>(rng.index(4)), 1 + static_cast<int>(rng.index(12)),
              1 + static_cast<int>(rng.index(28))};
}

}  // namespace

corpus::Corpus generate_yelp_style(const YelpStyleConfig& config) {
  Rng rng(config.seed);
  const std::size_t lean_size = std::max<std::size_t>(10, config.vocabulary_size / 20);
  std::vector<std::string> words = make_words(config.vocabulary_size + 2 * lean_size, rng);
  TextModel tm{{words.begin(), words.begin() + static_cast<std::ptrdiff_t>(config.vocabulary_size)},
               {words.begin() + static_cast<std::ptrdiff_t>(config.vocabulary_size),
                words.begin() + static_cast<std::ptrdiff_t>(config.vocabulary_size + lean_size)},
               {words.begin() + static_cast<std::ptrdiff_t>(config.vocabulary_size + lean_size),
                words.end()},
               Zipf(config.vocabulary_size),
               config.text_signal};

  std::vector<Review> reviews;
  std::size_t reviewer_no = 0;
  auto add = [&](Label label, std::size_t n_words, int rating, const Date& date,
                 const std::string& reviewer) {
    Review r;
    r.id = "syn-" + std::to_string(reviews.size());
    r.text = tm.write(label, n_words, rng);
    r.rating = rating;
    r.date = date;
    r.reviewer_id = reviewer;
    r.label = label;
    r.source = corpus::Source::kYelpStyle;
    reviews.push_back(std::move(r));
  };

  // Deceptive: burst accounts posting 3-5 short, extreme reviews on one day,
  // plus a share of ordinary-looking single-review accounts.
  std::size_t deceptive = 0;
  while (deceptive < config.reviews_per_class) {
    const std::string reviewer = "u" + std::to_string(reviewer_no++);
    if (rng.uniform() < config.stealth_fraction) {
      add(Label::kDeceptive, 50 + rng.index(200), 1 + static_cast<int>(rng.index(5)),
          random_date(rng), reviewer);
      ++deceptive;
      continue;
    }
    const int rating = rng.uniform() < 0.8 ? 5 : 1;
    const Date day = random_date(rng);
    const std::size_t burst =
        std::min(3 + rng.index(3), config.reviews_per_class - deceptive);
    for (std::size_t k = 0; k < burst; ++k) {
      add(Label::kDeceptive, 30 + rng.index(150), rating, day, reviewer);
      ++deceptive;
    }
  }
  // Genuine: accounts with 1-4 longer reviews on distinct days, mixed ratings.
  std::size_t genuine = 0;
  while (genuine < config.reviews_per_class) {
    const std::string reviewer = "u" + std::to_string(reviewer_no++);
    const std::size_t n = std::min(1 + rng.index(4), config.reviews_per_class - genuine);
    std::vector<Date> days;
    while (days.size() < n) {
      const Date d = random_date(rng);
      if (std::find(days.begin(), days.end(), d) == days.end()) days.push_back(d);
    }
    for (const Date& d : days) {
      add(Label::kGenuine, 50 + rng.index(250), 1 + static_cast<int>(rng.index(5)), d, reviewer);
      ++genuine;
    }
  }
  // Interleave so file order carries no label information.
  std::vector<std::size_t> order(reviews.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<Review> shuffled;
  shuffled.reserve(reviews.size());
  for (std::size_t i : order) shuffled.push_back(std::move(reviews[i]));
  return corpus::Corpus(std::move(shuffled));
}

}  // namespace revdec::synthetic
