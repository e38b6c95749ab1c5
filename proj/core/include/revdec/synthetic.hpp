#pragma once

#include <cstddef>
#include <cstdint>

#include "revdec/corpus.hpp"

namespace revdec::synthetic {

// Generator for a labelled Yelp-style corpus. Deceptive reviews mostly come
// from burst reviewers (several reviews on one day, extreme ratings, short
// texts); genuine reviewers post longer reviews on distinct days with varied
// ratings. Word choice carries only a weak class signal, so behavioural
// features matter.
struct YelpStyleConfig {
  std::size_t reviews_per_class = 1000;
  std::uint64_t seed = 1;
  std::size_t vocabulary_size = 800;
  // Probability that a token is drawn from the class-leaning word list.
  double text_signal = 0.01;
  // Fraction of deceptive reviews written by single-review accounts that
  // look behaviourally ordinary.
  double stealth_fraction = 0.2;
};

corpus::Corpus generate_yelp_style(const YelpStyleConfig& config);

}  // namespace revdec::synthetic
