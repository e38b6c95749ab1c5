#include "revdec/eval.hpp"

#include <cstdio>
#include <exception>
#include <future>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "revdec/error.hpp"
#include "revdec/hash.hpp"
#include "revdec/text.hpp"

namespace revdec::eval {

using nlohmann::json;

std::string Protocol::name() const {
  return (kind == Kind::kKFold ? "kfold-" : "bootstrap-") + std::to_string(count);
}

double Confusion::accuracy() const {
  return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

Confusion confusion_matrix(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size()) {
    throw Error(ErrorCode::kShape, "predictions and gold labels differ in length");
  }
  Confusion c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predicted[i] == Label::kDeceptive;
    const bool g = gold[i] == Label::kDeceptive;
    if (p && g) ++c.tp;
    else if (p && !g) ++c.fp;
    else if (!p && !g) ++c.tn;
    else ++c.fn;
  }
  return c;
}

ErrorStats error_analysis(std::span<const Label> predicted, std::span<const Label> gold,
                          std::span<const corpus::Review> reviews) {
  if (predicted.size() != gold.size() || gold.size() != reviews.size()) {
    throw Error(ErrorCode::kShape, "error_analysis inputs differ in length");
  }
  struct Acc {
    double sentence_words = 0, sentences = 0, review_words = 0, reviews = 0, chars = 0, tokens = 0;
  } acc[2];
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    Acc& a = acc[predicted[i] == gold[i] ? 0 : 1];
    const std::string& t = reviews[i].text;
    for (const std::string& s : text::split_sentences(t)) {
      a.sentence_words += static_cast<double>(text::tokenize(s).size());
      a.sentences += 1;
    }
    const auto tokens = text::tokenize(t);
    a.review_words += static_cast<double>(tokens.size());
    a.reviews += 1;
    for (const auto& tok : tokens) a.chars += static_cast<double>(text::char_count(tok));
    a.tokens += static_cast<double>(tokens.size());
  }
  auto ratio = [](double num, double den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return num / den;
  };
  ErrorStats s;
  s.avg_words_per_sentence_correct = ratio(acc[0].sentence_words, acc[0].sentences);
  s.avg_words_per_sentence_incorrect = ratio(acc[1].sentence_words, acc[1].sentences);
  s.avg_review_words_correct = ratio(acc[0].review_words, acc[0].reviews);
  s.avg_review_words_incorrect = ratio(acc[1].review_words, acc[1].reviews);
  s.avg_word_length_correct = ratio(acc[0].chars, acc[0].tokens);
  s.avg_word_length_incorrect = ratio(acc[1].chars, acc[1].tokens);
  return s;
}

std::vector<double> EvalReport::per_split_accuracy() const {
  std::vector<double> out;
  for (const auto& s : splits) out.push_back(s.accuracy);
  return out;
}

std::uint64_t model_fingerprint(const TrainedModel& tm) {
  Fnv1a h;
  h.update(tm.pipeline.schema_id());
  if (const auto* lin = std::get_if<models::LinearModel>(&tm.model)) {
    for (double w : lin->weights) h.update(w);
    h.update(lin->bias).update(lin->platt_a).update(lin->platt_c);
  } else {
    for (const auto& p : std::get<models::NeuralModel>(tm.model).net.params()) {
      h.update(p.name);
      for (double v : p.value) h.update(v);
    }
  }
  return h.digest();
}

namespace {

struct SplitOutcome {
  SplitResult result;
  std::vector<Label> predicted;
};

SplitOutcome run_split(const corpus::Corpus& corpus, const Recipe& recipe,
                       const corpus::Split& split,
                       const std::map<std::string, features::ReviewerProfile>& full_profiles,
                       const EvalOptions& options) {
  try {
    const TrainedModel tm = fit_recipe(recipe, corpus, split.train_idx, options.embeddings);
    SplitOutcome out;
    std::vector<Label> gold;
    for (std::size_t i : split.test_idx) {
      const auto& r = corpus[i];
      const auto raw = recipe.features.user_features ? raw_user_features(r, full_profiles)
                                                     : std::vector<double>{};
      const auto x = tm.pipeline.vectorize(r.text, raw);
      out.predicted.push_back(models::predict(tm.model, x).label);
      gold.push_back(r.label);
    }
    out.result.name = split.name();
    out.result.n_train = split.train_idx.size();
    out.result.n_test = split.test_idx.size();
    out.result.confusion = confusion_matrix(out.predicted, gold);
    out.result.accuracy = out.result.confusion.accuracy();
    out.result.fingerprint = to_hex(model_fingerprint(tm));
    return out;
  } catch (const Error& e) {
    throw Error(e.code(), split.name() + ": " + e.what());
  }
}

}  // namespace

EvalReport run_protocol(const corpus::Corpus& corpus, const Recipe& recipe,
                        const Protocol& protocol, const EvalOptions& options) {
  for (const auto& r : corpus.reviews()) {
    if (r.label == Label::kUnknown) {
      throw Error(ErrorCode::kInvalidArgument, "evaluation corpus has unlabelled review " + r.id);
    }
  }
  const auto labels = corpus.labels();
  const std::vector<corpus::Split> splits =
      protocol.kind == Protocol::Kind::kKFold
          ? corpus::stratified_kfold(labels, protocol.count, protocol.seed)
          : corpus::bootstrap_splits(labels, protocol.count, protocol.seed);
  std::map<std::string, features::ReviewerProfile> full_profiles;
  if (recipe.features.user_features) full_profiles = features::build_reviewer_profiles(corpus);

  std::vector<SplitOutcome> outcomes(splits.size());
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  for (std::size_t start = 0; start < splits.size(); start += threads) {
    const std::size_t end = std::min(splits.size(), start + threads);
    if (threads == 1) {
      outcomes[start] = run_split(corpus, recipe, splits[start], full_profiles, options);
      continue;
    }
    std::vector<std::future<SplitOutcome>> jobs;
    for (std::size_t s = start; s < end; ++s) {
      jobs.push_back(std::async(std::launch::async, [&, s] {
        return run_split(corpus, recipe, splits[s], full_profiles, options);
      }));
    }
    for (std::size_t s = start; s < end; ++s) outcomes[s] = jobs[s - start].get();
  }

  EvalReport report;
  report.protocol = protocol.name();
  report.seed = protocol.seed;
  report.model = recipe.model;
  std::vector<Label> all_pred, all_gold;
  std::vector<corpus::Review> all_reviews;
  double sum = 0;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    report.splits.push_back(outcomes[s].result);
    report.confusion += outcomes[s].result.confusion;
    sum += outcomes[s].result.accuracy;
    for (std::size_t k = 0; k < splits[s].test_idx.size(); ++k) {
      const auto& r = corpus[splits[s].test_idx[k]];
      all_pred.push_back(outcomes[s].predicted[k]);
      all_gold.push_back(r.label);
      all_reviews.push_back(r);
    }
  }
  report.mean_accuracy = sum / static_cast<double>(splits.size());
  report.error_stats = error_analysis(all_pred, all_gold, all_reviews);
  return report;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json j;
  j["protocol"] = r.protocol;
  j["seed"] = r.seed;
  j["model"] = r.model;
  j["mean_accuracy"] = r.mean_accuracy;
  j["per_split_accuracy"] = r.per_split_accuracy();
  j["confusion"] = confusion_json(r.confusion);
  json splits = json::array();
  for (const auto& s : r.splits) {
    splits.push_back({{"split", s.name},
                      {"accuracy", s.accuracy},
                      {"n_train", s.n_train},
                      {"n_test", s.n_test},
                      {"confusion", confusion_json(s.confusion)},
                      {"fingerprint", s.fingerprint}});
  }
  j["splits"] = splits;
  const ErrorStats& e = r.error_stats;
  j["error_stats"] = {
      {"avg_words_per_sentence_correct", optional_json(e.avg_words_per_sentence_correct)},
      {"avg_words_per_sentence_incorrect", optional_json(e.avg_words_per_sentence_incorrect)},
      {"avg_review_words_correct", optional_json(e.avg_review_words_correct)},
      {"avg_review_words_incorrect", optional_json(e.avg_review_words_incorrect)},
      {"avg_word_length_correct", optional_json(e.avg_word_length_correct)},
      {"avg_word_length_incorrect", optional_json(e.avg_word_length_incorrect)}};
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& r) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "model %s  protocol %s  seed %llu\n", r.model.c_str(),
                r.protocol.c_str(), static_cast<unsigned long long>(r.seed));
  out << line;
  std::snprintf(line, sizeof(line), "%-16s %8s %8s %8s %6s %6s %6s %6s\n", "split", "accuracy",
                "n_train", "n_test", "tp", "fp", "tn", "fn");
  out << line;
  for (const auto& s : r.splits) {
    std::snprintf(line, sizeof(line), "%-16s %8.4f %8zu %8zu %6zu %6zu %6zu %6zu\n",
                  s.name.c_str(), s.accuracy, s.n_train, s.n_test, s.confusion.tp,
                  s.confusion.fp, s.confusion.tn, s.confusion.fn);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-16s %8.4f\n", "mean", r.mean_accuracy);
  out << line;
  auto fmt = [](const std::optional<double>& v) {
    char b[32];
    if (!v) return std::string("n/a");
    std::snprintf(b, sizeof(b), "%.2f", *v);
    return std::string(b);
  };
  const ErrorStats& e = r.error_stats;
  auto row = [&](const char* name, const std::optional<double>& c, const std::optional<double>& i) {
    std::snprintf(line, sizeof(line), "  %-16s %10s %10s\n", name, fmt(c).c_str(),
                  fmt(i).c_str());
    out << line;
  };
  std::snprintf(line, sizeof(line), "%-18s %10s %10s\n", "error analysis", "correct",
                "incorrect");
  out << line;
  row("words/sentence", e.avg_words_per_sentence_correct, e.avg_words_per_sentence_incorrect);
  row("words/review", e.avg_review_words_correct, e.avg_review_words_incorrect);
  row("chars/word", e.avg_word_length_correct, e.avg_word_length_incorrect);
  return out.str();
}

}  // namespace revdec::eval
