#pragma once

#include <algorithm>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ladapt {

/// Input that makes a metric undefined: empty reference, one-class trial
/// set, class absent from gold labels.
class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DegenerateCohortError : public MetricError {
 public:
  using MetricError::MetricError;
};

/// Levenshtein distance with unit substitution, insertion and deletion cost.
template <typename Word>
std::size_t edit_distance(std::span<const Word> reference, std::span<const Word> hypothesis) {
  std::vector<std::size_t> row(hypothesis.size() + 1);
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= reference.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hypothesis.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row.back();
}

/// edit_distance / |reference|. Throws MetricError on an empty reference.
template <typename Word>
double wer(std::span<const Word> reference, std::span<const Word> hypothesis) {
  if (reference.empty()) throw MetricError("wer: empty reference");
  return static_cast<double>(edit_distance(reference, hypothesis)) / static_cast<double>(reference.size());
}

inline double wer(const std::vector<std::string>& reference, const std::vector<std::string>& hypothesis) {
  return wer(std::span<const std::string>(reference), std::span<const std::string>(hypothesis));
}

/// Total edits over total reference words.
template <typename Word>
double corpus_wer(const std::vector<std::vector<Word>>& references,
                  const std::vector<std::vector<Word>>& hypotheses) {
  if (references.size() != hypotheses.size()) throw MetricError("corpus_wer: reference/hypothesis count mismatch");
  std::size_t edits = 0, words = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    edits += edit_distance(std::span<const Word>(references[i]), std::span<const Word>(hypotheses[i]));
    words += references[i].size();
  }
  if (words == 0) throw MetricError("corpus_wer: empty reference");
  return static_cast<double>(edits) / static_cast<double>(words);
}

struct TrialScore {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  bool same = false;
};

struct EerResult {
  double rate = 0.0;
  double threshold = 0.0;
};

/// Trials are accepted when score >= threshold. Operating points are the
/// distinct scores plus +inf; the rate is interpolated linearly between
/// the last point with FAR > FRR and the first with FRR >= FAR.
/// Throws MetricError unless both same and different trials are present.
EerResult eer(std::span<const TrialScore> trials);

/// Mean of the two z-scores of raw against the top-K of each cohort, using
/// the sample standard deviation. k == 0 selects min(10, smaller cohort).
/// Throws DegenerateCohortError when K < 2 or a top-K set has no spread,
/// MetricError when K exceeds a cohort.
double adaptive_s_norm(double raw, std::span<const double> enroll_cohort, std::span<const double> test_cohort,
                       std::size_t k = 0);

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold);
/// Per-class accuracy for classes 0..num_classes-1. Throws MetricError when
/// a class never occurs in gold.
std::vector<double> per_class_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                                       std::size_t num_classes);
/// Unweighted mean of per_class_accuracy.
double weighted_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                         std::size_t num_classes);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct Trial {
  bool same = false;
  std::string enroll_id;
  std::string test_id;
};

/// One trial per line, "label enroll_id test_id"; label is 1/0,
/// target/nontarget or same/different. Blank lines and '#' comments are
/// skipped. Throws MetricError with the line number on malformed input.
std::vector<Trial> parse_trials(std::istream& in);
std::vector<Trial> read_trials(const std::filesystem::path& path);

/// CSV with header enroll_id,test_id,raw,normalized.
void write_score_csv(std::ostream& out, std::span<const TrialScore> raw, std::span<const double> normalized);

}  // namespace ladapt
