#include "ladapt/metrics/metrics.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace ladapt {

EerResult eer(std::span<const TrialScore> trials) {
  std::vector<double> same, diff;
  for (const auto& t : trials) {
    if (!std::isfinite(t.score)) throw MetricError("eer: non-finite score for " + t.enroll_id + "/" + t.test_id);
    (t.same ? same : diff).push_back(t.score);
  }
  if (same.empty() || diff.empty()) throw MetricError("eer: need both same and different trials");
  std::sort(same.begin(), same.end());
  std::sort(diff.begin(), diff.end());

  std::vector<double> thresholds;
  for (const auto& t : trials) thresholds.push_back(t.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  auto far = [&](double th) {
    const auto accepted = diff.end() - std::lower_bound(diff.begin(), diff.end(), th);
    return static_cast<double>(accepted) / static_cast<double>(diff.size());
  };
  auto frr = [&](double th) {
    const auto rejected = std::lower_bound(same.begin(), same.end(), th) - same.begin();
    return static_cast<double>(rejected) / static_cast<double>(same.size());
  };

  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double fa = far(thresholds[i]), fr = frr(thresholds[i]);
    if (fr < fa) continue;
    if (i == 0) return {fa, thresholds[0]};
    const double pfa = far(thresholds[i - 1]), pfr = frr(thresholds[i - 1]);
    const double d_prev = pfa - pfr, d_cur = fr - fa;
    const double alpha = d_prev / (d_prev + d_cur);
    const double hi = std::isfinite(thresholds[i]) ? thresholds[i] : thresholds[i - 1];
    return {pfa + alpha * (fa - pfa), thresholds[i - 1] + alpha * (hi - thresholds[i - 1])};
  }
  // Unreachable: at +inf FAR is 0.
  return {0.0, thresholds.back()};
}

namespace {

struct TopK {
  double mean;
  double sd;
};

TopK top_k_stats(std::span<const double> cohort, std::size_t k) {
  std::vector<double> sorted(cohort.begin(), cohort.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end(),
                    std::greater<>());
  double mean = 0.0;
  for (std::size_t i = 0; i < k; ++i) mean += sorted[i];
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (std::size_t i = 0; i < k; ++i) ss += (sorted[i] - mean) * (sorted[i] - mean);
  return {mean, std::sqrt(ss / static_cast<double>(k - 1))};
}

}  // namespace

double adaptive_s_norm(double raw, std::span<const double> enroll_cohort, std::span<const double> test_cohort,
                       std::size_t k) {
  if (k == 0) k = std::min<std::size_t>({10, enroll_cohort.size(), test_cohort.size()});
  if (k > enroll_cohort.size() || k > test_cohort.size()) {
    throw MetricError("adaptive_s_norm: K=" + std::to_string(k) + " exceeds cohort size");
  }
  if (k < 2) throw DegenerateCohortError("adaptive_s_norm: K must be at least 2 for a sample deviation");
  const TopK e = top_k_stats(enroll_cohort, k), t = top_k_stats(test_cohort, k);
  if (!(e.sd > 0.0) || !(t.sd > 0.0)) throw DegenerateCohortError("adaptive_s_norm: zero cohort variance");
  return 0.5 * ((raw - e.mean) / e.sd + (raw - t.mean) / t.sd);
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  if (predicted.size() != gold.size()) throw MetricError("accuracy: prediction/gold size mismatch");
  if (gold.empty()) throw MetricError("accuracy: no examples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

std::vector<double> per_class_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                                       std::size_t num_classes) {
  if (predicted.size() != gold.size()) throw MetricError("per_class_accuracy: prediction/gold size mismatch");
  std::vector<std::size_t> hits(num_classes, 0), count(num_classes, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= num_classes) throw MetricError("per_class_accuracy: gold label out of range");
    ++count[gold[i]];
    hits[gold[i]] += predicted[i] == gold[i];
  }
  std::vector<double> out(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (count[c] == 0) throw MetricError("per_class_accuracy: class " + std::to_string(c) + " absent from gold");
    out[c] = static_cast<double>(hits[c]) / static_cast<double>(count[c]);
  }
  return out;
}

double weighted_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                         std::size_t num_classes) {
  if (num_classes == 0) throw MetricError("weighted_accuracy: no classes");
  const auto per_class = per_class_accuracy(predicted, gold, num_classes);
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(num_classes);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw MetricError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::vector<Trial> parse_trials(std::istream& in) {
  std::vector<Trial> trials;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string label, enroll, test, extra;
    if (!(fields >> label)) continue;
    if (!(fields >> enroll >> test) || (fields >> extra)) {
      throw MetricError("trials line " + std::to_string(lineno) + ": expected 'label enroll_id test_id'");
    }
    Trial t{false, enroll, test};
    if (label == "1" || label == "target" || label == "same") t.same = true;
    else if (label == "0" || label == "nontarget" || label == "different") t.same = false;
    else throw MetricError("trials line " + std::to_string(lineno) + ": unknown label '" + label + "'");
    trials.push_back(std::move(t));
  }
  return trials;
}

std::vector<Trial> read_trials(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MetricError("cannot open trial file " + path.string());
  return parse_trials(in);
}

void write_score_csv(std::ostream& out, std::span<const TrialScore> raw, std::span<const double> normalized) {
  if (raw.size() != normalized.size()) throw MetricError("write_score_csv: score count mismatch");
  out << "enroll_id,test_id,raw,normalized\n" << std::setprecision(17);
  for (std::size_t i = 0; i < raw.size(); ++i)
    out << raw[i].enroll_id << ',' << raw[i].test_id << ',' << raw[i].score << ',' << normalized[i] << '\n';
}

}  // namespace ladapt
