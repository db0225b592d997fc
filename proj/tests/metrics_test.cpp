#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ladapt/autodiff/rng.hpp"
#include "ladapt/metrics/metrics.hpp"

using namespace ladapt;

namespace {

using Words = std::vector<std::string>;

/// Exhaustive alignment count by recursion; independent of the DP table.
std::size_t brute_edit_distance(const Words& a, std::size_t i, const Words& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const std::size_t sub = brute_edit_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  return std::min({sub, brute_edit_distance(a, i + 1, b, j) + 1, brute_edit_distance(a, i, b, j + 1) + 1});
}

std::vector<TrialScore> make_trials(const std::vector<double>& same, const std::vector<double>& diff) {
  std::vector<TrialScore> out;
  for (double s : same) out.push_back({"e", "t", s, true});
  for (double s : diff) out.push_back({"e", "t", s, false});
  return out;
}

/// Threshold grid sweep: mean of FAR and FRR at the first grid point
/// where FRR >= FAR.
double sweep_eer(const std::vector<TrialScore>& trials, double step) {
  double lo = trials[0].score, hi = trials[0].score;
  for (const auto& t : trials) lo = std::min(lo, t.score), hi = std::max(hi, t.score);
  for (double th = lo - step; th <= hi + 2 * step; th += step) {
    double fa = 0, fr = 0, ns = 0, nd = 0;
    for (const auto& t : trials) {
      if (t.same) ns += 1, fr += t.score < th;
      else nd += 1, fa += t.score >= th;
    }
    fa /= nd;
    fr /= ns;
    if (fr >= fa) return 0.5 * (fa + fr);
  }
  return 0.0;
}

double sample_sd(std::vector<double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST(Wer, HandCases) {
  EXPECT_EQ(wer(Words{"a", "b"}, Words{"a", "b"}), 0.0);
  EXPECT_EQ(wer(Words{"a"}, Words{}), 1.0);
  EXPECT_DOUBLE_EQ(wer(Words{"the", "cat", "sat"}, Words{"the", "bat", "sat", "down"}), 2.0 / 3.0);
  EXPECT_THROW(wer(Words{}, Words{"a"}), MetricError);
}

TEST(Wer, MatchesExhaustiveRecursionAndRelabeling) {
  Rng rng(1);
  const Words vocab{"a", "b", "c"}, relabeled{"x", "y", "z"};
  for (int trial = 0; trial < 200; ++trial) {
    Words ref(1 + rng.below(6)), hyp(rng.below(7));
    for (auto& w : ref) w = vocab[rng.below(3)];
    for (auto& w : hyp) w = vocab[rng.below(3)];
    const double want = static_cast<double>(brute_edit_distance(ref, 0, hyp, 0)) / static_cast<double>(ref.size());
    EXPECT_DOUBLE_EQ(wer(ref, hyp), want);
    EXPECT_EQ(wer(ref, ref), 0.0);
    auto map = [&](Words w) {
      for (auto& s : w) s = relabeled[static_cast<std::size_t>(s[0] - 'a')];
      return w;
    };
    EXPECT_DOUBLE_EQ(wer(map(ref), map(hyp)), wer(ref, hyp));
  }
}

TEST(Wer, CorpusLevelPoolsEdits) {
  std::vector<std::vector<std::size_t>> refs{{1, 2}, {3, 4, 5, 6}}, hyps{{1}, {3, 4, 5, 6}};
  EXPECT_DOUBLE_EQ(corpus_wer(refs, hyps), 1.0 / 6.0);
}

TEST(Eer, HandCase) {
  const auto r = eer(make_trials({0.9, 0.4}, {0.6, 0.1}));
  EXPECT_NEAR(r.rate, 0.5, 1e-12);
  EXPECT_GE(r.threshold, 0.4);
  EXPECT_LE(r.threshold, 0.6);
}

TEST(Eer, IdenticalScoresGiveHalf) {
  EXPECT_NEAR(eer(make_trials({0.3, 0.3, 0.3}, {0.3, 0.3})).rate, 0.5, 1e-12);
}

TEST(Eer, PerfectSeparationGivesZero) {
  EXPECT_EQ(eer(make_trials({0.8, 0.9, 0.95}, {0.1, 0.2})).rate, 0.0);
}

TEST(Eer, FullyInvertedGivesOne) {
  EXPECT_NEAR(eer(make_trials({0.1, 0.2}, {0.8, 0.9})).rate, 1.0, 1e-12);
}

TEST(Eer, RequiresBothClasses) {
  EXPECT_THROW(eer(make_trials({0.1, 0.2}, {})), MetricError);
  EXPECT_THROW(eer(make_trials({}, {0.1})), MetricError);
}

TEST(Eer, AgreesWithThresholdSweep) {
  Rng rng(2);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<double> same, diff;
    const double shift = rng.uniform(0.0, 2.0);
    for (int i = 0; i < 2000; ++i) same.push_back(std::round((rng.normal() + shift) * 1e3) / 1e3);
    for (int i = 0; i < 2000; ++i) diff.push_back(std::round(rng.normal() * 1e3) / 1e3);
    const auto trials = make_trials(same, diff);
    EXPECT_NEAR(eer(trials).rate, sweep_eer(trials, 1e-4), 1e-3);
  }
}

TEST(AdaptiveSNorm, CenteredScoreIsZero) {
  const double r = std::sqrt(0.5);
  const std::vector<double> cohort{0.5 + r, 0.5 - r, -3.0};
  EXPECT_NEAR(sample_sd({0.5 + r, 0.5 - r}), 1.0, 1e-15);
  EXPECT_NEAR(adaptive_s_norm(0.5, cohort, cohort, 2), 0.0, 1e-15);
}

TEST(AdaptiveSNorm, TopTwoHandCase) {
  const std::vector<double> cohort{0.8, 0.6, 0.1};
  const double mean = 0.7, sd = 0.1 * std::sqrt(2.0);
  EXPECT_NEAR(sample_sd({0.8, 0.6}), sd, 1e-15);
  const std::vector<double> other{0.2, 0.5, 0.4, -0.1};
  const double om = 0.45, osd = sample_sd({0.5, 0.4});
  const double raw = 0.55;
  EXPECT_NEAR(adaptive_s_norm(raw, cohort, other, 2), 0.5 * ((raw - mean) / sd + (raw - om) / osd), 1e-12);
}

TEST(AdaptiveSNorm, SymmetricInCohorts) {
  Rng rng(3);
  std::vector<double> a(12), b(15);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  EXPECT_DOUBLE_EQ(adaptive_s_norm(0.3, a, b), adaptive_s_norm(0.3, b, a));
}

TEST(AdaptiveSNorm, RankingInvariantUnderAffineMaps) {
  Rng rng(4);
  std::vector<double> enroll(20), test(20), raws(30);
  for (auto& v : enroll) v = rng.normal();
  for (auto& v : test) v = rng.normal();
  for (auto& v : raws) v = rng.normal();
  auto normalize = [&](double scale, double shift) {
    std::vector<double> e = enroll, t = test, out;
    for (auto& v : e) v = scale * v + shift;
    for (auto& v : t) v = scale * v + shift;
    for (double r : raws) out.push_back(adaptive_s_norm(scale * r + shift, e, t));
    return out;
  };
  const auto base = normalize(1.0, 0.0), moved = normalize(3.5, -1.25);
  for (std::size_t i = 0; i < raws.size(); ++i)
    for (std::size_t j = 0; j < raws.size(); ++j) EXPECT_EQ(base[i] < base[j], moved[i] < moved[j]);
}

TEST(AdaptiveSNorm, DefaultKAndErrors) {
  const std::vector<double> c{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, -5.0, -6.0};
  EXPECT_DOUBLE_EQ(adaptive_s_norm(0.2, c, c), adaptive_s_norm(0.2, c, c, 10));
  EXPECT_THROW(adaptive_s_norm(0.2, std::vector<double>{1, 1, 1}, c, 3), DegenerateCohortError);
  EXPECT_THROW(adaptive_s_norm(0.2, c, c, 1), DegenerateCohortError);
  EXPECT_THROW(adaptive_s_norm(0.2, c, std::vector<double>{0.1, 0.2}, 3), MetricError);
}

TEST(WeightedAccuracy, HandCases) {
  const std::vector<std::size_t> gold{0, 0, 0, 1, 1}, all_right = gold, mixed{0, 0, 0, 0, 0};
  EXPECT_EQ(weighted_accuracy(all_right, gold, 2), 1.0);
  EXPECT_DOUBLE_EQ(weighted_accuracy(mixed, gold, 2), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(mixed, gold), 0.6);
  EXPECT_THROW(weighted_accuracy(mixed, gold, 3), MetricError);
}

TEST(WeightedAccuracy, EqualsAccuracyOnBalancedGold) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> gold, pred;
    for (std::size_t c = 0; c < 4; ++c)
      for (int i = 0; i < 5; ++i) gold.push_back(c), pred.push_back(rng.below(4));
    EXPECT_NEAR(weighted_accuracy(pred, gold, 4), accuracy(pred, gold), 1e-15);
  }
}

TEST(Cosine, RangeAndZeroVector) {
  const std::vector<double> a{1, 2, 3}, b{-2, -4, -6}, z{0, 0, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), -1.0);
  EXPECT_EQ(cosine_similarity(a, z), 0.0);
}

TEST(TrialFile, ParseAndErrors) {
  std::istringstream in("# header\n1 spk1_a spk1_b\n\nnontarget spk1_a spk2_a\nsame x y  # note\n");
  const auto trials = parse_trials(in);
  ASSERT_EQ(trials.size(), 3u);
  EXPECT_TRUE(trials[0].same);
  EXPECT_FALSE(trials[1].same);
  EXPECT_EQ(trials[2].test_id, "y");
  std::istringstream bad("1 a\n");
  EXPECT_THROW(parse_trials(bad), MetricError);
  std::istringstream bad_label("maybe a b\n");
  EXPECT_THROW(parse_trials(bad_label), MetricError);
}

TEST(TrialFile, ScoreCsv) {
  std::ostringstream out;
  const std::vector<TrialScore> raw{{"a", "b", 0.25, true}};
  write_score_csv(out, raw, std::vector<double>{1.5});
  EXPECT_EQ(out.str(), "enroll_id,test_id,raw,normalized\na,b,0.25,1.5\n");
}
