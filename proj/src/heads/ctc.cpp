#include "ladapt/heads/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ladapt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

std::size_t ctc_min_frames(std::span<const std::size_t> target) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  return target.size() + repeats;
}

template <typename T>
Var<T> ctc_loss(const Var<T>& logits, std::span<const std::size_t> target) {
  const auto& lv = logits.value();
  if (lv.rank() != 2 || lv.rows() == 0 || lv.cols() < 2) {
    throw ShapeError("ctc_loss: expected logits [T x (V+1)] with T >= 1 and V >= 1, got " +
                     shape_str(lv.shape()));
  }
  const std::size_t frames = lv.rows(), classes = lv.cols();
  for (std::size_t label : target) {
    if (label == kBlank || label >= classes) {
      throw ConfigError("ctc_loss: label " + std::to_string(label) + " outside 1.." +
                        std::to_string(classes - 1));
    }
  }
  if (frames < ctc_min_frames(target)) {
    throw InfeasibleTargetError("ctc_loss: target needs " + std::to_string(ctc_min_frames(target)) +
                                " frames, input has " + std::to_string(frames));
  }

  // Per-frame log-softmax in double.
  std::vector<double> lp(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    double mx = lv.at(t, 0);
    for (std::size_t k = 1; k < classes; ++k) mx = std::max<double>(mx, lv.at(t, k));
    double total = 0.0;
    for (std::size_t k = 0; k < classes; ++k) total += std::exp(lv.at(t, k) - mx);
    const double lse = mx + std::log(total);
    for (std::size_t k = 0; k < classes; ++k) lp[t * classes + k] = lv.at(t, k) - lse;
  }

  const std::size_t states = 2 * target.size() + 1;
  std::vector<std::size_t> ext(states, kBlank);
  for (std::size_t u = 0; u < target.size(); ++u) ext[2 * u + 1] = target[u];
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]; };
  auto at = [states](std::vector<double>& m, std::size_t t, std::size_t s) -> double& {
    return m[t * states + s];
  };

  std::vector<double> alpha(frames * states, kNegInf), beta(frames * states, kNegInf);
  at(alpha, 0, 0) = lp[ext[0]];
  if (states > 1) at(alpha, 0, 1) = lp[ext[1]];
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = at(alpha, t - 1, s);
      if (s >= 1) acc = log_add(acc, at(alpha, t - 1, s - 1));
      if (can_skip(s)) acc = log_add(acc, at(alpha, t - 1, s - 2));
      if (acc != kNegInf) at(alpha, t, s) = acc + lp[t * classes + ext[s]];
    }
  }
  const std::size_t last = frames - 1;
  at(beta, last, states - 1) = lp[last * classes + ext[states - 1]];
  if (states > 1) at(beta, last, states - 2) = lp[last * classes + ext[states - 2]];
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double acc = at(beta, t + 1, s);
      if (s + 1 < states) acc = log_add(acc, at(beta, t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) acc = log_add(acc, at(beta, t + 1, s + 2));
      if (acc != kNegInf) at(beta, t, s) = acc + lp[t * classes + ext[s]];
    }
  }
  double log_prob = at(alpha, last, states - 1);
  if (states > 1) log_prob = log_add(log_prob, at(alpha, last, states - 2));

  // d loss / d logits = softmax - expected label occupancy.
  auto grad = std::make_shared<Tensor<T>>(lv.shape());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < classes; ++k) (*grad).at(t, k) = static_cast<T>(std::exp(lp[t * classes + k]));
    std::vector<double> occupancy(classes, kNegInf);
    for (std::size_t s = 0; s < states; ++s) {
      const double a = at(alpha, t, s), b = at(beta, t, s);
      if (a == kNegInf || b == kNegInf) continue;
      occupancy[ext[s]] = log_add(occupancy[ext[s]], a + b - lp[t * classes + ext[s]] - log_prob);
    }
    for (std::size_t k = 0; k < classes; ++k)
      if (occupancy[k] != kNegInf) (*grad).at(t, k) -= static_cast<T>(std::exp(occupancy[k]));
  }

  const T loss = static_cast<T>(std::max(0.0, -log_prob));
  return make_result<T>(
      Tensor<T>::scalar(loss), {logits},
      [grad](const Tensor<T>& g, std::vector<Tensor<T>*>& grads) {
        auto& sink = *grads[0];
        for (std::size_t i = 0; i < sink.numel(); ++i) sink[i] += g[0] * (*grad)[i];
      },
      "ctc_loss");
}

template <typename T>
std::vector<std::size_t> ctc_greedy_decode(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("ctc_greedy_decode: expected [T x (V+1)], got " + shape_str(logits.shape()));
  std::vector<std::size_t> out;
  std::size_t prev = kBlank;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.cols(); ++k)
      if (logits.at(t, k) > logits.at(t, best)) best = k;
    if (best != kBlank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

template Var<float> ctc_loss(const Var<float>&, std::span<const std::size_t>);
template Var<double> ctc_loss(const Var<double>&, std::span<const std::size_t>);
template std::vector<std::size_t> ctc_greedy_decode(const Tensor<float>&);
template std::vector<std::size_t> ctc_greedy_decode(const Tensor<double>&);

}  // namespace ladapt
