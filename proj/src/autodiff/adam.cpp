#include "ladapt/autodiff/adam.hpp"

#include <cmath>

namespace ladapt {

template <typename T>
Adam<T>::Adam(std::vector<Var<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), T{0});
    v_.emplace_back(p.shape(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
  const T step_size = static_cast<T>(config_.lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(config_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor<T>* g = params_[i].grad();
    if (!g) continue;
    Tensor<T>& w = params_[i].mutable_value();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < m.size(); ++j) {
      const T gj = (*g)[j];
      m[j] = b1 * m[j] + (T(1) - b1) * gj;
      v[j] = b2 * v[j] + (T(1) - b2) * gj * gj;
      w[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace ladapt
