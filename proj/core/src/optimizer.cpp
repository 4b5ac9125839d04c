#include "sparsecd/optimizer.hpp"

#include <cmath>

#include "sparsecd/errors.hpp"

namespace sparsecd {

void AdamWConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("AdamW eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

template <typename T>
AdamW<T>::AdamW(NamedTensors<T> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t.numel(), T(0));
    v_.emplace_back(t.numel(), T(0));
  }
}

template <typename T>
void AdamW<T>::step(double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and non-negative");
  for (const auto& [name, t] : params_) {
    for (T g : t.grad()) {
      if (!std::isfinite(static_cast<double>(g))) throw NumericError("non-finite gradient in parameter " + name);
    }
  }
  ++step_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto& t = params_[p].second;
    auto theta = t.data();
    const auto grad = t.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double th = static_cast<double>(theta[i]);
      const double update = (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps) + cfg_.weight_decay * th;
      theta[i] = static_cast<T>(th - lr * update);
    }
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

double linear_decay_lr(std::size_t epoch, std::size_t total_epochs, double lr0) {
  if (total_epochs == 0) throw ConfigError("total_epochs must be positive");
  if (epoch >= total_epochs) {
    throw ConfigError("epoch " + std::to_string(epoch) + " is outside the schedule of " +
                      std::to_string(total_epochs) + " epochs");
  }
  return lr0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(total_epochs));
}

}  // namespace sparsecd
