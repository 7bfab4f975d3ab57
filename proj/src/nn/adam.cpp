#include "n2r/nn/adam.hpp"

#include <cmath>

namespace n2r::nn {

template <typename T>
void adam_step(ModelParams<T> &p, OptimState<T> &s)
{
  for (auto const &name : p.names()) {
    if (!p.at(name).has_grad()) { throw UsageError("adam_step: parameter '" + name + "' has no gradient"); }
  }
  s.step += 1;
  double const b1 = s.cfg.beta1, b2 = s.cfg.beta2;
  double const c1 = 1.0 - std::pow(b1, static_cast<double>(s.step));
  double const c2 = 1.0 - std::pow(b2, static_cast<double>(s.step));
  for (auto const &name : p.names()) {
    auto &t = p.at(name);
    auto const g = t.grad();
    auto w = t.mutable_data();
    auto &m = s.m[name];
    auto &v = s.v[name];
    if (m.size() != w.size()) {
      m.assign(w.size(), T{0});
      v.assign(w.size(), T{0});
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      double const gi = g[i];
      double const mi = b1 * m[i] + (1.0 - b1) * gi;
      double const vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      w[i] = static_cast<T>(w[i] - s.cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + s.cfg.eps));
    }
  }
}

template void adam_step<float>(ModelParams<float> &, OptimState<float> &);
template void adam_step<double>(ModelParams<double> &, OptimState<double> &);

} // namespace n2r::nn
