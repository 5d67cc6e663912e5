#include "volseg/microseg/optim.hpp"

#include <cmath>
#include <limits>

namespace volseg::microseg {

void adam_step(std::span<Real> params, std::span<const Real> grads, AdamMoments& state,
               double learning_rate, const AdamConfig& config) {
  if (grads.size() != params.size()) fail(Errc::ShapeMismatch, "adam: gradient length");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0);
    state.v.assign(params.size(), 0);
  }
  if (state.m.size() != params.size()) fail(Errc::ShapeMismatch, "adam: moment length");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void Adam::step(std::span<Param* const> params, double learning_rate) {
  if (moments_.empty()) moments_.resize(params.size());
  if (moments_.size() != params.size()) fail(Errc::ShapeMismatch, "adam: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_step(params[i]->value.values(), params[i]->grad.values(), moments_[i], learning_rate,
              config_);
}

void PlateauConfig::validate() const {
  if (patience < 1) fail(Errc::InvalidArgument, "patience must be >= 1");
  if (!(factor > 1.0)) fail(Errc::InvalidArgument, "reduction factor must be > 1");
  if (!(min_lr >= 0.0)) fail(Errc::InvalidArgument, "min_lr must be >= 0");
}

PlateauScheduler::PlateauScheduler(double initial_lr, PlateauConfig config)
    : config_(config), lr_(initial_lr), best_(std::numeric_limits<double>::infinity()) {
  config_.validate();
  if (!(initial_lr > 0.0)) fail(Errc::InvalidArgument, "learning rate must be > 0");
}

double PlateauScheduler::step(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= config_.patience) {
    lr_ = std::max(lr_ / config_.factor, config_.min_lr);
    bad_epochs_ = 0;
  }
  return lr_;
}

std::vector<double> plateau_trace(std::span<const double> losses, double initial_lr,
                                  const PlateauConfig& config) {
  PlateauScheduler s(initial_lr, config);
  std::vector<double> trace;
  trace.reserve(losses.size());
  for (double l : losses) {
    trace.push_back(s.lr());
    s.step(l);
  }
  return trace;
}

double lr_schedule(std::span<const double> history, double current_lr, const PlateauConfig& config) {
  if (history.empty()) fail(Errc::InvalidArgument, "lr_schedule needs a nonempty history");
  config.validate();
  // The improvement counter does not depend on the rate, so replaying it
  // tells whether the newest epoch completes a plateau.
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  bool reduce = false;
  for (double l : history) {
    reduce = false;
    if (l < best) {
      best = l;
      bad = 0;
    } else if (++bad >= config.patience) {
      reduce = true;
      bad = 0;
    }
  }
  return reduce ? std::max(current_lr / config.factor, config.min_lr) : current_lr;
}

}  // namespace volseg::microseg
