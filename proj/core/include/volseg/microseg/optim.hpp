#pragma once

#include <span>
#include <vector>

#include "volseg/microseg/tensor.hpp"

namespace volseg::microseg {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  std::vector<Real> m;
  std::vector<Real> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of a flat parameter block.
void adam_step(std::span<Real> params, std::span<const Real> grads, AdamMoments& state,
               double learning_rate, const AdamConfig& config = {});

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(std::span<Param* const> params, double learning_rate);
  std::size_t steps_taken() const { return moments_.empty() ? 0 : moments_.front().step; }

 private:
  AdamConfig config_;
  std::vector<AdamMoments> moments_;
};

struct PlateauConfig {
  std::size_t patience = 10;
  double factor = 10.0;
  double min_lr = 1e-7;

  void validate() const;
};

/// Divides the rate by `factor` once the monitored loss has failed to beat
/// its best value for `patience` consecutive epochs; the count restarts
/// after every reduction. Never goes below min_lr.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, PlateauConfig config = {});

  double lr() const { return lr_; }
  /// Records one epoch's loss and returns the rate for the next epoch.
  double step(double loss);

 private:
  PlateauConfig config_;
  double lr_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

/// Rate in force for each epoch when `losses` are fed to a fresh scheduler:
/// element i is the rate used while producing losses[i].
std::vector<double> plateau_trace(std::span<const double> losses, double initial_lr,
                                  const PlateauConfig& config = {});

/// Next rate given the complete loss history and the rate in force now.
double lr_schedule(std::span<const double> history, double current_lr,
                   const PlateauConfig& config = {});

}  // namespace volseg::microseg
