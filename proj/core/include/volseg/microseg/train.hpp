#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "volseg/microseg/optim.hpp"
#include "volseg/microseg/unet.hpp"

namespace volseg::microseg {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t epochs = 300;
  std::size_t batch_size = 1;
  AdamConfig adam{};
  PlateauConfig plateau{};
  double smooth = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
};

struct TrainResult {
  UNet model;
  std::vector<EpochRecord> curve;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mean soft Dice loss of the model over a set, forward pass only.
double evaluate_loss(UNet& model, std::span<const LabeledVolume> set, double smooth = 1.0);

/// One optimisation step on a single sample; returns its loss before the update.
double train_step(UNet& model, Adam& adam, const Tensor& input, const Tensor& target,
                  double learning_rate, double smooth);

/// Shuffled single-sample epochs of forward -> soft Dice -> backward -> Adam,
/// with the validation loss driving the plateau scheduler. With an empty
/// validation set the training loss is monitored instead.
TrainResult train(std::span<const LabeledVolume> train_set, std::span<const LabeledVolume> val_set,
                  const NetworkConfig& net, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

inline constexpr const char* kCurveCsvHeader = "epoch,train_loss,val_loss,lr";
void write_curve_csv(std::ostream& out, std::span<const EpochRecord> curve);
std::vector<EpochRecord> parse_curve_csv(std::istream& in);

}  // namespace volseg::microseg
