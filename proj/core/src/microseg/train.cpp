#include "volseg/microseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace volseg::microseg {

namespace {

struct Sample {
  Tensor input;
  Tensor target;
};

std::vector<Sample> to_samples(std::span<const LabeledVolume> set, const NetworkConfig& net) {
  std::vector<Sample> out;
  out.reserve(set.size());
  for (const auto& lv : set) {
    if (lv.image.shape != lv.label.shape)
      fail(Errc::ShapeMismatch, "training image and label shapes differ");
    out.push_back({to_input(lv.image, net), one_hot(lv.label, net.class_count)});
  }
  return out;
}

double sample_loss(UNet& model, const Sample& s, double smooth) {
  return soft_dice_loss(softmax_channels(model.forward(s.input)), s.target, smooth).loss;
}

/// Forward and backward of one sample; gradients are scaled by `weight`.
double accumulate(UNet& model, const Sample& s, double smooth, double weight) {
  const Tensor probs = softmax_channels(model.forward(s.input));
  LossResult lr = soft_dice_loss(probs, s.target, smooth);
  if (weight != 1.0)
    for (std::size_t i = 0; i < lr.grad.size(); ++i) lr.grad[i] *= weight;
  model.backward(softmax_backward(probs, lr.grad));
  return lr.loss;
}

std::string repr(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(Errc::InvalidArgument, "learning_rate must be > 0");
  if (batch_size < 1) fail(Errc::InvalidArgument, "batch_size must be >= 1");
  if (!(smooth >= 0.0)) fail(Errc::InvalidArgument, "smooth must be >= 0");
  plateau.validate();
}

double evaluate_loss(UNet& model, std::span<const LabeledVolume> set, double smooth) {
  if (set.empty()) fail(Errc::InvalidArgument, "evaluate_loss needs a nonempty set");
  double total = 0;
  for (const auto& s : to_samples(set, model.config())) total += sample_loss(model, s, smooth);
  return total / static_cast<double>(set.size());
}

double train_step(UNet& model, Adam& adam, const Tensor& input, const Tensor& target,
                  double learning_rate, double smooth) {
  model.zero_grad();
  const double loss = accumulate(model, Sample{input, target}, smooth, 1.0);
  if (!std::isfinite(loss)) fail(Errc::NonFiniteLoss, "loss is not finite");
  const auto params = model.params();
  adam.step(params, learning_rate);
  return loss;
}

TrainResult train(std::span<const LabeledVolume> train_set, std::span<const LabeledVolume> val_set,
                  const NetworkConfig& net, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) fail(Errc::InvalidArgument, "training set is empty");
  TrainResult result{UNet(net), {}};
  UNet& model = result.model;
  const auto samples = to_samples(train_set, net);
  const auto val = to_samples(val_set, net);
  const auto params = model.params();

  Adam adam(config.adam);
  PlateauScheduler scheduler(config.learning_rate, config.plateau);
  Rng rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

    const double lr = scheduler.lr();
    double train_total = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(stop - start);
      model.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const double loss = accumulate(model, samples[order[k]], config.smooth, weight);
        if (!std::isfinite(loss))
          fail(Errc::NonFiniteLoss, "non-finite training loss at epoch " + std::to_string(epoch) +
                                        ", sample " + std::to_string(order[k]));
        train_total += loss;
      }
      adam.step(params, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = train_total / static_cast<double>(samples.size());
    if (val.empty()) {
      rec.val_loss = rec.train_loss;
    } else {
      double total = 0;
      for (const auto& s : val) total += sample_loss(model, s, config.smooth);
      rec.val_loss = total / static_cast<double>(val.size());
    }
    if (!std::isfinite(rec.val_loss))
      fail(Errc::NonFiniteLoss, "non-finite validation loss at epoch " + std::to_string(epoch));
    scheduler.step(rec.val_loss);
    result.curve.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void write_curve_csv(std::ostream& out, std::span<const EpochRecord> curve) {
  out << kCurveCsvHeader << '\n';
  for (const auto& r : curve)
    out << r.epoch << ',' << repr(r.train_loss) << ',' << repr(r.val_loss) << ',' << repr(r.lr)
        << '\n';
}

std::vector<EpochRecord> parse_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCurveCsvHeader)
    fail(Errc::InvalidArgument, "curve CSV header mismatch");
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    EpochRecord r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ss >> r.epoch >> c1 >> r.train_loss >> c2 >> r.val_loss >> c3 >> r.lr) || c1 != ',' ||
        c2 != ',' || c3 != ',')
      fail(Errc::InvalidArgument, "bad curve CSV row: " + line);
    out.push_back(r);
  }
  return out;
}

}  // namespace volseg::microseg
