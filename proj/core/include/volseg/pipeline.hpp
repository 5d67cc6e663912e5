#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "volseg/metrics.hpp"
#include "volseg/microseg/synthetic.hpp"
#include "volseg/microseg/train.hpp"
#include "volseg/patch_sampler.hpp"
#include "volseg/volume.hpp"

namespace volseg::pipeline {

inline constexpr const char* kVersion = "0.3.0";

enum class Preset { Model1, Model2, Model3 };

Preset parse_preset(std::string_view name);
std::string_view preset_name(Preset p);

struct PipelineConfig {
  std::string preset = "custom";
  Vec3 target_spacing{1.62, 1.62, 3.22};
  double clip_lo = kClipLow;
  double clip_hi = kClipHigh;
  bool crop_foreground = true;
  double foreground_threshold = kClipLow;
  std::optional<Extent3> resize_shape;
  std::optional<PatchSamplerConfig> patch;
  std::uint64_t seed = 0;
  std::string image_name = "imaging.nii.gz";
  std::string label_name = "segmentation.nii.gz";

  void validate() const;
};

/// model1: resize only; model2: random patches only; model3: resize then patches.
PipelineConfig expand_preset(Preset p);
/// The same step list with `input_shape` in place of 128x128x32.
PipelineConfig scaled_preset(Preset p, const Extent3& input_shape);

/// Human-readable, ordered step list of a configuration.
std::vector<std::string> describe_steps(const PipelineConfig& config);

std::string config_to_json(const PipelineConfig& config);
/// Keys present in `json` override the matching fields of `base`.
PipelineConfig config_from_json(const std::string& json, PipelineConfig base = {});

struct PreprocessResult {
  Extent3 input_shape{};
  Vec3 input_spacing{};
  Extent3 resampled_shape{};
  BBox bbox{};
  std::vector<LabeledVolume> outputs;
  /// Set only when patches were sampled; parallel to `outputs`.
  std::vector<Patch> patch_meta;
  std::uint64_t seed = 0;
  std::size_t stratum_fallbacks = 0;
};

/// spacing -> clip -> foreground crop -> resize and/or patch sampling.
PreprocessResult preprocess_case(const Volume& image, const LabelVolume& label,
                                 const PipelineConfig& config, std::uint64_t seed);

struct CaseFiles {
  std::string id;
  std::filesystem::path image;
  std::filesystem::path label;
};

/// Cases are subdirectories holding the named files. Missing files leave
/// the corresponding path empty.
std::vector<CaseFiles> discover_cases(const std::filesystem::path& dir,
                                      const std::string& image_name,
                                      const std::string& label_name);

struct PreprocessSummary {
  std::string manifest_json;
  std::size_t processed = 0;
  std::size_t failed = 0;
};

/// Processes every case under `in_dir`, writing outputs under
/// out_dir/<case>/ and out_dir/manifest.json.
PreprocessSummary run_preprocess(const std::filesystem::path& in_dir,
                                 const std::filesystem::path& out_dir,
                                 const PipelineConfig& config, std::size_t jobs = 1);

struct SplitSpec {
  double train_fraction = 0.8;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Seeded Fisher-Yates shuffle then a round(n * train_fraction) cut.
Split split_cases(std::vector<std::string> ids, const SplitSpec& spec);

struct EvaluateResult {
  std::vector<CaseReport> reports;  // as serialized (4 dp)
  std::optional<AggregateReport> aggregate;
  std::vector<std::string> missing;  // "<id>: no prediction" / "<id>: no ground truth"
  std::vector<std::string> errors;

  bool ok() const { return missing.empty() && errors.empty() && aggregate.has_value(); }
};

/// Scores predictions against ground truth, writing the per-case CSV to
/// `csv_out` and the aggregate JSON next to it (same stem, ".json").
EvaluateResult run_evaluate(const std::filesystem::path& pred_dir,
                            const std::filesystem::path& gt_dir,
                            const std::filesystem::path& csv_out,
                            const std::string& label_name = "segmentation.nii.gz",
                            std::size_t jobs = 1);

struct TrainDemoOptions {
  std::size_t train_cases = 20;
  std::size_t val_cases = 5;
  PipelineConfig preprocess;
  microseg::NetworkConfig network;
  microseg::TrainConfig train;
  microseg::PhantomConfig phantom;
  std::uint64_t seed = 0;

  /// Desk-scale defaults: the preset scaled to 32x32x16, 30 epochs at lr 3e-3.
  static TrainDemoOptions defaults(Preset preset = Preset::Model1);
};

struct TrainDemoResult {
  std::vector<microseg::EpochRecord> curve;
  EvaluateResult evaluation;
};

/// Generates phantoms, preprocesses them, trains, predicts the held-out
/// cases and evaluates them. Writes model.ckpt, curves.csv, val_gt/,
/// predictions/, report.csv and report.json under `out_dir`.
TrainDemoResult run_train_demo(const std::filesystem::path& out_dir,
                               const TrainDemoOptions& options,
                               const microseg::EpochCallback& on_epoch = {});

/// Shape, spacing, datatype, value range, and a label histogram when the
/// file holds integer labels in {0, 1, 2}.
std::string describe_nifti(const std::filesystem::path& path);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace volseg::pipeline
