#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "volseg/nifti.hpp"
#include "volseg/overlay.hpp"
#include "volseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace volseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCaseFailure = 1;
constexpr int kExitUsage = 2;

/// Thrown for bad flags or configuration; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--preset", preset, "model1 | model2 | model3")
        ->check(CLI::IsMember({"model1", "model2", "model3"}));
    cmd->add_option("--seed", seed, "64-bit seed");
    cmd->add_option("--jobs", jobs, "worker threads (0 = all cores)");
  }

  std::size_t workers() const {
    return jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : jobs;
  }

  nlohmann::json config_json() const {
    if (config_path.empty()) return nlohmann::json::object();
    std::ifstream in(config_path);
    try {
      auto j = nlohmann::json::parse(in);
      if (!j.is_object()) throw UsageError("config must be a JSON object");
      return j;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(config_path + ": " + e.what());
    }
  }
};

/// Preset flag, then config file keys (other than "preset" when the flag is
/// given), then --seed.
pipeline::PipelineConfig build_pipeline_config(const CommonOptions& opts, nlohmann::json j,
                                               pipeline::PipelineConfig base) {
  try {
    if (!opts.preset.empty()) {
      const auto seed = base.seed;
      base = pipeline::expand_preset(pipeline::parse_preset(opts.preset));
      base.seed = seed;
      j.erase("preset");
    }
    base = pipeline::config_from_json(j.dump(), base);
    if (opts.seed) base.seed = *opts.seed;
    base.validate();
    return base;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

int cmd_preprocess(const CommonOptions& opts, const std::string& in, const std::string& out,
                   const std::optional<std::string>& image_name,
                   const std::optional<std::string>& label_name) {
  pipeline::PipelineConfig config = build_pipeline_config(opts, opts.config_json(), {});
  if (image_name) config.image_name = *image_name;
  if (label_name) config.label_name = *label_name;
  for (const auto& step : pipeline::describe_steps(config)) std::cout << "step: " << step << "\n";
  const auto summary = pipeline::run_preprocess(in, out, config, opts.workers());
  std::cout << "processed " << summary.processed << ", failed " << summary.failed << "\n";
  std::cout << "manifest " << (fs::path(out) / "manifest.json").string() << "\n";
  return summary.failed == 0 ? kExitOk : kExitCaseFailure;
}

std::vector<std::string> read_case_ids(const fs::path& source) {
  std::vector<std::string> ids;
  if (fs::is_directory(source)) {
    for (const auto& c : pipeline::discover_cases(source, "imaging.nii.gz", "segmentation.nii.gz"))
      ids.push_back(c.id);
    return ids;
  }
  std::ifstream in(source);
  if (!in) fail(Errc::Io, "cannot read " + source.string());
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

int cmd_split(const CommonOptions& opts, const std::string& source,
              std::optional<double> train_fraction, const std::string& out) {
  pipeline::SplitSpec spec;
  const auto j = opts.config_json();
  try {
    if (j.contains("train_fraction")) spec.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (train_fraction) spec.train_fraction = *train_fraction;
  spec.test_fraction = 1.0 - spec.train_fraction;
  if (opts.seed) spec.seed = *opts.seed;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto ids = read_case_ids(source);
  const auto split = pipeline::split_cases(ids, spec);
  nlohmann::ordered_json doc;
  doc["seed"] = spec.seed;
  doc["train_fraction"] = spec.train_fraction;
  doc["train"] = split.train;
  doc["test"] = split.test;
  const std::string text = doc.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream(out) << text;
    std::cout << "train " << split.train.size() << ", test " << split.test.size() << "\n";
  }
  return kExitOk;
}

int cmd_evaluate(const CommonOptions& opts, const std::string& pred, const std::string& gt,
                 const std::string& out, const std::string& label_name) {
  const auto result = pipeline::run_evaluate(pred, gt, out, label_name, opts.workers());
  for (const auto& m : result.missing) std::cerr << "missing: " << m << "\n";
  for (const auto& e : result.errors) std::cerr << "error: " << e << "\n";
  if (result.aggregate) {
    const auto& a = *result.aggregate;
    std::cout << "cases " << a.case_count << "  kidney " << fixed(a.mean_kidney) << "  tumour "
              << fixed(a.mean_tumour) << "  average " << fixed(a.mean_average) << "\n";
  }
  return result.ok() ? kExitOk : kExitCaseFailure;
}

struct DemoFlags {
  std::optional<std::size_t> train_cases, val_cases, epochs, batch_size;
  std::optional<double> lr;
};

int cmd_train_demo(const CommonOptions& opts, const std::string& out, const DemoFlags& flags) {
  const pipeline::Preset preset = opts.preset.empty() ? pipeline::Preset::Model1
                                            : pipeline::parse_preset(opts.preset);
  auto options = pipeline::TrainDemoOptions::defaults(preset);
  auto j = opts.config_json();
  try {
    if (j.contains("train_cases")) options.train_cases = j.at("train_cases").get<std::size_t>();
    if (j.contains("val_cases")) options.val_cases = j.at("val_cases").get<std::size_t>();
    if (j.contains("epochs")) options.train.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("learning_rate")) options.train.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("batch_size")) options.train.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("seed")) options.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("preprocess"))
      options.preprocess = pipeline::config_from_json(j.at("preprocess").dump(), options.preprocess);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (flags.train_cases) options.train_cases = *flags.train_cases;
  if (flags.val_cases) options.val_cases = *flags.val_cases;
  if (flags.epochs) options.train.epochs = *flags.epochs;
  if (flags.lr) options.train.learning_rate = *flags.lr;
  if (flags.batch_size) options.train.batch_size = *flags.batch_size;
  if (opts.seed) options.seed = *opts.seed;
  options.preprocess.seed = options.seed;
  options.network.init_seed = options.seed;
  options.train.seed = options.seed;
  try {
    options.preprocess.validate();
    options.network.validate();
    options.train.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }

  const auto result = pipeline::run_train_demo(out, options, [](const microseg::EpochRecord& r) {
    std::printf("epoch %3zu  train %.4f  val %.4f  lr %g\n", r.epoch, r.train_loss, r.val_loss, r.lr);
    std::fflush(stdout);
  });
  if (result.evaluation.aggregate) {
    const auto& a = *result.evaluation.aggregate;
    std::cout << "held-out cases " << a.case_count << "  kidney " << fixed(a.mean_kidney)
              << "  tumour " << fixed(a.mean_tumour) << "  average " << fixed(a.mean_average)
              << "\n";
  }
  std::cout << "wrote " << (fs::path(out) / "model.ckpt").string() << ", "
            << (fs::path(out) / "curves.csv").string() << ", "
            << (fs::path(out) / "report.csv").string() << "\n";
  return result.evaluation.ok() ? kExitOk : kExitCaseFailure;
}

int cmd_overlay(const std::string& image_path, const std::string& mask_path,
                const std::string& axis_name, std::optional<std::size_t> slice,
                const std::vector<double>& window, const std::string& out) {
  const Axis axis = parse_axis(axis_name);
  const auto image = nifti::read_image_file(image_path);
  const auto mask = nifti::read_label_file(mask_path);
  const std::size_t index = slice.value_or(slice_count(axis, image.volume.shape) / 2);
  const double lo = window.size() == 2 ? window[0] : kClipLow;
  const double hi = window.size() == 2 ? window[1] : kClipHigh;
  const RgbImage img = render_overlay(image.volume, mask.labels, axis, index, lo, hi);
  nifti::write_bytes(out, encode_ppm(img));
  std::cout << "wrote " << out << " (" << img.width << "x" << img.height << ")\n";
  return kExitOk;
}

int cmd_info(const std::string& path) {
  const std::string summary = pipeline::describe_nifti(path);
  std::cout << path << "\n" << summary;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"volseg: volumetric CT preprocessing, training and evaluation"};
  app.set_version_flag("--version", std::string(pipeline::kVersion));
  app.require_subcommand(1);

  CommonOptions common;
  int status = kExitOk;

  auto* pre = app.add_subcommand("preprocess", "resample, clip, crop and resize/patch every case");
  std::string pre_in, pre_out;
  std::optional<std::string> image_name, label_name;
  pre->add_option("input", pre_in, "directory of case_*/ folders")->required()->check(CLI::ExistingDirectory);
  pre->add_option("output", pre_out, "output directory")->required();
  pre->add_option("--image-name", image_name, "image file name inside each case folder");
  pre->add_option("--label-name", label_name, "label file name inside each case folder");
  common.attach(pre);

  auto* split = app.add_subcommand("split", "seeded train/test split of case ids");
  std::string split_src, split_out;
  std::optional<double> train_fraction;
  split->add_option("cases", split_src, "case directory or text file with one id per line")->required();
  split->add_option("--train-fraction", train_fraction, "fraction of cases used for training (default 0.8)");
  split->add_option("--out", split_out, "write the split JSON here instead of stdout");
  common.attach(split);

  auto* eval = app.add_subcommand("evaluate", "per-case and aggregate Dice of predictions");
  std::string pred_dir, gt_dir, report_out, eval_label = "segmentation.nii.gz";
  eval->add_option("predictions", pred_dir, "prediction case directory")->required();
  eval->add_option("ground_truth", gt_dir, "ground-truth case directory")->required();
  eval->add_option("--out", report_out, "CSV report path; the aggregate JSON goes next to it")->required();
  eval->add_option("--label-name", eval_label, "label file name inside each case folder");
  common.attach(eval);

  auto* demo = app.add_subcommand("train-demo", "train the small network on synthetic phantoms");
  std::string demo_out;
  DemoFlags demo_flags;
  demo->add_option("output", demo_out, "output directory")->required();
  demo->add_option("--train-cases", demo_flags.train_cases, "training phantoms (default 20)");
  demo->add_option("--val-cases", demo_flags.val_cases, "held-out phantoms (default 5)");
  demo->add_option("--epochs", demo_flags.epochs, "epochs (default 30)");
  demo->add_option("--lr", demo_flags.lr, "initial learning rate (default 3e-3)");
  demo->add_option("--batch-size", demo_flags.batch_size, "samples per update (default 1)");
  common.attach(demo);

  auto* overlay = app.add_subcommand("overlay", "render a mask over one CT slice as PPM");
  std::string ov_image, ov_mask, ov_axis = "axial", ov_out;
  std::optional<std::size_t> ov_slice;
  std::vector<double> ov_window;
  overlay->add_option("image", ov_image, "CT volume")->required()->check(CLI::ExistingFile);
  overlay->add_option("mask", ov_mask, "label volume")->required()->check(CLI::ExistingFile);
  overlay->add_option("--axis", ov_axis, "axial | coronal | sagittal")
      ->check(CLI::IsMember({"axial", "coronal", "sagittal"}));
  overlay->add_option("--slice", ov_slice, "slice index (default: middle)");
  overlay->add_option("--window", ov_window, "grey window lo hi (default -79 304)")->expected(2);
  overlay->add_option("--out", ov_out, "output .ppm")->required();

  auto* info = app.add_subcommand("info", "print a NIfTI header summary");
  std::string info_path;
  info->add_option("path", info_path, "NIfTI file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*pre)
      status = cmd_preprocess(common, pre_in, pre_out, image_name, label_name);
    else if (*split)
      status = cmd_split(common, split_src, train_fraction, split_out);
    else if (*eval)
      status = cmd_evaluate(common, pred_dir, gt_dir, report_out, eval_label);
    else if (*demo)
      status = cmd_train_demo(common, demo_out, demo_flags);
    else if (*overlay)
      status = cmd_overlay(ov_image, ov_mask, ov_axis, ov_slice, ov_window, ov_out);
    else if (*info)
      status = cmd_info(info_path);
  } catch (const UsageError& e) {
    std::cerr << "volseg: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "volseg: " << e.what() << "\n";
    return kExitCaseFailure;
  }
  return status;
}
