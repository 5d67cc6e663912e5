#include "volseg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "volseg/microseg/checkpoint.hpp"
#include "volseg/nifti.hpp"
#include "volseg/resample.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace volseg::pipeline {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string extent_str(const Extent3& e) {
  return std::to_string(e[0]) + "x" + std::to_string(e[1]) + "x" + std::to_string(e[2]);
}

ordered_json extent_json(const Extent3& e) { return ordered_json::array({e[0], e[1], e[2]}); }
ordered_json vec_json(const Vec3& v) { return ordered_json::array({v[0], v[1], v[2]}); }

template <typename T>
std::array<T, 3> triple(const nlohmann::json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<T>>();
  if (v.size() != 3) fail(Errc::InvalidArgument, std::string(key) + " needs 3 values");
  return {v[0], v[1], v[2]};
}

/// `name`, or its .nii / .nii.gz twin when only that exists.
fs::path find_named(const fs::path& dir, const std::string& name) {
  fs::path p = dir / name;
  if (fs::is_regular_file(p)) return p;
  std::string alt = name;
  if (alt.size() > 3 && alt.ends_with(".gz"))
    alt.resize(alt.size() - 3);
  else
    alt += ".gz";
  p = dir / alt;
  return fs::is_regular_file(p) ? p : fs::path{};
}

std::string with_suffix(const std::string& name, const std::string& suffix) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    const std::string e = ext;
    if (name.size() > e.size() && name.ends_with(e))
      return name.substr(0, name.size() - e.size()) + suffix + e;
  }
  return name + suffix;
}

}  // namespace

Preset parse_preset(std::string_view name) {
  if (name == "model1") return Preset::Model1;
  if (name == "model2") return Preset::Model2;
  if (name == "model3") return Preset::Model3;
  fail(Errc::InvalidArgument, "unknown preset '" + std::string(name) + "'");
}

std::string_view preset_name(Preset p) {
  switch (p) {
    case Preset::Model1: return "model1";
    case Preset::Model2: return "model2";
    case Preset::Model3: return "model3";
  }
  return "custom";
}

void PipelineConfig::validate() const {
  for (double s : target_spacing)
    if (!(s > 0.0)) fail(Errc::InvalidArgument, "target spacing must be > 0");
  if (!(clip_lo < clip_hi)) fail(Errc::InvalidRange, "clip range requires lo < hi");
  if (resize_shape)
    for (std::size_t n : *resize_shape)
      if (n < 1) fail(Errc::InvalidArgument, "resize shape must be >= 1");
  if (patch) patch->validate();
}

PipelineConfig expand_preset(Preset p) { return scaled_preset(p, {128, 128, 32}); }

PipelineConfig scaled_preset(Preset p, const Extent3& net_input) {
  PipelineConfig c;
  c.preset = std::string(preset_name(p));
  PatchSamplerConfig crops;
  crops.patch_size = net_input;
  crops.num_samples = 4;
  crops.pos = 1.0;
  crops.neg = 1.0;
  switch (p) {
    case Preset::Model1: c.resize_shape = net_input; break;
    case Preset::Model2: c.patch = crops; break;
    case Preset::Model3:
      c.resize_shape = net_input;
      c.patch = crops;
      break;
  }
  return c;
}

std::vector<std::string> describe_steps(const PipelineConfig& c) {
  std::vector<std::string> steps;
  steps.push_back("spacing " + num(c.target_spacing[0]) + "x" + num(c.target_spacing[1]) + "x" +
                  num(c.target_spacing[2]) + " mm (image trilinear, label nearest)");
  steps.push_back("clip [" + num(c.clip_lo) + ", " + num(c.clip_hi) + "]");
  if (c.crop_foreground)
    steps.push_back("foreground crop (image > " + num(c.foreground_threshold) + ")");
  if (c.resize_shape) steps.push_back("resize " + extent_str(*c.resize_shape) + " (image trilinear, label nearest)");
  if (c.patch)
    steps.push_back("random crop " + std::to_string(c.patch->num_samples) + " x " +
                    extent_str(c.patch->patch_size) + " (pos " + num(c.patch->pos) + ", neg " +
                    num(c.patch->neg) + ")");
  return steps;
}

std::string config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["preset"] = c.preset;
  j["target_spacing"] = vec_json(c.target_spacing);
  j["clip_range"] = ordered_json::array({c.clip_lo, c.clip_hi});
  j["crop_foreground"] = c.crop_foreground;
  j["foreground_threshold"] = c.foreground_threshold;
  j["resize_shape"] = c.resize_shape ? extent_json(*c.resize_shape) : ordered_json(nullptr);
  if (c.patch) {
    ordered_json p;
    p["patch_size"] = extent_json(c.patch->patch_size);
    p["num_samples"] = c.patch->num_samples;
    p["pos"] = c.patch->pos;
    p["neg"] = c.patch->neg;
    j["patch"] = p;
  } else {
    j["patch"] = nullptr;
  }
  j["seed"] = c.seed;
  j["image_name"] = c.image_name;
  j["label_name"] = c.label_name;
  j["steps"] = describe_steps(c);
  return j.dump(2);
}

PipelineConfig config_from_json(const std::string& text, PipelineConfig base) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) fail(Errc::InvalidArgument, "config must be a JSON object");
    if (j.contains("preset")) {
      const auto name = j.at("preset").get<std::string>();
      if (name != "custom") {
        const auto seed = base.seed;
        base = expand_preset(parse_preset(name));
        base.seed = seed;
      }
    }
    if (j.contains("target_spacing")) base.target_spacing = triple<double>(j, "target_spacing");
    if (j.contains("clip_range")) {
      const auto r = j.at("clip_range").get<std::vector<double>>();
      if (r.size() != 2) fail(Errc::InvalidArgument, "clip_range needs 2 values");
      base.clip_lo = r[0];
      base.clip_hi = r[1];
    }
    if (j.contains("crop_foreground")) base.crop_foreground = j.at("crop_foreground").get<bool>();
    if (j.contains("foreground_threshold"))
      base.foreground_threshold = j.at("foreground_threshold").get<double>();
    if (j.contains("resize_shape")) {
      if (j.at("resize_shape").is_null())
        base.resize_shape.reset();
      else
        base.resize_shape = triple<std::size_t>(j, "resize_shape");
    }
    if (j.contains("patch")) {
      const auto& p = j.at("patch");
      if (p.is_null()) {
        base.patch.reset();
      } else {
        PatchSamplerConfig pc = base.patch.value_or(PatchSamplerConfig{});
        if (p.contains("patch_size")) pc.patch_size = triple<std::size_t>(p, "patch_size");
        if (p.contains("num_samples")) pc.num_samples = p.at("num_samples").get<std::size_t>();
        if (p.contains("pos")) pc.pos = p.at("pos").get<double>();
        if (p.contains("neg")) pc.neg = p.at("neg").get<double>();
        base.patch = pc;
      }
    }
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("image_name")) base.image_name = j.at("image_name").get<std::string>();
    if (j.contains("label_name")) base.label_name = j.at("label_name").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidArgument, std::string("config: ") + e.what());
  }
  base.validate();
  return base;
}

PreprocessResult preprocess_case(const Volume& image, const LabelVolume& label,
                                 const PipelineConfig& config, std::uint64_t seed) {
  config.validate();
  if (image.shape != label.shape) fail(Errc::ShapeMismatch, "image and label shapes differ");
  check_labels(label);
  PreprocessResult r;
  r.input_shape = image.shape;
  r.input_spacing = image.spacing;
  r.seed = seed;

  Volume img = resample_to_spacing(image, config.target_spacing, Interp::Trilinear);
  LabelVolume lbl = resample_to_spacing(label, config.target_spacing, Interp::Nearest);
  r.resampled_shape = img.shape;

  img = clip_intensity(img, config.clip_lo, config.clip_hi);

  r.bbox = full_box(img.shape);
  if (config.crop_foreground) {
    r.bbox = foreground_bbox(img, config.foreground_threshold);
    std::tie(img, lbl) = crop_pair(img, lbl, r.bbox);
  }

  if (config.resize_shape) {
    img = resize_to_shape(img, *config.resize_shape, Interp::Trilinear);
    lbl = resize_to_shape(lbl, *config.resize_shape, Interp::Nearest);
  }

  if (config.patch) {
    PatchSamplerConfig pc = *config.patch;
    pc.seed = seed;
    pc.image_pad = config.clip_lo;
    r.patch_meta = sample_patches(img, lbl, pc);
    for (Patch& p : r.patch_meta) {
      r.stratum_fallbacks += p.stratum_fallback;
      r.outputs.push_back({std::move(p.image), std::move(p.label)});
      p.image = Volume{};
      p.label = LabelVolume{};
    }
  } else {
    r.outputs.push_back({std::move(img), std::move(lbl)});
  }
  return r;
}

std::vector<CaseFiles> discover_cases(const fs::path& dir, const std::string& image_name,
                                      const std::string& label_name) {
  if (!fs::is_directory(dir)) fail(Errc::Io, "not a directory: " + dir.string());
  std::vector<CaseFiles> cases;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    CaseFiles c{entry.path().filename().string(), find_named(entry.path(), image_name),
                find_named(entry.path(), label_name)};
    if (!c.image.empty() || !c.label.empty()) cases.push_back(std::move(c));
  }
  std::sort(cases.begin(), cases.end(),
            [](const CaseFiles& a, const CaseFiles& b) { return a.id < b.id; });
  return cases;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : workers) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

PreprocessSummary run_preprocess(const fs::path& in_dir, const fs::path& out_dir,
                                 const PipelineConfig& config, std::size_t jobs) {
  config.validate();
  const auto cases = discover_cases(in_dir, config.image_name, config.label_name);
  if (cases.empty()) fail(Errc::EmptyCaseList, "no cases found under " + in_dir.string());
  fs::create_directories(out_dir);

  std::vector<ordered_json> entries(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t i) {
    const CaseFiles& c = cases[i];
    ordered_json e;
    e["case_id"] = c.id;
    const std::uint64_t seed = case_seed(config.seed, i);
    e["seed"] = seed;
    try {
      if (c.image.empty()) fail(Errc::MissingCounterpart, "missing " + config.image_name);
      if (c.label.empty()) fail(Errc::MissingCounterpart, "missing " + config.label_name);
      const auto img = nifti::read_image_file(c.image);
      const auto lbl = nifti::read_label_file(c.label);
      const PreprocessResult r = preprocess_case(img.volume, lbl.labels, config, seed);
      e["input_shape"] = extent_json(r.input_shape);
      e["input_spacing"] = vec_json(r.input_spacing);
      e["resampled_shape"] = extent_json(r.resampled_shape);
      e["bbox"] = {{"lo", extent_json(r.bbox.lo)}, {"hi", extent_json(r.bbox.hi)}};
      e["stratum_fallbacks"] = r.stratum_fallbacks;

      const fs::path case_dir = out_dir / c.id;
      fs::create_directories(case_dir);
      ordered_json outputs = ordered_json::array();
      for (std::size_t k = 0; k < r.outputs.size(); ++k) {
        const std::string suffix = config.patch ? "_p" + std::to_string(k) : "";
        const std::string image_file = with_suffix(config.image_name, suffix);
        const std::string label_file = with_suffix(config.label_name, suffix);
        nifti::write_image_file(case_dir / image_file, r.outputs[k].image,
                                nifti::options_for(image_file, nifti::Datatype::Float32));
        nifti::write_label_file(case_dir / label_file, r.outputs[k].label,
                                nifti::options_for(label_file, nifti::Datatype::UInt8));
        ordered_json o;
        o["image"] = c.id + "/" + image_file;
        o["label"] = c.id + "/" + label_file;
        o["shape"] = extent_json(r.outputs[k].image.shape);
        o["spacing"] = vec_json(r.outputs[k].image.spacing);
        if (config.patch) {
          o["centre"] = extent_json(r.patch_meta[k].centre);
          o["padded"] = r.patch_meta[k].padded;
        }
        outputs.push_back(o);
      }
      e["outputs"] = outputs;
      e["status"] = "ok";
    } catch (const std::exception& ex) {
      e["status"] = "error";
      e["error"] = ex.what();
    }
    entries[i] = std::move(e);
  });

  PreprocessSummary summary;
  ordered_json manifest;
  manifest["tool"] = "volseg";
  manifest["version"] = kVersion;
  manifest["config"] = ordered_json::parse(config_to_json(config));
  manifest["cases"] = ordered_json::array();
  for (auto& e : entries) {
    (e["status"] == "ok" ? summary.processed : summary.failed)++;
    manifest["cases"].push_back(std::move(e));
  }
  manifest["processed"] = summary.processed;
  manifest["failed"] = summary.failed;
  summary.manifest_json = manifest.dump(2) + "\n";
  std::ofstream(out_dir / "manifest.json") << summary.manifest_json;
  return summary;
}

void SplitSpec::validate() const {
  if (!(train_fraction >= 0.0) || !(test_fraction >= 0.0) ||
      std::abs(train_fraction + test_fraction - 1.0) > 1e-9)
    fail(Errc::InvalidArgument, "split fractions must be nonnegative and sum to 1");
}

Split split_cases(std::vector<std::string> ids, const SplitSpec& spec) {
  spec.validate();
  if (ids.empty()) fail(Errc::EmptyCaseList, "cannot split an empty case list");
  Rng rng(spec.seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.uniform_index(i)]);
  const auto n_train = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(ids.size()),
                       std::round(static_cast<double>(ids.size()) * spec.train_fraction)));
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

EvaluateResult run_evaluate(const fs::path& pred_dir, const fs::path& gt_dir,
                            const fs::path& csv_out, const std::string& label_name,
                            std::size_t jobs) {
  std::map<std::string, fs::path> preds, gts;
  for (const auto& c : discover_cases(pred_dir, "", label_name))
    if (!c.label.empty()) preds[c.id] = c.label;
  for (const auto& c : discover_cases(gt_dir, "", label_name))
    if (!c.label.empty()) gts[c.id] = c.label;

  EvaluateResult result;
  std::vector<std::string> ids;
  std::set<std::string> all;
  for (const auto& [id, _] : preds) all.insert(id);
  for (const auto& [id, _] : gts) all.insert(id);
  for (const auto& id : all) {
    if (!preds.contains(id))
      result.missing.push_back(id + ": no prediction");
    else if (!gts.contains(id))
      result.missing.push_back(id + ": no ground truth");
    else
      ids.push_back(id);
  }

  std::vector<std::optional<CaseReport>> rows(ids.size());
  std::vector<std::string> errors(ids.size());
  parallel_for(ids.size(), jobs, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto pred = nifti::read_label_file(preds.at(ids[i]));
      const auto gt = nifti::read_label_file(gts.at(ids[i]));
      CaseReport r = dice_case(pred.labels, gt.labels, {}, ids[i]);
      r.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows[i] = std::move(r);
    } catch (const std::exception& e) {
      errors[i] = ids[i] + ": " + e.what();
    }
  });
  std::vector<CaseReport> reports;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (rows[i]) reports.push_back(std::move(*rows[i]));
    if (!errors[i].empty()) result.errors.push_back(errors[i]);
  }

  result.reports = as_serialized(reports);
  if (!result.reports.empty()) result.aggregate = aggregate(result.reports);

  if (csv_out.has_parent_path()) fs::create_directories(csv_out.parent_path());
  {
    std::ofstream out(csv_out);
    if (!out) fail(Errc::Io, "cannot write " + csv_out.string());
    write_report_csv(out, result.reports);
  }
  ordered_json j;
  if (result.aggregate) {
    j = ordered_json::parse(aggregate_json(*result.aggregate));
  } else {
    j["case_count"] = 0;
  }
  j["missing"] = result.missing;
  j["errors"] = result.errors;
  fs::path json_out = csv_out;
  json_out.replace_extension(".json");
  std::ofstream(json_out) << j.dump(2) << "\n";
  return result;
}

TrainDemoOptions TrainDemoOptions::defaults(Preset preset) {
  TrainDemoOptions o;
  o.preprocess = scaled_preset(preset, {32, 32, 16});
  o.train.epochs = 30;
  o.train.learning_rate = 3e-3;
  return o;
}

TrainDemoResult run_train_demo(const fs::path& out_dir, const TrainDemoOptions& options,
                               const microseg::EpochCallback& on_epoch) {
  if (options.train_cases < 1) fail(Errc::InvalidArgument, "train-demo needs >= 1 training case");
  if (options.val_cases < 1) fail(Errc::InvalidArgument, "train-demo needs >= 1 held-out case");
  fs::create_directories(out_dir);

  const std::size_t total = options.train_cases + options.val_cases;
  std::vector<PreprocessResult> processed(total);
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint64_t seed = case_seed(options.seed, i);
    const LabeledVolume raw = microseg::make_phantom(seed, options.phantom);
    processed[i] = preprocess_case(raw.image, raw.label, options.preprocess, seed);
  }

  std::vector<LabeledVolume> train_set, val_set;
  std::vector<std::string> val_ids;
  for (std::size_t i = 0; i < total; ++i) {
    const bool held_out = i >= options.train_cases;
    for (std::size_t k = 0; k < processed[i].outputs.size(); ++k) {
      auto& lv = processed[i].outputs[k];
      if (held_out) {
        char id[32];
        std::snprintf(id, sizeof(id), "case_%05zu", i);
        val_ids.push_back(processed[i].outputs.size() > 1 ? std::string(id) + "_p" + std::to_string(k)
                                                          : std::string(id));
        val_set.push_back(std::move(lv));
      } else {
        train_set.push_back(std::move(lv));
      }
    }
  }

  microseg::NetworkConfig net = options.network;
  net.window_lo = options.preprocess.clip_lo;
  net.window_hi = options.preprocess.clip_hi;
  microseg::TrainResult trained = microseg::train(train_set, val_set, net, options.train, on_epoch);

  microseg::save_checkpoint(out_dir / "model.ckpt", trained.model);
  {
    std::ofstream csv(out_dir / "curves.csv");
    microseg::write_curve_csv(csv, trained.curve);
  }

  const fs::path pred_dir = out_dir / "predictions";
  const fs::path gt_dir = out_dir / "val_gt";
  for (std::size_t i = 0; i < val_set.size(); ++i) {
    fs::create_directories(pred_dir / val_ids[i]);
    fs::create_directories(gt_dir / val_ids[i]);
    const LabelVolume pred = microseg::predict(trained.model, val_set[i].image);
    nifti::write_label_file(pred_dir / val_ids[i] / "segmentation.nii.gz", pred,
                            {nifti::Datatype::UInt8, true});
    nifti::write_label_file(gt_dir / val_ids[i] / "segmentation.nii.gz", val_set[i].label,
                            {nifti::Datatype::UInt8, true});
  }

  TrainDemoResult result;
  result.curve = std::move(trained.curve);
  result.evaluation = run_evaluate(pred_dir, gt_dir, out_dir / "report.csv");
  return result;
}

std::string describe_nifti(const fs::path& path) {
  const nifti::ImageFile f = nifti::read_image_file(path);
  const Volume& v = f.volume;
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "shape %zux%zux%zu, spacing %.2f %.2f %.2f\n", v.shape[0],
                v.shape[1], v.shape[2], v.spacing[0], v.spacing[1], v.spacing[2]);
  os << line;
  os << "datatype " << nifti::datatype_name(f.header.datatype) << " (bitpix " << f.header.bitpix
     << "), " << (f.header.byte_order == nifti::ByteOrder::Little ? "little" : "big")
     << "-endian";
  if (f.header.has_scaling())
    os << ", scaling " << num(f.header.scl_slope) << " * x + " << num(f.header.scl_inter);
  os << "\n";
  const auto [lo, hi] = std::minmax_element(v.data.begin(), v.data.end());
  os << "range [" << num(*lo) << ", " << num(*hi) << "]\n";

  const bool labels = nifti::is_integer(f.header.datatype) &&
                      std::all_of(v.data.begin(), v.data.end(), [](double x) {
                        return x == 0.0 || x == 1.0 || x == 2.0;
                      });
  if (labels) {
    std::array<std::size_t, kClassCount> counts{};
    for (double x : v.data) ++counts[static_cast<std::size_t>(x)];
    os << "labels background " << counts[0] << ", kidney " << counts[1] << ", tumour " << counts[2]
       << "\n";
  }
  return os.str();
}

}  // namespace volseg::pipeline
