#include "volseg/metrics.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace volseg {

double dice_binary(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                   const DiceConfig& config) {
  if (pred.size() != gt.size()) fail(Errc::ShapeMismatch, "mask sizes differ");
  if (!(config.smooth >= 0.0)) fail(Errc::InvalidArgument, "smooth must be >= 0");
  std::size_t inter = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0;
    const bool g = gt[i] != 0;
    a += p;
    b += g;
    inter += p && g;
  }
  const double denom = static_cast<double>(a + b) + config.smooth;
  // smooth == 0 with two empty masks: define as perfect agreement.
  if (denom == 0.0) return 1.0;
  return (2.0 * static_cast<double>(inter) + config.smooth) / denom;
}

CaseReport CaseReport::from_scores(std::string id, double kidney, double tumour,
                                   std::optional<double> elapsed) {
  return {std::move(id), kidney, tumour, (kidney + tumour) / 2.0, elapsed};
}

CaseReport dice_case(const LabelVolume& pred, const LabelVolume& gt, const DiceConfig& config,
                     std::string case_id) {
  if (pred.shape != gt.shape) fail(Errc::ShapeMismatch, "prediction and ground truth shapes differ");
  check_labels(pred);
  check_labels(gt);
  std::vector<std::uint8_t> pk(pred.size()), gk(pred.size()), pt(pred.size()), gtm(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pk[i] = pred.data[i] == kKidney;
    gk[i] = gt.data[i] == kKidney;
    pt[i] = pred.data[i] == kTumour;
    gtm[i] = gt.data[i] == kTumour;
  }
  return CaseReport::from_scores(std::move(case_id), dice_binary(pk, gk, config),
                                 dice_binary(pt, gtm, config));
}

AggregateReport aggregate(std::span<const CaseReport> reports) {
  if (reports.empty()) fail(Errc::EmptyReportList, "cannot aggregate zero reports");
  AggregateReport agg;
  for (const auto& r : reports) {
    agg.mean_kidney += r.kidney_dice;
    agg.mean_tumour += r.tumour_dice;
    agg.mean_average += r.average_dice;
  }
  const double n = static_cast<double>(reports.size());
  agg.mean_kidney /= n;
  agg.mean_tumour /= n;
  agg.mean_average /= n;
  agg.case_count = reports.size();
  return agg;
}

std::string fixed(double value, int places) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, value);
  return buf;
}

void write_report_csv(std::ostream& out, std::span<const CaseReport> reports) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) {
    out << r.case_id << ',' << fixed(r.kidney_dice) << ',' << fixed(r.tumour_dice) << ','
        << fixed(r.average_dice) << ',';
    if (r.elapsed_s) out << fixed(*r.elapsed_s);
    out << '\n';
  }
}

std::string report_csv(std::span<const CaseReport> reports) {
  std::ostringstream os;
  write_report_csv(os, reports);
  return os.str();
}

namespace {

double parse_number(const std::string& field, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    fail(Errc::InvalidArgument, "bad " + what + " value '" + field + "' in report CSV");
  }
}

}  // namespace

std::vector<CaseReport> parse_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader)
    fail(Errc::InvalidArgument, "report CSV header mismatch");
  std::vector<CaseReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 5) fail(Errc::InvalidArgument, "report CSV row needs 5 fields: " + line);
    CaseReport r;
    r.case_id = f[0];
    r.kidney_dice = parse_number(f[1], "kidney_dice");
    r.tumour_dice = parse_number(f[2], "tumour_dice");
    r.average_dice = parse_number(f[3], "average_dice");
    if (!f[4].empty()) r.elapsed_s = parse_number(f[4], "time_s");
    out.push_back(std::move(r));
  }
  return out;
}

std::string aggregate_json(const AggregateReport& agg) {
  nlohmann::ordered_json j;
  j["mean_kidney"] = agg.mean_kidney;
  j["mean_tumour"] = agg.mean_tumour;
  j["mean_average"] = agg.mean_average;
  j["case_count"] = agg.case_count;
  return j.dump(2) + "\n";
}

AggregateReport parse_aggregate_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    AggregateReport agg;
    agg.mean_kidney = j.at("mean_kidney").get<double>();
    agg.mean_tumour = j.at("mean_tumour").get<double>();
    agg.mean_average = j.at("mean_average").get<double>();
    agg.case_count = j.at("case_count").get<std::size_t>();
    return agg;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidArgument, std::string("aggregate JSON: ") + e.what());
  }
}

std::vector<CaseReport> as_serialized(std::span<const CaseReport> reports) {
  std::istringstream in(report_csv(reports));
  return parse_report_csv(in);
}

}  // namespace volseg
