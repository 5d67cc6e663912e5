#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volseg/volume.hpp"

namespace volseg {

struct DiceConfig {
  double smooth = 1.0;
};

/// (2|A∩B| + smooth) / (|A| + |B| + smooth); nonzero bytes are members.
double dice_binary(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                   const DiceConfig& config = {});

struct CaseReport {
  std::string case_id;
  double kidney_dice = 0.0;
  double tumour_dice = 0.0;
  double average_dice = 0.0;
  std::optional<double> elapsed_s;

  static CaseReport from_scores(std::string id, double kidney, double tumour,
                                std::optional<double> elapsed = std::nullopt);
};

/// Scores kidney (1) and tumour (2); background is never scored.
CaseReport dice_case(const LabelVolume& pred, const LabelVolume& gt,
                     const DiceConfig& config = {}, std::string case_id = {});

struct AggregateReport {
  double mean_kidney = 0.0;
  double mean_tumour = 0.0;
  double mean_average = 0.0;
  std::size_t case_count = 0;
};

AggregateReport aggregate(std::span<const CaseReport> reports);

inline constexpr const char* kReportCsvHeader =
    "case_id,kidney_dice,tumour_dice,average_dice,time_s";

/// Fixed-point text with `places` decimals, as used in every report.
std::string fixed(double value, int places = 4);

void write_report_csv(std::ostream& out, std::span<const CaseReport> reports);
std::string report_csv(std::span<const CaseReport> reports);
std::vector<CaseReport> parse_report_csv(std::istream& in);

std::string aggregate_json(const AggregateReport& agg);
AggregateReport parse_aggregate_json(const std::string& text);

/// Round-trips each report through its 4-dp serialization, so values held
/// in memory equal what a reader of the CSV sees.
std::vector<CaseReport> as_serialized(std::span<const CaseReport> reports);

}  // namespace volseg
