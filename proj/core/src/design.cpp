#include "crashre/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "crashre/errors.hpp"

namespace crashre {

namespace {

constexpr std::string_view kLeftTurnControl = "left_turn_control";

std::string record_label(const ApproachRecord& rec) {
  return "intersection `" + rec.intersection_id + "` approach " +
         approach_letter(rec.approach);
}

// Rejects fractional or out-of-range volumes before integer conversion.
std::int64_t volume_operand(const ApproachRecord& rec, std::string_view field) {
  const FieldInfo* info = find_field(field);
  const auto& v = rec.*(info->member);
  if (!v) {
    throw ExposureError(record_label(rec) + ": volume `" + std::string(field) +
                            "` is missing",
                        std::string(field));
  }
  if (!(*v > 0) || *v != std::floor(*v) || *v > 9.0e15) {
    throw ExposureError(record_label(rec) + ": volume `" + std::string(field) +
                            "` must be a positive integer, got " + std::to_string(*v),
                        std::string(field));
  }
  return static_cast<std::int64_t>(*v);
}

}  // namespace

ExposureRule exposure_rule(CrashType type) {
  switch (type) {
    case CrashType::kRearEnd:
    case CrashType::kSideswipe:
      return {type, ExposureForm::kSingleVolume, {"aadt_total", ""}};
    case CrashType::kOpposingLeftTurn:
      return {type, ExposureForm::kProductOfVolumes, {"aadt_through", "opposing_aadt_left"}};
    case CrashType::kCrossingLeftTurn:
      return {type, ExposureForm::kProductOfVolumes, {"aadt_left", "near_cross_aadt_through"}};
    case CrashType::kRightAngle:
      return {type, ExposureForm::kProductOfVolumes,
              {"aadt_through", "near_cross_aadt_through"}};
  }
  throw SpecError("unhandled crash type");
}

double conflicting_volume(const ApproachRecord& rec, const ExposureRule& rule) {
  const std::int64_t first = volume_operand(rec, rule.operands[0]);
  if (rule.form == ExposureForm::kSingleVolume) return static_cast<double>(first);
  const std::int64_t second = volume_operand(rec, rule.operands[1]);
  std::int64_t product = 0;
  if (__builtin_mul_overflow(first, second, &product) || product > (std::int64_t{1} << 53)) {
    throw ExposureError(record_label(rec) + ": conflicting volume product overflows",
                        std::string(rule.operands[1]));
  }
  return static_cast<double>(product);
}

std::vector<std::string> default_covariates(CrashType type) {
  switch (type) {
    case CrashType::kRearEnd:
      return {"lanes_right", "friction", "coordinated", "left_turn_control", "speed_limit"};
    case CrashType::kOpposingLeftTurn:
      return {"lanes_through", "median_present", "left_turn_control", "speed_limit"};
    case CrashType::kCrossingLeftTurn:
      return {"opposing_lanes_through", "median_present", "left_turn_control",
              "near_cross_speed_limit"};
    case CrashType::kRightAngle:
      return {"lanes_through", "yellow_minus_standard", "all_red_minus_standard",
              "flashing_mode"};
    case CrashType::kSideswipe:
      return {"lanes_left", "lanes_through", "lanes_right", "left_turn_control"};
  }
  return {};
}

std::vector<std::string> expand_covariates(std::span<const std::string> covariates) {
  std::vector<std::string> out;
  for (const auto& name : covariates) {
    if (name == kLeftTurnControl) {
      out.emplace_back(kProtectedColumn);
      out.emplace_back(kProtectedPermissiveColumn);
    } else if (name == kProtectedColumn || name == kProtectedPermissiveColumn ||
               find_field(name) != nullptr) {
      out.push_back(name);
    } else {
      throw SpecError("unknown covariate `" + name + "`");
    }
  }
  std::set<std::string_view> seen;
  for (const auto& c : out) {
    if (c == kInterceptColumn || c == kLogExposureColumn || !seen.insert(c).second) {
      throw SpecError("covariate column `" + c + "` appears more than once");
    }
  }
  return out;
}

std::optional<double> covariate_value(const ApproachRecord& rec, std::string_view column) {
  if (column == kProtectedColumn || column == kProtectedPermissiveColumn) {
    if (!rec.left_turn_control) return std::nullopt;
    const double code = column == kProtectedColumn ? 2.0 : 1.0;
    return *rec.left_turn_control == code ? 1.0 : 0.0;
  }
  const FieldInfo* info = find_field(column);
  if (info == nullptr) throw SpecError("unknown covariate `" + std::string(column) + "`");
  return rec.*(info->member);
}

DesignMatrix::DesignMatrix(std::vector<std::string> columns, std::vector<double> values,
                           std::vector<std::size_t> groups,
                           std::vector<std::int64_t> responses, std::size_t group_count)
    : columns_(std::move(columns)),
      values_(std::move(values)),
      groups_(std::move(groups)),
      responses_(std::move(responses)),
      group_count_(group_count) {
  if (values_.size() != responses_.size() * columns_.size() ||
      groups_.size() != responses_.size()) {
    throw SpecError("design matrix dimensions disagree");
  }
  for (auto g : groups_) {
    if (g >= group_count_) throw SpecError("design row group index out of range");
  }
  for (auto y : responses_) {
    if (y < 0) throw SpecError("design response must be nonnegative");
  }
}

std::optional<std::size_t> DesignMatrix::column_index(std::string_view name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns_.begin());
}

std::optional<double> DesignMatrix::log_exposure(std::size_t i) const {
  const auto c = column_index(kLogExposureColumn);
  if (!c) return std::nullopt;
  double v = values_[i * cols() + *c];
  if (!column_centers.empty()) v += column_centers[*c];
  return v;
}

DesignMatrix build_design(const Dataset& ds, const ModelSpec& spec) {
  const auto rule = exposure_rule(spec.crash_type);
  const auto expanded = expand_covariates(spec.covariates);

  std::vector<std::string> columns{std::string(kInterceptColumn),
                                   std::string(kLogExposureColumn)};
  columns.insert(columns.end(), expanded.begin(), expanded.end());
  const std::size_t p = columns.size();

  std::vector<double> values;
  std::vector<std::size_t> groups;
  std::vector<std::int64_t> responses;
  std::vector<std::size_t> record_index;
  std::size_t excluded = 0;
  std::vector<double> row(p);

  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto& rec = ds.record(k);
    bool usable = true;
    for (std::size_t o = 0; o < rule.operand_count(); ++o) {
      usable = usable && (rec.*(find_field(rule.operands[o])->member)).has_value();
    }
    row[0] = 1.0;
    for (std::size_t c = 0; usable && c < expanded.size(); ++c) {
      const auto v = covariate_value(rec, expanded[c]);
      usable = v.has_value();
      if (usable) row[2 + c] = *v;
    }
    if (!usable) {
      ++excluded;
      continue;
    }
    row[1] = std::log(conflicting_volume(rec, rule));
    values.insert(values.end(), row.begin(), row.end());
    groups.push_back(ds.group_of(k));
    responses.push_back(rec.crashes(spec.crash_type));
    record_index.push_back(k);
  }
  if (responses.empty()) {
    throw SpecError("no usable records for crash type `" +
                    std::string(to_string(spec.crash_type)) + "` (" +
                    std::to_string(excluded) + " excluded for missing values)");
  }

  std::vector<double> centers;
  if (spec.center_covariates) {
    const std::size_t n = responses.size();
    centers.assign(p, 0.0);
    for (std::size_t c = 1; c < p; ++c) {
      double sum = 0;
      for (std::size_t i = 0; i < n; ++i) sum += values[i * p + c];
      centers[c] = sum / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) values[i * p + c] -= centers[c];
    }
  }

  DesignMatrix dm(std::move(columns), std::move(values), std::move(groups),
                  std::move(responses), ds.group_count());
  dm.crash_type = spec.crash_type;
  dm.record_index = std::move(record_index);
  dm.excluded_records = excluded;
  dm.column_centers = std::move(centers);
  return dm;
}

}  // namespace crashre
