#ifndef CRASHRE_DESIGN_HPP_
#define CRASHRE_DESIGN_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crashre/data_model.hpp"

namespace crashre {

enum class ExposureForm { kSingleVolume, kProductOfVolumes };

// Conflicting-volume definition for one crash type.
struct ExposureRule {
  CrashType crash_type;
  ExposureForm form;
  std::array<std::string_view, 2> operands;  // second is empty for single volume

  std::size_t operand_count() const {
    return form == ExposureForm::kSingleVolume ? 1 : 2;
  }
};

// rear_end, sideswipe   -> aadt_total
// opposing_left_turn    -> aadt_through x opposing_aadt_left
// crossing_left_turn    -> aadt_left x near_cross_aadt_through
// right_angle           -> aadt_through x near_cross_aadt_through
ExposureRule exposure_rule(CrashType type);

// Positive conflicting volume; products are formed in exact integer
// arithmetic. Throws ExposureError naming the field when an operand is
// missing or not positive.
double conflicting_volume(const ApproachRecord& rec, const ExposureRule& rule);

inline constexpr std::string_view kInterceptColumn = "intercept";
inline constexpr std::string_view kLogExposureColumn = "log_exposure";
inline constexpr std::string_view kProtectedColumn = "lt_protected";
inline constexpr std::string_view kProtectedPermissiveColumn =
    "lt_protected_permissive";

struct ModelSpec {
  CrashType crash_type = CrashType::kRearEnd;
  // Record field names in column order. `left_turn_control` expands to the
  // two indicators lt_protected, lt_protected_permissive (permissive is
  // the baseline); the indicators may also be listed individually.
  std::vector<std::string> covariates;
  // Subtract column means from covariates. Changes what the reported
  // coefficients mean; off for results comparable with raw-scale tables.
  bool center_covariates = false;
};

// Covariates that came out significant for each crash type in the
// four-leg intersection study this model family was built for.
std::vector<std::string> default_covariates(CrashType type);

// Expands `left_turn_control` and validates names. Throws SpecError on an
// unknown name or a duplicate column.
std::vector<std::string> expand_covariates(std::span<const std::string> covariates);

// Value of one expanded covariate column for a record; nullopt when the
// underlying field is missing.
std::optional<double> covariate_value(const ApproachRecord& rec, std::string_view column);

struct DesignRow {
  std::size_t group;
  std::int64_t response;
  std::span<const double> x;  // full predictor row, aligned with columns()
};

class DesignMatrix {
 public:
  DesignMatrix() = default;
  // `values` is row-major rows x columns.size().
  DesignMatrix(std::vector<std::string> columns, std::vector<double> values,
               std::vector<std::size_t> groups, std::vector<std::int64_t> responses,
               std::size_t group_count);

  std::size_t rows() const { return responses_.size(); }
  std::size_t cols() const { return columns_.size(); }
  std::size_t group_count() const { return group_count_; }
  std::span<const std::string> columns() const { return columns_; }

  DesignRow row(std::size_t i) const {
    return {groups_[i], responses_[i],
            std::span<const double>(values_).subspan(i * cols(), cols())};
  }
  std::span<const double> values() const { return values_; }
  std::span<const std::size_t> groups() const { return groups_; }
  std::span<const std::int64_t> responses() const { return responses_; }

  std::optional<std::size_t> column_index(std::string_view name) const;
  // Log conflicting volume of row i, if the design has that column.
  std::optional<double> log_exposure(std::size_t i) const;

  // Populated by build_design.
  std::optional<CrashType> crash_type;
  std::vector<std::size_t> record_index;  // source record of each row
  std::size_t excluded_records = 0;       // dropped for missing values
  std::vector<double> column_centers;     // subtracted means (centered specs)

 private:
  std::vector<std::string> columns_;
  std::vector<double> values_;
  std::vector<std::size_t> groups_;
  std::vector<std::int64_t> responses_;
  std::size_t group_count_ = 0;
};

// Columns: intercept, log_exposure, then the expanded covariates. Records
// with a missing exposure operand or covariate are excluded and counted.
// Throws SpecError for unknown covariates or an empty result, and
// ExposureError for a present but nonpositive volume.
DesignMatrix build_design(const Dataset& ds, const ModelSpec& spec);

}  // namespace crashre

#endif  // CRASHRE_DESIGN_HPP_
