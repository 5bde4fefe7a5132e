#ifndef CRASHRE_DATA_MODEL_HPP_
#define CRASHRE_DATA_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace crashre {

enum class CrashType {
  kRearEnd,
  kOpposingLeftTurn,
  kCrossingLeftTurn,
  kRightAngle,
  kSideswipe,
};

inline constexpr std::array<CrashType, 5> kAllCrashTypes = {
    CrashType::kRearEnd, CrashType::kOpposingLeftTurn,
    CrashType::kCrossingLeftTurn, CrashType::kRightAngle,
    CrashType::kSideswipe};

// snake_case names: "rear_end", "opposing_left_turn", ...
std::string_view to_string(CrashType type);
CrashType parse_crash_type(std::string_view name);

// Column holding the 6-year crash total of `type`, e.g. "crashes_rear_end".
std::string crash_count_column(CrashType type);

// Legs of a four-leg intersection, clockwise from north. An approach is
// named after the leg its traffic arrives from.
enum class Approach : std::uint8_t { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

// Accepts N/E/S/W (any case), north/east/south/west, or 0-3 (clockwise from N).
std::optional<Approach> parse_approach(std::string_view label);
char approach_letter(Approach a);

enum class TrafficSide { kRight, kLeft };

Approach opposite(Approach a);
// The crossing approach whose stream passes closest to `a`'s stop line.
// Right-hand traffic: the stream arriving from the driver's left
// (N->E, E->S, S->W, W->N). Left-hand traffic mirrors it.
Approach near_side_crossing(Approach a, TrafficSide side);

using OptReal = std::optional<double>;

struct ApproachRecord {
  std::string intersection_id;
  Approach approach = Approach::kNorth;

  // Operating characteristics (vehicles/day).
  OptReal aadt_total;
  OptReal aadt_through;
  OptReal aadt_left;
  OptReal aadt_right;
  OptReal opposing_aadt_left;
  OptReal opposing_aadt_through;
  OptReal near_cross_aadt_through;

  // Geometry.
  OptReal lanes_total;
  OptReal lanes_through;
  OptReal lanes_left;
  OptReal lanes_right;
  OptReal opposing_lanes_through;
  OptReal median_present;
  OptReal left_turn_offset;
  OptReal intersection_angle;

  // Control.
  OptReal friction;  // friction coefficient x 100
  OptReal coordinated;
  OptReal left_turn_control;  // 0 permissive, 1 protected-permissive, 2 protected
  OptReal yellow_minus_standard;
  OptReal all_red_minus_standard;
  OptReal flashing_mode;

  OptReal speed_limit;
  OptReal near_cross_speed_limit;
  OptReal county;

  std::array<std::int64_t, kAllCrashTypes.size()> crash_counts{};

  std::int64_t crashes(CrashType type) const {
    return crash_counts[static_cast<std::size_t>(type)];
  }
  std::int64_t& crashes(CrashType type) {
    return crash_counts[static_cast<std::size_t>(type)];
  }

  bool operator==(const ApproachRecord&) const = default;
};

enum class FieldKind {
  kVolume,     // nonnegative integer
  kLaneCount,  // nonnegative integer
  kBinary,     // {0, 1}
  kOffset,     // {-1, 0, 1}
  kLeftTurnControl,  // {0, 1, 2}
  kReal,
};

struct FieldInfo {
  std::string_view name;
  OptReal ApproachRecord::*member;
  FieldKind kind;
  // Observed range of the source data; values outside only warn.
  std::optional<double> typical_min;
  std::optional<double> typical_max;
  // Filled from a partner approach by derive_partner_volumes.
  bool from_partner;
};

std::span<const FieldInfo> covariate_fields();
const FieldInfo* find_field(std::string_view name);

// Maps record fields onto CSV header names. Fields without an entry use
// their own name as the header.
class SchemaMap {
 public:
  SchemaMap() = default;

  // `field = column` lines; unknown field names are rejected.
  static SchemaMap from_file(const std::filesystem::path& path);
  static SchemaMap from_text(std::string_view text);

  void bind(std::string_view field, std::string column);
  std::string column_for(std::string_view field) const;

 private:
  std::map<std::string, std::string, std::less<>> columns_;
};

struct ValidationIssue {
  std::size_t row;  // 1-based data row; 0 when not row-specific
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> warnings;
  std::size_t rows_read = 0;

  std::string to_json() const;
};

// Immutable, validated set of approach records plus the intersection
// index (contiguous, 0-based, by first appearance of intersection_id).
class Dataset {
 public:
  Dataset() = default;
  // Throws OrientationError when an intersection repeats an approach.
  explicit Dataset(std::vector<ApproachRecord> records);
  Dataset(std::vector<ApproachRecord> records,
          std::vector<bool> partner_missing);

  std::span<const ApproachRecord> records() const { return records_; }
  const ApproachRecord& record(std::size_t k) const { return records_[k]; }
  std::size_t size() const { return records_.size(); }

  std::size_t group_of(std::size_t k) const { return groups_[k]; }
  std::size_t group_count() const { return intersection_ids_.size(); }
  std::span<const std::string> intersection_ids() const {
    return intersection_ids_;
  }

  // Set by derive_partner_volumes for records lacking a partner approach.
  bool partner_missing(std::size_t k) const {
    return !partner_missing_.empty() && partner_missing_[k];
  }
  std::size_t partner_missing_count() const;

 private:
  std::vector<ApproachRecord> records_;
  std::vector<std::size_t> groups_;
  std::vector<std::string> intersection_ids_;
  std::vector<bool> partner_missing_;
};

struct LoadedDataset {
  Dataset dataset;
  ValidationReport report;
};

LoadedDataset load_dataset(const std::filesystem::path& path,
                           const SchemaMap& schema = {});
LoadedDataset parse_dataset(std::string_view csv_text,
                            const SchemaMap& schema = {});

// Canonical CSV with every field; reals use 17 significant digits so a
// reload is bit-exact.
void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

// Fills opposing_* from the opposite approach and near_cross_* from the
// near-side crossing approach of the same intersection. Records whose
// partner is absent keep their loaded values and are flagged.
Dataset derive_partner_volumes(const Dataset& ds,
                               TrafficSide side = TrafficSide::kRight);

}  // namespace crashre

#endif  // CRASHRE_DATA_MODEL_HPP_
