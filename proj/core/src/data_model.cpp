#include "crashre/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "crashre/errors.hpp"
#include "crashre/kv_file.hpp"

namespace crashre {

namespace {

constexpr std::array<std::string_view, 5> kCrashTypeNames = {
    "rear_end", "opposing_left_turn", "crossing_left_turn", "right_angle",
    "sideswipe"};

using R = ApproachRecord;
using K = FieldKind;

// Typical ranges are the min/max observed in the four-leg intersection
// sample the model was designed around.
const std::array<FieldInfo, 24> kFields = {{
    {"aadt_total", &R::aadt_total, K::kVolume, 51, 50763, false},
    {"aadt_through", &R::aadt_through, K::kVolume, 10, 50464, false},
    {"aadt_left", &R::aadt_left, K::kVolume, 10, 13005, false},
    {"aadt_right", &R::aadt_right, K::kVolume, 3, 11653, false},
    {"opposing_aadt_left", &R::opposing_aadt_left, K::kVolume, 10, 13005, true},
    {"opposing_aadt_through", &R::opposing_aadt_through, K::kVolume, 10, 50464, true},
    {"near_cross_aadt_through", &R::near_cross_aadt_through, K::kVolume, 10, 50464, true},
    {"lanes_total", &R::lanes_total, K::kLaneCount, 1, 7, false},
    {"lanes_through", &R::lanes_through, K::kLaneCount, 1, 5, false},
    {"lanes_left", &R::lanes_left, K::kLaneCount, 0, 2, false},
    {"lanes_right", &R::lanes_right, K::kLaneCount, 0, 2, false},
    {"opposing_lanes_through", &R::opposing_lanes_through, K::kLaneCount, 1, 5, true},
    {"median_present", &R::median_present, K::kBinary, std::nullopt, std::nullopt, false},
    {"left_turn_offset", &R::left_turn_offset, K::kOffset, std::nullopt, std::nullopt, false},
    {"intersection_angle", &R::intersection_angle, K::kReal, 36, 144, false},
    {"friction", &R::friction, K::kReal, 24.19, 46.07, false},
    {"coordinated", &R::coordinated, K::kBinary, std::nullopt, std::nullopt, false},
    {"left_turn_control", &R::left_turn_control, K::kLeftTurnControl, std::nullopt, std::nullopt, false},
    {"yellow_minus_standard", &R::yellow_minus_standard, K::kReal, std::nullopt, std::nullopt, false},
    {"all_red_minus_standard", &R::all_red_minus_standard, K::kReal, std::nullopt, std::nullopt, false},
    {"flashing_mode", &R::flashing_mode, K::kBinary, std::nullopt, std::nullopt, false},
    {"speed_limit", &R::speed_limit, K::kReal, 15, 60, false},
    {"near_cross_speed_limit", &R::near_cross_speed_limit, K::kReal, 15, 60, true},
    {"county", &R::county, K::kBinary, std::nullopt, std::nullopt, false},
}};

constexpr std::string_view kIntersectionField = "intersection_id";
constexpr std::string_view kApproachField = "approach_id";

bool is_integral_kind(FieldKind kind) { return kind != FieldKind::kReal; }

// Empty string when the value is admissible.
std::string check_codomain(FieldKind kind, double v) {
  if (!std::isfinite(v)) return "value is not finite";
  if (is_integral_kind(kind) && v != std::floor(v)) {
    return "value must be an integer";
  }
  switch (kind) {
    case FieldKind::kVolume:
    case FieldKind::kLaneCount:
      if (v < 0) return "value must be nonnegative";
      break;
    case FieldKind::kBinary:
      if (v != 0 && v != 1) return "value must be 0 or 1";
      break;
    case FieldKind::kOffset:
      if (v < -1 || v > 1) return "value must be -1, 0 or 1";
      break;
    case FieldKind::kLeftTurnControl:
      if (v < 0 || v > 2) return "value must be 0, 1 or 2";
      break;
    case FieldKind::kReal:
      break;
  }
  return {};
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  cells.emplace_back(trim(cur));
  return cells;
}

std::optional<double> parse_real(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string_view to_string(CrashType type) {
  return kCrashTypeNames[static_cast<std::size_t>(type)];
}

CrashType parse_crash_type(std::string_view name) {
  for (std::size_t i = 0; i < kCrashTypeNames.size(); ++i) {
    if (kCrashTypeNames[i] == name) return kAllCrashTypes[i];
  }
  throw SpecError("unknown crash type `" + std::string(name) +
                  "` (expected rear_end, opposing_left_turn, "
                  "crossing_left_turn, right_angle or sideswipe)",
                  "data_model");
}

std::string crash_count_column(CrashType type) {
  return "crashes_" + std::string(to_string(type));
}

std::optional<Approach> parse_approach(std::string_view label) {
  std::string s(trim(label));
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "n" || s == "north" || s == "0") return Approach::kNorth;
  if (s == "e" || s == "east" || s == "1") return Approach::kEast;
  if (s == "s" || s == "south" || s == "2") return Approach::kSouth;
  if (s == "w" || s == "west" || s == "3") return Approach::kWest;
  return std::nullopt;
}

char approach_letter(Approach a) {
  static constexpr char kLetters[] = {'N', 'E', 'S', 'W'};
  return kLetters[static_cast<int>(a)];
}

Approach opposite(Approach a) {
  return static_cast<Approach>((static_cast<int>(a) + 2) % 4);
}

Approach near_side_crossing(Approach a, TrafficSide side) {
  const int step = side == TrafficSide::kRight ? 1 : 3;
  return static_cast<Approach>((static_cast<int>(a) + step) % 4);
}

std::span<const FieldInfo> covariate_fields() { return kFields; }

const FieldInfo* find_field(std::string_view name) {
  for (const auto& f : kFields) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

// --- SchemaMap ---------------------------------------------------------

void SchemaMap::bind(std::string_view field, std::string column) {
  bool known = field == kIntersectionField || field == kApproachField ||
               find_field(field) != nullptr;
  for (auto t : kAllCrashTypes) known = known || field == crash_count_column(t);
  if (!known) {
    throw SpecError("schema map names unknown field `" + std::string(field) + "`",
                    "data_model");
  }
  columns_[std::string(field)] = std::move(column);
}

std::string SchemaMap::column_for(std::string_view field) const {
  if (const auto it = columns_.find(field); it != columns_.end()) {
    return it->second;
  }
  return std::string(field);
}

SchemaMap SchemaMap::from_text(std::string_view text) {
  SchemaMap schema;
  for (const auto& [field, column] : parse_key_values(text, "schema map")) {
    schema.bind(field, column);
  }
  return schema;
}

SchemaMap SchemaMap::from_file(const std::filesystem::path& path) {
  return from_text(read_text_file(path));
}

std::string ValidationReport::to_json() const {
  nlohmann::ordered_json j;
  j["rows_read"] = rows_read;
  j["warnings"] = nlohmann::ordered_json::array();
  for (const auto& w : warnings) {
    j["warnings"].push_back({{"row", w.row}, {"field", w.field}, {"message", w.message}});
  }
  return j.dump(2);
}

// --- Dataset -----------------------------------------------------------

Dataset::Dataset(std::vector<ApproachRecord> records)
    : Dataset(std::move(records), {}) {}

Dataset::Dataset(std::vector<ApproachRecord> records,
                 std::vector<bool> partner_missing)
    : records_(std::move(records)), partner_missing_(std::move(partner_missing)) {
  if (!partner_missing_.empty() && partner_missing_.size() != records_.size()) {
    throw SpecError("partner flag count does not match record count", "data_model");
  }
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::array<bool, 4>> seen;
  groups_.reserve(records_.size());
  for (const auto& rec : records_) {
    auto [it, inserted] = index.emplace(rec.intersection_id, intersection_ids_.size());
    if (inserted) {
      intersection_ids_.push_back(rec.intersection_id);
      seen.push_back({});
    }
    auto& legs = seen[it->second];
    auto& leg = legs[static_cast<std::size_t>(rec.approach)];
    if (leg) {
      throw OrientationError("intersection `" + rec.intersection_id +
                                 "` lists approach " +
                                 approach_letter(rec.approach) + " more than once",
                             rec.intersection_id);
    }
    leg = true;
    groups_.push_back(it->second);
  }
}

std::size_t Dataset::partner_missing_count() const {
  return static_cast<std::size_t>(
      std::count(partner_missing_.begin(), partner_missing_.end(), true));
}

// --- Loading -----------------------------------------------------------

LoadedDataset parse_dataset(std::string_view csv_text, const SchemaMap& schema) {
  std::vector<std::string_view> lines;
  while (!csv_text.empty()) {
    const auto nl = csv_text.find('\n');
    auto line = csv_text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!trim(line).empty()) lines.push_back(line);
    csv_text = nl == std::string_view::npos ? std::string_view{} : csv_text.substr(nl + 1);
  }
  if (lines.empty()) throw SchemaError("input has no header row", "");

  const auto header = split_csv_line(lines.front());
  auto locate = [&](std::string_view field) -> std::optional<std::size_t> {
    const auto col = schema.column_for(field);
    const auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  auto require = [&](std::string_view field) {
    const auto idx = locate(field);
    if (!idx) {
      const auto col = schema.column_for(field);
      throw SchemaError("missing mandatory column `" + col + "`", col);
    }
    return *idx;
  };

  const std::size_t id_col = require(kIntersectionField);
  const std::size_t approach_col = require(kApproachField);
  std::array<std::size_t, 5> count_cols{};
  for (auto t : kAllCrashTypes) {
    count_cols[static_cast<std::size_t>(t)] = require(crash_count_column(t));
  }
  std::vector<std::pair<const FieldInfo*, std::optional<std::size_t>>> field_cols;
  for (const auto& f : kFields) field_cols.emplace_back(&f, locate(f.name));

  LoadedDataset out;
  std::vector<ApproachRecord> records;
  records.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li;
    const auto cells = split_csv_line(lines[li]);
    if (cells.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + " has " +
                           std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(header.size()),
                       row, "");
    }
    ApproachRecord rec;
    rec.intersection_id = cells[id_col];
    if (rec.intersection_id.empty()) {
      throw ParseError("row " + std::to_string(row) + ": empty intersection id",
                       row, header[id_col]);
    }
    const auto approach = parse_approach(cells[approach_col]);
    if (!approach) {
      throw OrientationError("row " + std::to_string(row) + ": approach label `" +
                                 cells[approach_col] + "` of intersection `" +
                                 rec.intersection_id + "` is not N/E/S/W or 0-3",
                             rec.intersection_id);
    }
    rec.approach = *approach;

    for (auto t : kAllCrashTypes) {
      const auto col = count_cols[static_cast<std::size_t>(t)];
      const auto v = parse_int(cells[col]);
      if (!v) {
        throw ParseError("row " + std::to_string(row) + ", column `" + header[col] +
                             "`: `" + cells[col] + "` is not an integer count",
                         row, header[col]);
      }
      if (*v < 0) {
        throw ValidationError("row " + std::to_string(row) + ", column `" +
                                  header[col] + "`: negative crash count " +
                                  std::to_string(*v),
                              row, header[col]);
      }
      rec.crashes(t) = *v;
    }

    for (const auto& [info, col] : field_cols) {
      if (!col || cells[*col].empty()) continue;
      const auto& cell = cells[*col];
      if (cell == "NA" || cell == "null") continue;
      const auto v = parse_real(cell);
      if (!v) {
        throw ParseError("row " + std::to_string(row) + ", column `" + header[*col] +
                             "`: `" + cell + "` is not numeric",
                         row, header[*col]);
      }
      if (auto problem = check_codomain(info->kind, *v); !problem.empty()) {
        throw ValidationError("row " + std::to_string(row) + ", column `" +
                                  header[*col] + "`: " + problem,
                              row, header[*col]);
      }
      if ((info->typical_min && *v < *info->typical_min) ||
          (info->typical_max && *v > *info->typical_max)) {
        out.report.warnings.push_back(
            {row, std::string(info->name),
             "value " + format_real(*v) + " outside typical range [" +
                 format_real(*info->typical_min) + ", " +
                 format_real(*info->typical_max) + "]"});
      }
      rec.*(info->member) = *v;
    }
    records.push_back(std::move(rec));
  }
  out.report.rows_read = records.size();
  out.dataset = Dataset(std::move(records));
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path, const SchemaMap& schema) {
  if (!std::filesystem::exists(path)) {
    throw IoError("data file `" + path.string() + "` does not exist", "data_model");
  }
  return parse_dataset(read_text_file(path), schema);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << kIntersectionField << ',' << kApproachField;
  for (const auto& f : kFields) out << ',' << f.name;
  for (auto t : kAllCrashTypes) out << ',' << crash_count_column(t);
  out << '\n';
  for (const auto& rec : ds.records()) {
    out << quote_if_needed(rec.intersection_id) << ',' << approach_letter(rec.approach);
    for (const auto& f : kFields) {
      out << ',';
      const auto& v = rec.*(f.member);
      if (!v) continue;
      if (is_integral_kind(f.kind)) {
        out << static_cast<std::int64_t>(*v);
      } else {
        out << format_real(*v);
      }
    }
    for (auto t : kAllCrashTypes) out << ',' << rec.crashes(t);
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write `" + path.string() + "`", "data_model");
  write_dataset(out, ds);
}

Dataset derive_partner_volumes(const Dataset& ds, TrafficSide side) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::array<std::size_t, 4>> legs(ds.group_count());
  for (auto& l : legs) l.fill(kNone);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    auto& slot = legs[ds.group_of(k)][static_cast<std::size_t>(ds.record(k).approach)];
    if (slot != kNone) {
      const auto& id = ds.record(k).intersection_id;
      throw OrientationError("intersection `" + id + "` has ambiguous approach labels", id);
    }
    slot = k;
  }

  std::vector<ApproachRecord> records(ds.records().begin(), ds.records().end());
  std::vector<bool> flags(records.size(), false);
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto& rec = records[k];
    const auto& group_legs = legs[ds.group_of(k)];
    const auto opp = group_legs[static_cast<std::size_t>(opposite(rec.approach))];
    const auto near =
        group_legs[static_cast<std::size_t>(near_side_crossing(rec.approach, side))];
    if (opp != kNone) {
      const auto& o = ds.record(opp);
      rec.opposing_aadt_left = o.aadt_left;
      rec.opposing_aadt_through = o.aadt_through;
      rec.opposing_lanes_through = o.lanes_through;
    }
    if (near != kNone) {
      const auto& n = ds.record(near);
      rec.near_cross_aadt_through = n.aadt_through;
      rec.near_cross_speed_limit = n.speed_limit;
    }
    flags[k] = opp == kNone || near == kNone;
  }
  return Dataset(std::move(records), std::move(flags));
}

}  // namespace crashre
