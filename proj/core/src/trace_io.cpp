#include "crashre/trace_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "crashre/errors.hpp"
#include "crashre/kv_file.hpp"

namespace crashre {

Trace::Trace(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string_view> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw SpecError("duplicate trace column `" + n + "`", "sampler");
  }
  columns_.resize(names_.size());
}

void Trace::reserve(std::size_t draws) {
  for (auto& c : columns_) c.reserve(draws);
}

void Trace::append(std::span<const double> draw) {
  if (draw.size() != names_.size()) {
    throw SpecError("trace draw has " + std::to_string(draw.size()) + " values, expected " +
                        std::to_string(names_.size()),
                    "sampler");
  }
  for (std::size_t j = 0; j < draw.size(); ++j) columns_[j].push_back(draw[j]);
}

std::optional<std::size_t> Trace::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

std::span<const double> Trace::column(std::string_view name) const {
  const auto j = index_of(name);
  if (!j) throw SpecError("trace has no column `" + std::string(name) + "`", "sampler");
  return columns_[*j];
}

std::optional<std::size_t> parse_phi_name(std::string_view name) {
  if (name.size() < 6 || name.substr(0, 4) != "phi[" || name.back() != ']') return std::nullopt;
  const auto digits = name.substr(4, name.size() - 5);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return v;
}

std::string phi_name(std::size_t group) { return "phi[" + std::to_string(group) + "]"; }

// --- CSV ----------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  const auto names = trace.names();
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (std::size_t t = 0; t < trace.length(); ++t) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      out << (j ? "," : "") << format_double(trace.column(j)[t]);
    }
    out << '\n';
  }
}

void save_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write `" + path.string() + "`", "sampler");
  write_trace_csv(out, trace);
}

Trace parse_trace_csv(std::string_view text, std::string_view origin) {
  auto next_line = [&text]() {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  auto split = [](std::string_view line) {
    std::vector<std::string_view> cells;
    while (true) {
      const auto c = line.find(',');
      cells.push_back(line.substr(0, c));
      if (c == std::string_view::npos) break;
      line = line.substr(c + 1);
    }
    return cells;
  };

  const auto header = next_line();
  if (header.empty()) throw IoError(std::string(origin) + ": empty trace file", "sampler");
  std::vector<std::string> names;
  for (auto cell : split(header)) names.emplace_back(cell);
  Trace trace(names);

  std::vector<double> draw(names.size());
  std::size_t row = 0;
  while (!text.empty()) {
    const auto line = next_line();
    if (line.empty()) continue;
    ++row;
    const auto cells = split(line);
    if (cells.size() != names.size()) {
      throw IoError(std::string(origin) + ": row " + std::to_string(row) +
                        " has the wrong number of cells",
                    "sampler");
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto [ptr, ec] =
          std::from_chars(cells[j].data(), cells[j].data() + cells[j].size(), draw[j]);
      if (ec != std::errc() || ptr != cells[j].data() + cells[j].size()) {
        throw IoError(std::string(origin) + ": row " + std::to_string(row) +
                          ": non-numeric value",
                      "sampler");
      }
    }
    trace.append(draw);
  }
  return trace;
}

Trace load_trace_csv(const std::filesystem::path& path) {
  return parse_trace_csv(read_text_file(path), path.string());
}

}  // namespace crashre
