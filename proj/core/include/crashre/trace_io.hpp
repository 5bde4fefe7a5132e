#ifndef CRASHRE_TRACE_IO_HPP_
#define CRASHRE_TRACE_IO_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "crashre/trace.hpp"

namespace crashre {

// 17 significant digits; parses back to the identical double.
std::string format_double(double v);

// Header row of parameter names, then one row per draw.
void write_trace_csv(std::ostream& out, const Trace& trace);
void save_trace_csv(const std::filesystem::path& path, const Trace& trace);
Trace parse_trace_csv(std::string_view text, std::string_view origin);
Trace load_trace_csv(const std::filesystem::path& path);

}  // namespace crashre

#endif  // CRASHRE_TRACE_IO_HPP_
