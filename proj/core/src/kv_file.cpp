#include "crashre/kv_file.hpp"

#include <fstream>
#include <sstream>

#include "crashre/errors.hpp"

namespace crashre {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues parse_key_values(std::string_view text, std::string_view origin) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw SpecError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": expected `key = value`",
                      "config");
    }
    const auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) {
      throw SpecError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": empty key",
                      "config");
    }
    if (!out.emplace(std::string(key), std::string(value)).second) {
      throw SpecError(std::string(origin) + ":" + std::to_string(line_no) +
                          ": duplicate key `" + std::string(key) + "`",
                      "config");
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open `" + path.string() + "`");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KeyValues read_key_values(const std::filesystem::path& path) {
  return parse_key_values(read_text_file(path), path.string());
}

}  // namespace crashre
