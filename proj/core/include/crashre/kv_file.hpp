#ifndef CRASHRE_KV_FILE_HPP_
#define CRASHRE_KV_FILE_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace crashre {

// Flat `key = value` text as used by schema maps and run specs.
// `#` starts a comment; `[section]` headers are accepted and ignored;
// values may be wrapped in double quotes. Keys are unique.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse_key_values(std::string_view text, std::string_view origin);
KeyValues read_key_values(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace crashre

#endif  // CRASHRE_KV_FILE_HPP_
