#pragma once

#include <string>
#include <string_view>
#include <unordered_map>

namespace tdoa::io {

// Maps JSON pointers ("/obstacles/2/min") to the 1-based line where the
// value starts. Works on any text nlohmann accepts; malformed input just
// yields fewer entries.
class LineIndex {
 public:
  explicit LineIndex(std::string_view text);

  // Line of the pointer, or of its closest indexed ancestor, or 1.
  int line_of(std::string pointer) const;

 private:
  std::unordered_map<std::string, int> lines_;
};

std::string escape_pointer_token(std::string_view token);

}  // namespace tdoa::io
