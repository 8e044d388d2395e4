#include "io/line_index.hpp"

#include <cctype>
#include <vector>

namespace tdoa::io {

namespace {

struct Frame {
  bool object = false;
  bool expect_key = false;
  std::string key;
  long index = 0;
};

std::string current_pointer(const std::vector<Frame>& stack) {
  std::string out;
  for (const auto& f : stack) {
    out += '/';
    out += f.object ? escape_pointer_token(f.key) : std::to_string(f.index);
  }
  return out;
}

}  // namespace

std::string escape_pointer_token(std::string_view token) {
  std::string out;
  for (char c : token) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

LineIndex::LineIndex(std::string_view text) {
  std::vector<Frame> stack;
  int line = 1;
  std::size_t k = 0;
  const std::size_t n = text.size();

  auto record_value = [&] { lines_.emplace(current_pointer(stack), line); };

  while (k < n) {
    const char c = text[k];
    if (c == '\n') {
      ++line;
      ++k;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++k;
    } else if (c == '"') {
      std::string s;
      ++k;
      while (k < n && text[k] != '"') {
        if (text[k] == '\\' && k + 1 < n) ++k;
        if (text[k] == '\n') ++line;
        s += text[k++];
      }
      ++k;
      if (!stack.empty() && stack.back().object && stack.back().expect_key) {
        stack.back().key = std::move(s);
        stack.back().expect_key = false;
      } else {
        record_value();
      }
    } else if (c == '{' || c == '[') {
      record_value();
      stack.push_back({c == '{', c == '{', {}, 0});
      ++k;
    } else if (c == '}' || c == ']') {
      if (!stack.empty()) stack.pop_back();
      ++k;
    } else if (c == ',') {
      if (!stack.empty()) {
        if (stack.back().object) {
          stack.back().expect_key = true;
        } else {
          ++stack.back().index;
        }
      }
      ++k;
    } else if (c == ':') {
      ++k;
    } else {
      record_value();
      while (k < n && text[k] != ',' && text[k] != '}' && text[k] != ']' &&
             !std::isspace(static_cast<unsigned char>(text[k]))) {
        ++k;
      }
    }
  }
}

int LineIndex::line_of(std::string pointer) const {
  while (true) {
    if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
    const auto slash = pointer.rfind('/');
    if (slash == std::string::npos) return 1;
    pointer.resize(slash);
  }
}

}  // namespace tdoa::io
