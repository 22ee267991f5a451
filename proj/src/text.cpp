#include "unac/text.hpp"

#include <algorithm>
#include <cctype>

namespace unac::text {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      break;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  auto lines = split(s, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

namespace {

std::string strip_emphasis(std::string_view s) {
  std::string t = trim(s);
  while (!t.empty() && (t.front() == '*' || t.front() == '_' || t.front() == '#' || t.front() == '>')) {
    t.erase(t.begin());
  }
  return trim(t);
}

}  // namespace

std::optional<std::string> last_tagged_line(std::string_view response, std::string_view tag) {
  const auto lines = split_lines(response);
  const auto want = lower(tag);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const auto line = strip_emphasis(*it);
    if (line.size() < want.size() || lower(std::string_view(line).substr(0, want.size())) != want) continue;
    std::string rest = line.substr(want.size());
    // "**FINAL:** B" leaves "** B"
    std::size_t b = 0;
    while (b < rest.size() && (rest[b] == '*' || rest[b] == '_')) ++b;
    rest = trim(std::string_view(rest).substr(b));
    while (!rest.empty() && (rest.back() == '*' || rest.back() == '_')) rest.pop_back();
    return trim(rest);
  }
  return std::nullopt;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace unac::text
