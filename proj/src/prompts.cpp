#include "unac/prompts.hpp"

namespace unac::prompts {
namespace detail {
const std::map<std::string_view, std::string_view>& embedded_templates();
}  // namespace detail

namespace {

enum class TokenKind { kText, kVar, kOpen, kInverted, kClose };

struct Token {
  TokenKind kind;
  std::string value;
};

std::string strip_comments(std::string_view tmpl) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    auto nl = tmpl.find('\n', pos);
    const auto end = nl == std::string_view::npos ? tmpl.size() : nl + 1;
    const auto line = tmpl.substr(pos, end - pos);
    if (line.substr(0, 2) != "#!") out.append(line);
    pos = end;
  }
  return out;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  std::string text;
  // Whether `text` began at the start of a source line.
  bool text_at_line_start = true;
  while (pos < src.size()) {
    const auto open = src.find("{{", pos);
    if (open == std::string_view::npos) {
      text.append(src.substr(pos));
      break;
    }
    const auto close = src.find("}}", open + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated tag");
    std::string name(src.substr(open + 2, close - open - 2));
    TokenKind kind = TokenKind::kVar;
    if (!name.empty() && (name[0] == '#' || name[0] == '^' || name[0] == '/')) {
      kind = name[0] == '#' ? TokenKind::kOpen : name[0] == '^' ? TokenKind::kInverted : TokenKind::kClose;
      name.erase(0, 1);
    }
    if (name.empty()) throw TemplateError("empty tag");
    auto after = close + 2;
    text.append(src.substr(pos, open - pos));
    if (kind != TokenKind::kVar) {
      // Standalone section tag: drop the indentation before it and the newline after it.
      const auto line_start = text.rfind('\n');
      const std::string_view before =
          line_start == std::string::npos ? std::string_view(text) : std::string_view(text).substr(line_start + 1);
      const auto nl = src.find('\n', after);
      const auto rest = src.substr(after, (nl == std::string_view::npos ? src.size() : nl) - after);
      const bool at_line_start = line_start != std::string::npos || text_at_line_start;
      if (at_line_start && blank(before) && blank(rest)) {
        text.resize(text.size() - before.size());
        after = nl == std::string_view::npos ? src.size() : nl + 1;
      }
    }
    text_at_line_start = after > 0 && src[after - 1] == '\n';
    if (!text.empty()) tokens.push_back({TokenKind::kText, std::move(text)});
    text.clear();
    tokens.push_back({kind, std::move(name)});
    pos = after;
  }
  if (!text.empty()) tokens.push_back({TokenKind::kText, std::move(text)});
  return tokens;
}

const std::string& lookup(const Vars& vars, const std::string& name) {
  auto it = vars.find(name);
  if (it == vars.end()) throw TemplateError("template variable not provided: " + name);
  return it->second;
}

void emit(const std::vector<Token>& tokens, std::size_t& i, const Vars& vars, std::string* out,
          const std::string* section) {
  while (i < tokens.size()) {
    const Token& t = tokens[i++];
    switch (t.kind) {
      case TokenKind::kText:
        if (out) out->append(t.value);
        break;
      case TokenKind::kVar:
        if (out) out->append(lookup(vars, t.value));
        else lookup(vars, t.value);
        break;
      case TokenKind::kOpen:
      case TokenKind::kInverted: {
        const bool set = !lookup(vars, t.value).empty();
        const bool keep = t.kind == TokenKind::kOpen ? set : !set;
        emit(tokens, i, vars, keep ? out : nullptr, &t.value);
        break;
      }
      case TokenKind::kClose:
        if (!section || *section != t.value) throw TemplateError("unbalanced section close: " + t.value);
        return;
    }
  }
  if (section) throw TemplateError("unclosed section: " + *section);
}

}  // namespace

std::string render(std::string_view tmpl, const Vars& vars) {
  const auto tokens = tokenize(strip_comments(tmpl));
  std::string out;
  std::size_t i = 0;
  emit(tokens, i, vars, &out, nullptr);
  return out;
}

std::string_view get(std::string_view name) {
  const auto& all = detail::embedded_templates();
  auto it = all.find(name);
  if (it == all.end()) throw TemplateError("no prompt template named " + std::string(name));
  return it->second;
}

std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : detail::embedded_templates()) out.emplace_back(name);
  return out;
}

}  // namespace unac::prompts
