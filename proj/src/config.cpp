#include "unac/config.hpp"

#include "unac/domain_io.hpp"
#include "unac/text.hpp"

#include <fmt/format.h>

#include <charconv>

namespace unac {
namespace {

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto l = text::lower(v);
  if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
  if (l == "false" || l == "no" || l == "off" || l == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

provider::ProviderConfig& provider_entry(RunConfig& c, const std::string& id) {
  for (auto& p : c.providers) {
    if (p.provider_id == id) return p;
  }
  provider::ProviderConfig p;
  p.provider_id = id;
  c.providers.push_back(p);
  return c.providers.back();
}

void apply_provider(provider::ProviderConfig& p, const std::string& key, const std::string& full,
                    const std::string& v) {
  if (key == "dialect") {
    auto d = provider::parse_dialect(v);
    if (!d) throw ConfigError(full + ": unknown dialect '" + v + "' (openai_compat, gemini_style, scripted)");
    p.dialect = *d;
  } else if (key == "endpoint") {
    p.endpoint = v;
  } else if (key == "model") {
    p.model_name = v;
  } else if (key == "api_key_env") {
    p.api_key_env = v;
  } else if (key == "temperature") {
    p.temperature = to_double(full, v);
  } else if (key == "max_output_tokens") {
    p.max_output_tokens = to_int(full, v);
  } else if (key == "request_timeout_ms") {
    p.request_timeout_ms = to_int(full, v);
  } else if (key == "max_retries") {
    p.max_retries = to_int(full, v);
  } else if (key == "backoff_base_ms") {
    p.backoff_base_ms = to_int(full, v);
  } else if (key == "backoff_factor") {
    p.backoff_factor = to_double(full, v);
  } else if (key == "backoff_jitter") {
    p.backoff_jitter = to_double(full, v);
  } else if (key == "backoff_cap_ms") {
    p.backoff_cap_ms = to_int(full, v);
  } else if (key == "requests_per_minute") {
    p.requests_per_minute = to_int(full, v);
  } else if (key == "api_key_in_query") {
    p.api_key_in_query = to_bool(full, v);
  } else if (key == "api_key") {
    throw ConfigError(full + ": API keys are read from the environment; set api_key_env instead");
  } else {
    throw ConfigError("unknown key " + full);
  }
}

std::string hex(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }

}  // namespace

std::vector<Rgb> parse_hues(std::string_view s) {
  std::vector<Rgb> out;
  for (const auto& part : text::split(s, ',')) {
    auto t = text::trim(part);
    if (t.size() != 7 || t[0] != '#') throw ConfigError("marker.hues: expected #rrggbb, got '" + t + "'");
    unsigned v = 0;
    auto [p, ec] = std::from_chars(t.data() + 1, t.data() + 7, v, 16);
    if (ec != std::errc() || p != t.data() + 7) throw ConfigError("marker.hues: bad colour '" + t + "'");
    out.push_back(Rgb{static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8 & 0xff),
                      static_cast<std::uint8_t>(v & 0xff)});
  }
  return out;
}

void apply_setting(RunConfig& c, const std::string& dotted, const std::string& value) {
  const auto v = text::trim(value);
  if (dotted.rfind("provider.", 0) == 0) {
    const auto rest = dotted.substr(9);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos || dot == 0) throw ConfigError("malformed provider key " + dotted);
    const auto id = rest.substr(0, dot);
    apply_provider(provider_entry(c, id), rest.substr(dot + 1), dotted, v);
    return;
  }
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) throw ConfigError("key outside any section: " + dotted);
  const auto section = dotted.substr(0, dot);
  const auto key = dotted.substr(dot + 1);
  auto& pl = c.pipeline;
  auto& vp = c.pipeline.visprompt;
  auto& st = c.pipeline.visprompt.style;

  if (section == "roles") {
    if (key == "analyze") {
      c.roles.analyze = v.empty() ? std::nullopt : std::optional<std::string>(v);
    } else if (key == "abstract") {
      c.roles.abstract = v;
    } else if (key == "check") {
      c.roles.check = v;
    } else if (key == "conclude") {
      c.roles.conclude = v;
    } else if (key == "judge") {
      c.roles.judge = v.empty() ? std::nullopt : std::optional<std::string>(v);
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else if (section == "pipeline") {
    if (key == "mode") {
      auto m = parse_check_mode(v);
      if (!m) throw ConfigError(dotted + ": expected gradual, global or none, got '" + v + "'");
      pl.mode = *m;
    } else if (key == "max_subq") {
      pl.max_subq = to_int(dotted, v);
    } else if (key == "conclude_image") {
      auto ci = parse_conclude_image(v);
      if (!ci) throw ConfigError(dotted + ": expected marked, original or none, got '" + v + "'");
      pl.conclude_image = *ci;
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else if (section == "visprompt") {
    if (key == "threshold") {
      vp.threshold = to_double(dotted, v);
    } else if (key == "max_regions") {
      vp.max_regions = to_int(dotted, v);
    } else if (key == "segment_prompted") {
      vp.segment_prompted = to_bool(dotted, v);
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else if (section == "marker") {
    if (key == "hues") {
      st.hues = parse_hues(v);
    } else if (key == "badge_min_px") {
      st.badge_min_px = to_int(dotted, v);
    } else if (key == "badge_fraction") {
      st.badge_fraction = to_double(dotted, v);
    } else if (key == "tint_alpha") {
      st.tint_alpha = to_double(dotted, v);
    } else if (key == "outline_width") {
      st.outline_width = to_int(dotted, v);
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else if (section == "tool") {
    if (key == "endpoint") {
      c.tool_endpoint = v;
    } else if (key == "timeout_ms") {
      c.tool_timeout_ms = to_int(dotted, v);
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else if (section == "cache") {
    if (key == "enabled") {
      c.cache_enabled = to_bool(dotted, v);
    } else if (key == "dir") {
      c.cache_dir = v;
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else if (section == "eval") {
    if (key == "workers") {
      c.workers = to_int(dotted, v);
    } else if (key == "allow_nonzero_temperature") {
      c.allow_nonzero_temperature = to_bool(dotted, v);
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else if (section == "output") {
    if (key == "root") {
      c.output_root = v;
    } else {
      throw ConfigError("unknown key " + dotted);
    }
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
}

RunConfig parse_config(std::string_view text_in, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  std::string section;
  const auto lines = text::split_lines(text_in);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = text::trim(lines[i]);
    const auto where = fmt::format("line {}", i + 1);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = text::trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      if (section.rfind("provider.", 0) == 0) {
        if (section.size() == 9) throw ConfigError(where + ": provider section needs an id");
        provider_entry(c, section.substr(9));
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const auto key = text::trim(std::string_view(line).substr(0, eq));
    const auto value = text::trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
    try {
      apply_setting(c, section + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::string content;
  try {
    content = read_file(path);
  } catch (const std::exception&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  try {
    return parse_config(content, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void validate(const RunConfig& c) {
  if (c.providers.empty()) throw ConfigError("no [provider.<id>] section");
  provider::ProviderSet ids_only;
  for (const auto& p : c.providers) {
    try {
      provider::validate(p);
    } catch (const provider::ProviderError& e) {
      throw ConfigError(e.what());
    }
  }
  auto known = [&](const std::string& id) {
    for (const auto& p : c.providers) {
      if (p.provider_id == id) return true;
    }
    return false;
  };
  auto check_role = [&](const char* role, const std::string& id) {
    if (id.empty()) throw ConfigError(fmt::format("roles.{} is not set", role));
    if (!known(id)) {
      throw provider::ProviderError(provider::ErrorKind::kUnknownProvider,
                                    fmt::format("roles.{} names unknown provider '{}'", role, id));
    }
  };
  if (c.roles.analyze) check_role("analyze", *c.roles.analyze);
  check_role("abstract", c.roles.abstract);
  check_role("check", c.roles.check);
  check_role("conclude", c.roles.conclude);
  if (c.roles.judge) check_role("judge", *c.roles.judge);
  try {
    validate(c.pipeline);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.workers < 1) throw ConfigError("eval.workers must be >= 1");
  if (c.tool_timeout_ms < 1) throw ConfigError("tool.timeout_ms must be >= 1");
}

std::string render_config(const RunConfig& c) {
  std::string out;
  for (const auto& p : c.providers) {
    out += fmt::format("[provider.{}]\n", p.provider_id);
    out += fmt::format("dialect = {}\n", provider::to_string(p.dialect));
    out += fmt::format("endpoint = {}\n", p.endpoint);
    if (!p.model_name.empty()) out += fmt::format("model = {}\n", p.model_name);
    if (!p.api_key_env.empty()) out += fmt::format("api_key_env = {}\n", p.api_key_env);
    out += fmt::format("temperature = {}\n", p.temperature);
    out += fmt::format("max_output_tokens = {}\n", p.max_output_tokens);
    out += fmt::format("request_timeout_ms = {}\n", p.request_timeout_ms);
    out += fmt::format("max_retries = {}\n", p.max_retries);
    out += fmt::format("backoff_base_ms = {}\n", p.backoff_base_ms);
    out += fmt::format("backoff_factor = {}\n", p.backoff_factor);
    out += fmt::format("backoff_jitter = {}\n", p.backoff_jitter);
    out += fmt::format("backoff_cap_ms = {}\n", p.backoff_cap_ms);
    out += fmt::format("requests_per_minute = {}\n", p.requests_per_minute);
    out += fmt::format("api_key_in_query = {}\n\n", p.api_key_in_query);
  }
  out += "[roles]\n";
  if (c.roles.analyze) out += fmt::format("analyze = {}\n", *c.roles.analyze);
  out += fmt::format("abstract = {}\ncheck = {}\nconclude = {}\n", c.roles.abstract, c.roles.check, c.roles.conclude);
  if (c.roles.judge) out += fmt::format("judge = {}\n", *c.roles.judge);
  const auto& pl = c.pipeline;
  out += fmt::format("\n[pipeline]\nmode = {}\nmax_subq = {}\nconclude_image = {}\n", to_string(pl.mode), pl.max_subq,
                     to_string(pl.conclude_image));
  out += fmt::format("\n[visprompt]\nthreshold = {}\nmax_regions = {}\nsegment_prompted = {}\n", pl.visprompt.threshold,
                     pl.visprompt.max_regions, pl.visprompt.segment_prompted);
  const auto& st = pl.visprompt.style;
  std::string hues;
  for (const auto& h : st.hues) hues += (hues.empty() ? "" : ",") + hex(h);
  out += fmt::format(
      "\n[marker]\nhues = {}\nbadge_min_px = {}\nbadge_fraction = {}\ntint_alpha = {}\noutline_width = {}\n", hues,
      st.badge_min_px, st.badge_fraction, st.tint_alpha, st.outline_width);
  out += fmt::format("\n[tool]\nendpoint = {}\ntimeout_ms = {}\n", c.tool_endpoint, c.tool_timeout_ms);
  out += fmt::format("\n[cache]\nenabled = {}\ndir = {}\n", c.cache_enabled, c.cache_dir.string());
  out += fmt::format("\n[eval]\nworkers = {}\nallow_nonzero_temperature = {}\n", c.workers,
                     c.allow_nonzero_temperature);
  out += fmt::format("\n[output]\nroot = {}\n", c.output_root.string());
  return out;
}

provider::ProviderSet build_providers(const RunConfig& c) {
  std::shared_ptr<provider::ResponseCache> cache;
  if (c.cache_enabled) {
    const auto dir = c.cache_dir.is_absolute() ? c.cache_dir : c.base_dir / c.cache_dir;
    cache = std::make_shared<provider::ResponseCache>(dir);
  }
  provider::ProviderSet set;
  for (auto p : c.providers) {
    if (p.dialect == provider::Dialect::kScripted) {
      const std::filesystem::path fixture(p.endpoint);
      if (fixture.is_relative()) p.endpoint = (c.base_dir / fixture).string();
    }
    auto backend = provider::make_backend(p);
    // Scripted runs stay deterministic without touching the cache.
    auto provider_cache = p.dialect == provider::Dialect::kScripted ? nullptr : cache;
    set.add(std::make_shared<provider::Provider>(p, std::move(backend), provider_cache));
  }
  provider::validate_roles(c.roles, set);
  return set;
}

std::unique_ptr<tools::ToolClient> build_tool_client(const RunConfig& c) {
  if (c.tool_endpoint.empty()) return std::make_unique<tools::NullToolClient>();
  tools::HttpToolOptions opts;
  opts.endpoint = c.tool_endpoint;
  opts.timeout_ms = c.tool_timeout_ms;
  return std::make_unique<tools::HttpToolClient>(std::move(opts));
}

}  // namespace unac
