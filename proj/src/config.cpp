#include "nvdnp/config.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "nvdnp/errors.hpp"

namespace nvdnp {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return true;
}

[[noreturn]] void fail(const ConfigFile& file, const ConfigFile::Entry& e, const std::string& msg) {
  throw ValidationError(fmt::format("{}:{}: [{}] {}: {}", file.origin(), e.line, e.section, e.key, msg));
}

double to_double(std::string_view s, bool& ok) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  ok = !s.empty() && ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(v);
  return v;
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text, std::string origin) {
  ConfigFile file;
  file.origin_ = std::move(origin);
  std::string section;
  std::set<std::pair<std::string, std::string>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || !valid_name(trim(line.substr(1, line.size() - 2)))) {
        throw ValidationError(fmt::format("{}:{}: malformed section header '{}'", file.origin_, line_no, line));
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError(fmt::format("{}:{}: expected 'key = value', found '{}'", file.origin_, line_no, line));
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!valid_name(key)) throw ValidationError(fmt::format("{}:{}: malformed key '{}'", file.origin_, line_no, key));
    if (section.empty()) {
      throw ValidationError(fmt::format("{}:{}: key '{}' appears before any [section]", file.origin_, line_no, key));
    }
    if (!seen.emplace(section, key).second) {
      throw ValidationError(fmt::format("{}:{}: duplicate key [{}] {}", file.origin_, line_no, section, key));
    }
    file.entries_.push_back({section, key, std::string(trim(line.substr(eq + 1))), line_no});
    if (end == text.size()) break;
  }
  return file;
}

const ConfigFile::Entry* ConfigFile::find(std::string_view section, std::string_view key) const {
  for (const Entry& e : entries_) {
    if (e.section == section && e.key == key) return &e;
  }
  return nullptr;
}

std::vector<const ConfigFile::Entry*> ConfigFile::section(std::string_view name) const {
  std::vector<const Entry*> out;
  for (const Entry& e : entries_) {
    if (e.section == name) out.push_back(&e);
  }
  return out;
}

double parse_double(const ConfigFile& file, const ConfigFile::Entry& entry) {
  bool ok = false;
  const double v = to_double(entry.value, ok);
  if (!ok) fail(file, entry, fmt::format("expected a finite number, found '{}'", entry.value));
  return v;
}

int parse_int(const ConfigFile& file, const ConfigFile::Entry& entry) {
  const std::string_view s = trim(entry.value);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    fail(file, entry, fmt::format("expected an integer, found '{}'", entry.value));
  }
  return v;
}

std::vector<double> parse_axis(const ConfigFile& file, const ConfigFile::Entry& entry) {
  const std::string_view s = trim(entry.value);
  if (s.empty()) fail(file, entry, "sweep axis is empty");
  std::vector<double> values;
  if (s.find(':') != std::string_view::npos) {
    std::vector<double> parts;
    std::size_t pos = 0;
    while (true) {
      const auto colon = s.find(':', pos);
      bool ok = false;
      parts.push_back(to_double(s.substr(pos, colon == std::string_view::npos ? s.npos : colon - pos), ok));
      if (!ok) fail(file, entry, fmt::format("malformed range '{}'", entry.value));
      if (colon == std::string_view::npos) break;
      pos = colon + 1;
    }
    if (parts.size() > 3) fail(file, entry, fmt::format("range '{}' has more than start:stop:step", entry.value));
    const double start = parts[0];
    const double stop = parts[1];
    const double step = parts.size() == 3 ? parts[2] : 1.0;
    if (!(step > 0.0)) fail(file, entry, "range step must be > 0");
    if (stop < start) fail(file, entry, fmt::format("range '{}' is empty", entry.value));
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    if (count > 100000) fail(file, entry, "range has more than 100000 points");
    for (long i = 0; i < count; ++i) values.push_back(start + step * static_cast<double>(i));
  } else {
    std::size_t pos = 0;
    while (pos <= s.size()) {
      const auto comma = s.find(',', pos);
      const std::string_view item = s.substr(pos, comma == std::string_view::npos ? s.npos : comma - pos);
      bool ok = false;
      const double v = to_double(item, ok);
      if (!ok) fail(file, entry, fmt::format("malformed axis value '{}'", trim(item)));
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  return values;
}

}  // namespace nvdnp
