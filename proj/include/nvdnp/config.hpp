#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nvdnp {

// `[section]` headers, `key = value` lines, `#` comments. Order of sections
// and keys is kept; duplicates are rejected.
class ConfigFile {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
  };

  // Throws ValidationError with the offending line number.
  static ConfigFile parse(std::string_view text, std::string origin = "<config>");

  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }
  const Entry* find(std::string_view section, std::string_view key) const;
  std::vector<const Entry*> section(std::string_view name) const;

 private:
  std::vector<Entry> entries_;
  std::string origin_;
};

// Value helpers; all throw ValidationError naming origin, line and key.
double parse_double(const ConfigFile& file, const ConfigFile::Entry& entry);
int parse_int(const ConfigFile& file, const ConfigFile::Entry& entry);
// `a, b, c` or `start:stop[:step]` (inclusive); never empty.
std::vector<double> parse_axis(const ConfigFile& file, const ConfigFile::Entry& entry);

}  // namespace nvdnp
