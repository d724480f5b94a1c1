#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace nvdnp::detail {

// Generated at configure time from presets/*.ini.
const std::vector<std::pair<std::string_view, std::string_view>>& preset_table();

}  // namespace nvdnp::detail
