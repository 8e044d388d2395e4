#pragma once

#include "core/eskf.hpp"
#include "core/measurement.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace tdoa {

enum class ProfileName { Arena, Staircase, Multiroom };

std::optional<ProfileName> parse_profile(std::string_view name);
std::string to_string(ProfileName name);

struct Profile {
  EskfConfig eskf;
  TdoaParams tdoa;
};

Profile make_profile(ProfileName name);

}  // namespace tdoa
