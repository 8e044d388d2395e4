#include "core/profiles.hpp"

namespace tdoa {

std::optional<ProfileName> parse_profile(std::string_view name) {
  if (name == "arena") return ProfileName::Arena;
  if (name == "staircase") return ProfileName::Staircase;
  if (name == "multiroom") return ProfileName::Multiroom;
  return std::nullopt;
}

std::string to_string(ProfileName name) {
  switch (name) {
    case ProfileName::Arena: return "arena";
    case ProfileName::Staircase: return "staircase";
    case ProfileName::Multiroom: return "multiroom";
  }
  return "arena";
}

// Every radio number the field deployments report lives in this table:
//
//   profile     sigma  R scheduled  R out-of-sequence  gate
//   arena       0.10   0.010        0.025              5    (DWM1000 default precision, round-robin pairs)
//   staircase   0.10   0.015        0.025              5    (variance raised for corrupted stairwell ranging)
//   multiroom   0.10   0.010        0.025              10   (decentralized anchors, out-of-sequence pairs)
//
// The out-of-sequence variance only matters for decentralized logs; the
// centralized profiles keep it at the multiroom value.
Profile make_profile(ProfileName name) {
  Profile p;
  p.tdoa.sigma = 0.1;
  p.tdoa.variance_oos = 0.025;
  p.eskf.sigma_tdoa = 0.1;
  p.eskf.variance_scheduled = 0.01;
  p.eskf.variance_oos = 0.025;
  p.eskf.gate_gamma = 5.0;
  switch (name) {
    case ProfileName::Arena:
      break;
    case ProfileName::Staircase:
      p.eskf.variance_scheduled = 0.015;
      break;
    case ProfileName::Multiroom:
      p.eskf.gate_gamma = 10.0;
      break;
  }
  return p;
}

}  // namespace tdoa
