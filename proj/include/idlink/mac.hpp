#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>

namespace idlink {

using Oui = std::array<std::uint8_t, 3>;

// 48-bit link-layer device identifier. Canonical text form is
// lowercase, colon separated, two hex digits per octet.
struct MacAddress {
  std::array<std::uint8_t, 6> octets{};

  auto operator<=>(const MacAddress&) const = default;

  std::string to_string() const;

  // Accepts upper or lower case hex; throws ParseError on anything
  // that is not exactly six colon-separated octets.
  static MacAddress parse(const std::string& text);
};

// Locally Administered bit: mask 0x02 of the first octet. Set on
// randomized / locally assigned addresses.
inline bool is_locally_administered(const MacAddress& mac) {
  return (mac.octets[0] & 0x02u) != 0;
}

// First three octets: the Organizationally Unique Identifier of a
// globally assigned address.
inline Oui oui_of(const MacAddress& mac) {
  return {mac.octets[0], mac.octets[1], mac.octets[2]};
}

std::string oui_to_string(const Oui& oui);

// Parses a bare 6-hex-digit prefix ("001122") as used in OUI files.
Oui parse_oui_prefix(const std::string& text);

}  // namespace idlink
