#include "idlink/mac.hpp"

#include <cstdio>

#include "idlink/errors.hpp"

namespace idlink {
namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::uint8_t parse_octet(const std::string& text, std::size_t pos, const std::string& whole) {
  const int hi = hex_value(text[pos]);
  const int lo = hex_value(text[pos + 1]);
  if (hi < 0 || lo < 0) {
    throw ParseError("invalid MAC address \"" + whole + "\": non-hex characters in octet \"" +
                     text.substr(pos, 2) + "\"");
  }
  return static_cast<std::uint8_t>(hi * 16 + lo);
}

}  // namespace

std::string MacAddress::to_string() const {
  char buf[18];
  std::snprintf(buf, sizeof(buf), "%02x:%02x:%02x:%02x:%02x:%02x",
                octets[0], octets[1], octets[2], octets[3], octets[4], octets[5]);
  return buf;
}

MacAddress MacAddress::parse(const std::string& text) {
  if (text.size() != 17) {
    throw ParseError("invalid MAC address \"" + text + "\": expected 6 colon-separated octets");
  }
  MacAddress mac;
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t pos = i * 3;
    if (i > 0 && text[pos - 1] != ':') {
      throw ParseError("invalid MAC address \"" + text + "\": expected ':' before octet " +
                       std::to_string(i + 1));
    }
    mac.octets[i] = parse_octet(text, pos, text);
  }
  return mac;
}

std::string oui_to_string(const Oui& oui) {
  char buf[7];
  std::snprintf(buf, sizeof(buf), "%02x%02x%02x", oui[0], oui[1], oui[2]);
  return buf;
}

Oui parse_oui_prefix(const std::string& text) {
  if (text.size() != 6) {
    throw ParseError("invalid OUI prefix \"" + text + "\": expected 6 hex digits");
  }
  Oui oui;
  for (std::size_t i = 0; i < 3; ++i) {
    const int hi = hex_value(text[2 * i]);
    const int lo = hex_value(text[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      throw ParseError("invalid OUI prefix \"" + text + "\": non-hex characters");
    }
    oui[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return oui;
}

}  // namespace idlink
