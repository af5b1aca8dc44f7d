// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <cmath>
#include "json.hpp"

#include "ccnn/error.hpp"
#include "ccnn/text.hpp"

namespace ccnn {

std::string format_real(double value) {
  if (!std::isfinite(value)) throw_numeric("cannot serialise non-finite value");
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

void append_real_array(std::string& out, std::span<const double> values) {
  out.push_back('[');
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i != 0) out.push_back(',');
    out += format_real(values[i]);
  }
  out.push_back(']');
}

std::string json_quote(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

}  // namespace ccnn
