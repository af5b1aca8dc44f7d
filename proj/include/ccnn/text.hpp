// SPDX-License-Identifier: Apache-2.0
#pragma once

// Number and digest formatting shared by every file format the toolkit
// writes.

#include <span>
#include <string>
#include <string_view>

namespace ccnn {

/// Decimal scientific notation with 17 significant digits
/// ("-6.7620000000000005e+00"). Parsing the result with strtod gives back
/// the identical double. Non-finite input throws ccnn::Error(numeric).
std::string format_real(double value);

/// Appends "[v0,v1,...]" using format_real for each element.
void append_real_array(std::string& out, std::span<const double> values);

/// Lower-case hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

/// JSON string literal (quoted and escaped).
std::string json_quote(std::string_view s);

}  // namespace ccnn
