#pragma once

#include <string>

namespace tubal {

/// Shortest round-trip decimal form; NaN becomes the empty field and
/// infinities become "inf"/"-inf".
std::string csv_number(double v);

}  // namespace tubal
