#pragma once

#include <string>

namespace ivbounds {

// Shortest round-trip-safe decimal text for a double ("%.17g"); "nan",
// "inf" and "-inf" for non-finite values.
std::string format_double(double v);

}  // namespace ivbounds
