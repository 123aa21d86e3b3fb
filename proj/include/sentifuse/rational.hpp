#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>

#include <boost/rational.hpp>

namespace sentifuse {

// Compare against Rational(...) rather than a bare int: under C++20's reversed-operator
// rules boost 1.74's mixed rational == int overload calls itself forever.
using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
    return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Fixed-point rendering, e.g. format_fixed(-21/25, 2) == "-0.84".
inline std::string format_fixed(const Rational& r, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, to_double(r));
    std::string s(buf);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

inline std::string to_fraction_string(const Rational& r) {
    return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace sentifuse
