#pragma once

#include <stdexcept>

namespace ivbounds {

// Closed interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
        if (!(lo <= hi)) throw std::invalid_argument("Interval: lo must not exceed hi");
    }

    double width() const { return hi - lo; }
    bool degenerate() const { return lo == hi; }
    bool contains(double x) const { return lo <= x && x <= hi; }
    bool contains(const Interval& other) const { return lo <= other.lo && other.hi <= hi; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

}  // namespace ivbounds
