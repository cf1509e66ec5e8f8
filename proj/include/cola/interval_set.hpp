#ifndef COLA_INTERVAL_SET_HPP
#define COLA_INTERVAL_SET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <variant>
#include <vector>

#include "cola/errors.hpp"

namespace cola {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval [lo, hi]; endpoints may be +-inf. lo <= hi.
struct Interval {
    double lo;
    double hi;
    bool operator==(const Interval&) const = default;
};

/// A finite union of disjoint closed intervals, kept sorted with strictly
/// positive gaps between members (touching or overlapping intervals are
/// merged on construction). The empty union has no intervals.
class IntervalUnion {
public:
    IntervalUnion() = default;

    /// Normalize a raw list of (lo, hi) pairs: pairs with lo > hi are dropped
    /// as empty, NaN endpoints are rejected, the rest are sorted and merged.
    static IntervalUnion normalized(std::vector<Interval> raw) {
        for (const Interval& iv : raw) {
            if (std::isnan(iv.lo) || std::isnan(iv.hi)) {
                throw std::invalid_argument("IntervalUnion: NaN endpoint");
            }
        }
        std::erase_if(raw, [](const Interval& iv) { return iv.lo > iv.hi; });
        std::sort(raw.begin(), raw.end(), [](const Interval& a, const Interval& b) {
            return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
        });
        IntervalUnion out;
        for (const Interval& iv : raw) {
            if (!out.intervals_.empty() && iv.lo <= out.intervals_.back().hi) {
                out.intervals_.back().hi = std::max(out.intervals_.back().hi, iv.hi);
            } else {
                out.intervals_.push_back(iv);
            }
        }
        return out;
    }

    static IntervalUnion empty_set() { return {}; }

    static IntervalUnion whole_line() { return normalized({{-kInf, kInf}}); }

    /// Single interval [lo, hi]; empty union when lo > hi.
    static IntervalUnion single(double lo, double hi) { return normalized({{lo, hi}}); }

    const std::vector<Interval>& intervals() const { return intervals_; }
    bool empty() const { return intervals_.empty(); }

    bool contains(double y) const {
        auto it = std::upper_bound(intervals_.begin(), intervals_.end(), y,
                                   [](double v, const Interval& iv) { return v < iv.lo; });
        if (it == intervals_.begin()) return false;
        --it;
        return y >= it->lo && y <= it->hi;
    }

    /// Lebesgue measure; +inf if any endpoint is infinite.
    double measure() const {
        double total = 0.0;
        for (const Interval& iv : intervals_) {
            if (std::isinf(iv.lo) || std::isinf(iv.hi)) return kInf;
            total += iv.hi - iv.lo;
        }
        return total;
    }

    bool operator==(const IntervalUnion&) const = default;

private:
    std::vector<Interval> intervals_;
};

inline IntervalUnion intersect(const IntervalUnion& a, const IntervalUnion& b) {
    std::vector<Interval> out;
    const auto& xs = a.intervals();
    const auto& ys = b.intervals();
    std::size_t i = 0, j = 0;
    while (i < xs.size() && j < ys.size()) {
        double lo = std::max(xs[i].lo, ys[j].lo);
        double hi = std::min(xs[i].hi, ys[j].hi);
        if (lo <= hi) out.push_back({lo, hi});
        if (xs[i].hi < ys[j].hi) {
            ++i;
        } else if (ys[j].hi < xs[i].hi) {
            ++j;
        } else {
            ++i;
            ++j;
        }
    }
    return IntervalUnion::normalized(std::move(out));
}

/// Finite set of integer labels, kept sorted without duplicates.
class DiscreteSet {
public:
    DiscreteSet() = default;
    explicit DiscreteSet(std::vector<std::int64_t> labels) : labels_(std::move(labels)) {
        std::sort(labels_.begin(), labels_.end());
        labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
    }

    const std::vector<std::int64_t>& labels() const { return labels_; }
    bool empty() const { return labels_.empty(); }
    bool contains(std::int64_t label) const {
        return std::binary_search(labels_.begin(), labels_.end(), label);
    }
    double measure() const { return static_cast<double>(labels_.size()); }

    bool operator==(const DiscreteSet&) const = default;

private:
    std::vector<std::int64_t> labels_;
};

inline DiscreteSet intersect(const DiscreteSet& a, const DiscreteSet& b) {
    std::vector<std::int64_t> out;
    std::set_intersection(a.labels().begin(), a.labels().end(), b.labels().begin(),
                          b.labels().end(), std::back_inserter(out));
    return DiscreteSet(std::move(out));
}

/// A prediction set is either a union of intervals (regression) or a finite
/// label set (classification). Operations on mixed tags are rejected.
class PredictionSet {
public:
    PredictionSet() : value_(IntervalUnion{}) {}
    PredictionSet(IntervalUnion u) : value_(std::move(u)) {}
    PredictionSet(DiscreteSet d) : value_(std::move(d)) {}

    bool is_intervals() const { return std::holds_alternative<IntervalUnion>(value_); }
    bool is_discrete() const { return std::holds_alternative<DiscreteSet>(value_); }

    const IntervalUnion& intervals() const { return std::get<IntervalUnion>(value_); }
    const DiscreteSet& discrete() const { return std::get<DiscreteSet>(value_); }

    double measure() const {
        return is_intervals() ? intervals().measure() : discrete().measure();
    }

    bool empty() const { return is_intervals() ? intervals().empty() : discrete().empty(); }

    bool contains(double y) const {
        if (is_intervals()) return intervals().contains(y);
        std::int64_t label = static_cast<std::int64_t>(std::llround(y));
        return static_cast<double>(label) == y && discrete().contains(label);
    }

    bool operator==(const PredictionSet&) const = default;

private:
    std::variant<IntervalUnion, DiscreteSet> value_;
};

inline PredictionSet intersect(const PredictionSet& a, const PredictionSet& b) {
    if (a.is_intervals() && b.is_intervals()) return intersect(a.intervals(), b.intervals());
    if (a.is_discrete() && b.is_discrete()) return intersect(a.discrete(), b.discrete());
    throw std::invalid_argument("intersect: mixed interval/discrete prediction sets");
}

/// measure(a \ b) + measure(b \ a). Both sets must have finite measure.
inline double sym_diff_measure(const PredictionSet& a, const PredictionSet& b) {
    if (a.is_intervals() != b.is_intervals()) {
        throw std::invalid_argument("sym_diff_measure: mixed interval/discrete sets");
    }
    double ma = a.measure();
    double mb = b.measure();
    if (std::isinf(ma) || std::isinf(mb)) {
        throw std::invalid_argument("sym_diff_measure: infinite measure unsupported");
    }
    return ma + mb - 2.0 * intersect(a, b).measure();
}

inline double sym_diff_measure(const IntervalUnion& a, const IntervalUnion& b) {
    return sym_diff_measure(PredictionSet(a), PredictionSet(b));
}

inline std::ostream& operator<<(std::ostream& os, const IntervalUnion& u) {
    os << "{";
    for (std::size_t i = 0; i < u.intervals().size(); ++i) {
        if (i) os << ", ";
        os << "[" << u.intervals()[i].lo << ", " << u.intervals()[i].hi << "]";
    }
    return os << "}";
}

} // namespace cola

#endif // COLA_INTERVAL_SET_HPP
