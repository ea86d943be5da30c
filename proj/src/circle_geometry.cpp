#include "circledyn/circle_geometry.hpp"

#include <algorithm>
#include <cmath>

#include "circledyn/errors.hpp"

namespace circledyn {

double wrap_unit(double v) {
    double r = v - std::floor(v);
    if (r >= 1.0) r = 0.0;
    if (r < 0.0) r = 0.0;
    return r;
}

Arc::Arc(CirclePoint s, double len) : start(s), length(len) {
    if (!(len > 0.0) || len > 1.0 + 1e-15)
        throw InvalidArgument("arc length must lie in (0,1]");
    if (length > 1.0) length = 1.0;
}

Arc arc_between(CirclePoint p, CirclePoint q) {
    double len = forward_distance(p, q);
    if (len == 0.0) len = 1.0;
    return Arc(p, len);
}

double forward_distance(CirclePoint p, CirclePoint q) { return wrap_unit(q.x - p.x); }

double signed_displacement(CirclePoint p, CirclePoint q) {
    double d = forward_distance(p, q);
    return d > 0.5 ? d - 1.0 : d;
}

double circle_distance(CirclePoint p, CirclePoint q) {
    double d = std::abs(p.x - q.x);
    return std::min(d, 1.0 - d);
}

bool arc_contains(const Arc& a, CirclePoint p, double tol) {
    if (tol < 0.0) throw InvalidArgument("tolerance must be nonnegative");
    if (a.full()) return true;
    double off = forward_distance(a.start, p);
    if (off < a.length) return true;
    if (tol > 0.0 && off - a.length <= tol) return true;
    if (tol > 0.0 && 1.0 - off <= tol) return true;
    return false;
}

bool arc_contains_arc(const Arc& outer, const Arc& inner, double tol) {
    if (outer.full()) return true;
    if (inner.length > outer.length + tol) return false;
    double off = forward_distance(outer.start, inner.start);
    if (off > 1.0 - tol) off -= 1.0;
    return off >= -tol && off + inner.length <= outer.length + tol;
}

double arc_overlap(const Arc& a, const Arc& b) {
    if (a.full()) return b.length;
    if (b.full()) return a.length;
    double d = forward_distance(a.start, b.start);
    auto piece = [&](double lo) {
        return std::max(0.0, std::min(a.length, lo + b.length) - std::max(0.0, lo));
    };
    return piece(d) + piece(d - 1.0);
}

std::optional<Arc> ArcSet::find_overlap(const Arc& a, double tol) const {
    if (members_.empty()) return std::nullopt;
    // Only the cyclic predecessor and successor of a.start can overlap first.
    auto succ = members_.lower_bound(a.start.x);
    if (succ == members_.end()) succ = members_.begin();
    auto pred = members_.upper_bound(a.start.x);
    if (pred == members_.begin()) pred = std::prev(members_.end());
    else pred = std::prev(pred);
    for (auto it : {pred, succ})
        if (arc_overlap(a, it->second) > tol) return it->second;
    return std::nullopt;
}

std::optional<Arc> ArcSet::find_containing(CirclePoint p, double tol) const {
    if (members_.empty()) return std::nullopt;
    auto pred = members_.upper_bound(p.x);
    if (pred == members_.begin()) pred = std::prev(members_.end());
    else pred = std::prev(pred);
    if (arc_contains(pred->second, p, tol)) return pred->second;
    auto succ = std::next(pred) == members_.end() ? members_.begin() : std::next(pred);
    if (arc_contains(succ->second, p, tol)) return succ->second;
    return std::nullopt;
}

std::optional<Arc> ArcSet::try_insert(const Arc& a, double tol) {
    if (auto hit = find_overlap(a, tol)) return hit;
    members_.emplace(a.start.x, a);
    total_ += a.length;
    return std::nullopt;
}

ArcSet ArcSet::with(const Arc& a, double tol) const {
    ArcSet out = *this;
    if (auto hit = out.try_insert(a, tol))
        throw OverlapError("arc overlaps member starting at " + std::to_string(hit->start.x));
    return out;
}

std::vector<Arc> ArcSet::arcs() const {
    std::vector<Arc> out;
    out.reserve(members_.size());
    for (const auto& [k, v] : members_) out.push_back(v);
    return out;
}

}  // namespace circledyn
