#pragma once

#include <map>
#include <optional>
#include <vector>

namespace circledyn {

constexpr double kEndpointTol = 1e-12;

// Reduce any real into [0,1).
double wrap_unit(double v);

struct CirclePoint {
    double x = 0.0;
    CirclePoint() = default;
    explicit CirclePoint(double v) : x(wrap_unit(v)) {}
    bool operator==(const CirclePoint&) const = default;
};

// Half-open arc [start, start+length), length in (0,1].
struct Arc {
    CirclePoint start;
    double length = 0.0;

    Arc() = default;
    Arc(CirclePoint s, double len);
    Arc(double s, double len) : Arc(CirclePoint(s), len) {}

    bool full() const { return length >= 1.0; }
    CirclePoint end() const { return CirclePoint(start.x + length); }
    CirclePoint midpoint() const { return CirclePoint(start.x + 0.5 * length); }
    // Point at relative position t in [0,1] along the arc.
    CirclePoint at(double t) const { return CirclePoint(start.x + t * length); }
};

// Arc running in the positive direction from p to q.
Arc arc_between(CirclePoint p, CirclePoint q);

// Positive displacement from p to q, in [0,1).
double forward_distance(CirclePoint p, CirclePoint q);

// Signed displacement q - p reduced to (-1/2, 1/2].
double signed_displacement(CirclePoint p, CirclePoint q);

double circle_distance(CirclePoint p, CirclePoint q);

bool arc_contains(const Arc& a, CirclePoint p, double tol = kEndpointTol);

// True when inner lies in outer up to tol at the endpoints.
bool arc_contains_arc(const Arc& outer, const Arc& inner, double tol = kEndpointTol);

// Length of the intersection of two arcs (both pieces when they meet twice).
double arc_overlap(const Arc& a, const Arc& b);

// Pairwise interior-disjoint arcs, kept sorted by start.
class ArcSet {
public:
    ArcSet() = default;

    // Inserts a when it overlaps no member by more than tol; otherwise
    // returns the first overlapping member and leaves the set unchanged.
    std::optional<Arc> try_insert(const Arc& a, double tol = kEndpointTol);

    // Value-returning variant; throws OverlapError naming the member hit.
    ArcSet with(const Arc& a, double tol = kEndpointTol) const;

    std::optional<Arc> find_overlap(const Arc& a, double tol = kEndpointTol) const;
    // Member containing p, if any.
    std::optional<Arc> find_containing(CirclePoint p, double tol = kEndpointTol) const;

    std::vector<Arc> arcs() const;
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    double total_length() const { return total_; }

private:
    std::map<double, Arc> members_;
    double total_ = 0.0;
};

}  // namespace circledyn
