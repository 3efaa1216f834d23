#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace tracelens {

/// A finite set of integers stored as sorted, disjoint, non-adjacent closed
/// intervals. The common case of a single interval costs one element.
class Domain {
 public:
  struct Interval {
    std::int64_t lo;
    std::int64_t hi;
    friend bool operator==(const Interval&, const Interval&) = default;
  };

  Domain() = default;
  static Domain range(std::int64_t lo, std::int64_t hi);
  static Domain singleton(std::int64_t v) { return range(v, v); }
  static Domain of(std::initializer_list<std::int64_t> values);
  static Domain of_values(std::vector<std::int64_t> values);
  /// Builds from arbitrary (possibly overlapping, unsorted) intervals.
  static Domain from_intervals(std::vector<Interval> intervals);

  bool empty() const { return intervals_.empty(); }
  std::uint64_t size() const;
  std::int64_t min() const { return intervals_.front().lo; }
  std::int64_t max() const { return intervals_.back().hi; }
  bool is_singleton() const { return intervals_.size() == 1 && intervals_[0].lo == intervals_[0].hi; }
  bool contains(std::int64_t v) const;
  bool contains_all(const Domain& other) const;

  const std::vector<Interval>& intervals() const { return intervals_; }
  std::vector<std::int64_t> values() const;

  Domain intersect(const Domain& other) const;
  Domain minus(const Domain& other) const;
  Domain unite(const Domain& other) const;
  Domain restrict_min(std::int64_t lo) const;
  Domain restrict_max(std::int64_t hi) const;
  Domain remove(std::int64_t v) const;

  /// `1..3 5 7..9`; the empty domain renders as `{}`.
  std::string to_string() const;
  static Domain parse(const std::string& text);

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  explicit Domain(std::vector<Interval> normalized) : intervals_(std::move(normalized)) {}
  std::vector<Interval> intervals_;
};

}  // namespace tracelens
