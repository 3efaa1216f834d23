#include "tracelens/domain.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace tracelens {

Domain Domain::range(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) return Domain{};
  return Domain{{Interval{lo, hi}}};
}

Domain Domain::of(std::initializer_list<std::int64_t> values) {
  return of_values(std::vector<std::int64_t>(values));
}

Domain Domain::of_values(std::vector<std::int64_t> values) {
  std::vector<Interval> iv;
  iv.reserve(values.size());
  for (auto v : values) iv.push_back({v, v});
  return from_intervals(std::move(iv));
}

Domain Domain::from_intervals(std::vector<Interval> intervals) {
  std::erase_if(intervals, [](const Interval& i) { return i.lo > i.hi; });
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const auto& i : intervals) {
    if (!out.empty() && i.lo <= out.back().hi + 1) {
      out.back().hi = std::max(out.back().hi, i.hi);
    } else {
      out.push_back(i);
    }
  }
  return Domain{std::move(out)};
}

std::uint64_t Domain::size() const {
  std::uint64_t n = 0;
  for (const auto& i : intervals_) n += static_cast<std::uint64_t>(i.hi - i.lo) + 1;
  return n;
}

bool Domain::contains(std::int64_t v) const {
  auto it = std::upper_bound(intervals_.begin(), intervals_.end(), v,
                             [](std::int64_t x, const Interval& i) { return x < i.lo; });
  if (it == intervals_.begin()) return false;
  --it;
  return v <= it->hi;
}

bool Domain::contains_all(const Domain& other) const { return other.minus(*this).empty(); }

std::vector<std::int64_t> Domain::values() const {
  std::vector<std::int64_t> out;
  for (const auto& i : intervals_)
    for (auto v = i.lo; v <= i.hi; ++v) out.push_back(v);
  return out;
}

Domain Domain::intersect(const Domain& other) const {
  std::vector<Interval> out;
  std::size_t a = 0, b = 0;
  while (a < intervals_.size() && b < other.intervals_.size()) {
    const auto& x = intervals_[a];
    const auto& y = other.intervals_[b];
    auto lo = std::max(x.lo, y.lo);
    auto hi = std::min(x.hi, y.hi);
    if (lo <= hi) out.push_back({lo, hi});
    if (x.hi < y.hi) ++a; else ++b;
  }
  return Domain{std::move(out)};
}

Domain Domain::minus(const Domain& other) const {
  std::vector<Interval> out;
  std::size_t b = 0;
  for (auto cur : intervals_) {
    while (b < other.intervals_.size() && other.intervals_[b].hi < cur.lo) ++b;
    std::size_t k = b;
    bool alive = true;
    while (k < other.intervals_.size() && other.intervals_[k].lo <= cur.hi) {
      const auto& cut = other.intervals_[k];
      if (cut.lo > cur.lo) out.push_back({cur.lo, cut.lo - 1});
      if (cut.hi >= cur.hi) { alive = false; break; }
      cur.lo = cut.hi + 1;
      ++k;
    }
    if (alive) out.push_back(cur);
  }
  return Domain{std::move(out)};
}

Domain Domain::unite(const Domain& other) const {
  auto all = intervals_;
  all.insert(all.end(), other.intervals_.begin(), other.intervals_.end());
  return from_intervals(std::move(all));
}

Domain Domain::restrict_min(std::int64_t lo) const {
  if (empty() || lo <= min()) return *this;
  return intersect(range(lo, max()));
}

Domain Domain::restrict_max(std::int64_t hi) const {
  if (empty() || hi >= max()) return *this;
  return intersect(range(min(), hi));
}

Domain Domain::remove(std::int64_t v) const {
  if (!contains(v)) return *this;
  return minus(singleton(v));
}

std::string Domain::to_string() const {
  if (empty()) return "{}";
  std::ostringstream os;
  bool first = true;
  for (const auto& i : intervals_) {
    if (!first) os << ' ';
    first = false;
    if (i.lo == i.hi) os << i.lo; else os << i.lo << ".." << i.hi;
  }
  return os.str();
}

Domain Domain::parse(const std::string& text) {
  if (text == "{}") return Domain{};
  std::istringstream is(text);
  std::string tok;
  std::vector<Interval> iv;
  while (is >> tok) {
    auto dots = tok.find("..", 1);
    try {
      if (dots == std::string::npos) {
        auto v = std::stoll(tok);
        iv.push_back({v, v});
      } else {
        iv.push_back({std::stoll(tok.substr(0, dots)), std::stoll(tok.substr(dots + 2))});
      }
    } catch (const std::exception&) {
      throw std::invalid_argument("bad domain token '" + tok + "'");
    }
  }
  return from_intervals(std::move(iv));
}

}  // namespace tracelens
