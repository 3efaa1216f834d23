#pragma once

// Workload programs used by tests and the bench harness.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tracelens::corpus {

struct Workload {
  std::string name;
  std::string program;
  std::string goal;
};

std::string bench_program();
std::string queens_program();

Workload bench(int n);
Workload queens(int n);

struct CspOptions {
  int vars = 6;
  int domain = 5;
  double density = 0.4;  // probability that a pair of variables is constrained
  std::uint64_t seed = 1;
};

/// Binary constraint between x_i and x_j (0-based variable indices).
struct BinaryConstraint {
  enum class Kind { ne_offset, lt, le_offset, sum_ne } kind;
  int i = 0;
  int j = 0;
  std::int64_t k = 0;
  bool holds(std::int64_t xi, std::int64_t xj) const;
};

struct CspInstance {
  CspOptions options;
  std::vector<BinaryConstraint> constraints;
  Workload workload;
};

CspInstance random_csp(const CspOptions& options);

/// `bench:N`, `queens:N` or `csp:SEED[:VARS[:DOMAIN[:DENSITY]]]`.
/// Throws std::invalid_argument on anything else.
Workload resolve(std::string_view spec);

}  // namespace tracelens::corpus
