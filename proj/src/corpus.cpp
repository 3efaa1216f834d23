#include "tracelens/corpus.hpp"

#include <random>
#include <stdexcept>

namespace tracelens::corpus {

std::string bench_program() {
  return "bench(0).\n"
         "bench(N) :- N > 0, N1 is N-1, bench(N1).\n";
}

std::string queens_program() {
  return "queens(N, Qs) :- mklist(N, Qs), fd_domain(Qs, 1, N), safe(Qs), fd_labeling(Qs).\n"
         "\n"
         "mklist(0, []).\n"
         "mklist(N, [_|T]) :- N > 0, N1 is N-1, mklist(N1, T).\n"
         "\n"
         "safe([]).\n"
         "safe([Q|Qs]) :- noattack(Q, Qs, 1), safe(Qs).\n"
         "\n"
         "noattack(_, [], _).\n"
         "noattack(Q, [Q1|Qs], D) :-\n"
         "    fd_post(Q #\\= Q1),\n"
         "    fd_post(Q #\\= Q1 + D),\n"
         "    fd_post(Q #\\= Q1 - D),\n"
         "    D1 is D+1,\n"
         "    noattack(Q, Qs, D1).\n";
}

Workload bench(int n) { return {"bench:" + std::to_string(n), bench_program(), "bench(" + std::to_string(n) + ")"}; }

Workload queens(int n) {
  return {"queens:" + std::to_string(n), queens_program(), "queens(" + std::to_string(n) + ", Qs)"};
}

bool BinaryConstraint::holds(std::int64_t xi, std::int64_t xj) const {
  switch (kind) {
    case Kind::ne_offset: return xi != xj + k;
    case Kind::lt: return xi < xj;
    case Kind::le_offset: return xi <= xj + k;
    case Kind::sum_ne: return xi + xj != k;
  }
  return false;
}

CspInstance random_csp(const CspOptions& options) {
  if (options.vars < 1 || options.domain < 1) throw std::invalid_argument("csp needs vars >= 1 and domain >= 1");
  CspInstance inst;
  inst.options = options;
  std::mt19937_64 rng(options.seed);
  std::bernoulli_distribution pick(options.density);
  std::uniform_int_distribution<int> kind_dist(0, 3);
  std::uniform_int_distribution<std::int64_t> offset(-2, 2);
  std::uniform_int_distribution<std::int64_t> sum(2, 2 * options.domain);

  auto var = [](int i) { return "X" + std::to_string(i + 1); };
  std::string vars;
  for (int i = 0; i < options.vars; ++i) vars += (i ? ", " : "") + var(i);

  std::string body = "    fd_domain([" + vars + "], 1, " + std::to_string(options.domain) + ")";
  for (int i = 0; i < options.vars; ++i)
    for (int j = i + 1; j < options.vars; ++j) {
      if (!pick(rng)) continue;
      BinaryConstraint c{static_cast<BinaryConstraint::Kind>(kind_dist(rng)), i, j, 0};
      std::string text;
      switch (c.kind) {
        case BinaryConstraint::Kind::ne_offset:
          c.k = offset(rng);
          text = var(i) + " #\\= " + var(j) + " + " + std::to_string(c.k);
          break;
        case BinaryConstraint::Kind::lt:
          text = var(i) + " #< " + var(j);
          break;
        case BinaryConstraint::Kind::le_offset:
          c.k = offset(rng);
          text = var(i) + " #=< " + var(j) + " + " + std::to_string(c.k);
          break;
        case BinaryConstraint::Kind::sum_ne:
          c.k = sum(rng);
          text = var(i) + " + " + var(j) + " #\\= " + std::to_string(c.k);
          break;
      }
      inst.constraints.push_back(c);
      body += ",\n    fd_post(" + text + ")";
    }
  body += ",\n    fd_labeling([" + vars + "]).\n";
  inst.workload.name = "csp:" + std::to_string(options.seed) + ":" + std::to_string(options.vars) + ":" +
                       std::to_string(options.domain) + ":" + std::to_string(options.density);
  inst.workload.program = "csp([" + vars + "]) :-\n" + body;
  inst.workload.goal = "csp(Vs)";
  return inst;
}

Workload resolve(std::string_view spec) {
  auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("workload spec needs kind:args: " + std::string(spec));
  auto kind = spec.substr(0, colon);
  std::vector<std::string> args;
  std::string cur;
  for (char c : spec.substr(colon + 1)) {
    if (c == ':') {
      args.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  args.push_back(cur);
  try {
    if (kind == "bench" && args.size() == 1) return bench(std::stoi(args[0]));
    if (kind == "queens" && args.size() == 1) return queens(std::stoi(args[0]));
    if (kind == "csp" && args.size() <= 4) {
      CspOptions o;
      o.seed = std::stoull(args[0]);
      if (args.size() > 1) o.vars = std::stoi(args[1]);
      if (args.size() > 2) o.domain = std::stoi(args[2]);
      if (args.size() > 3) o.density = std::stod(args[3]);
      return random_csp(o).workload;
    }
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad workload spec: " + std::string(spec));
  }
  throw std::invalid_argument("unknown workload: " + std::string(spec));
}

}  // namespace tracelens::corpus
