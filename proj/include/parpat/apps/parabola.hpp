#ifndef PARPAT_APPS_PARABOLA_HPP
#define PARPAT_APPS_PARABOLA_HPP

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "parpat/payload.hpp"
#include "parpat/taskmap.hpp"

namespace parpat::parabola {

/// Parameter sweep over a*x^2 + b*x + c on [0, L]: flag the (a, b) grid
/// combinations where the sampled parabola dips below zero. c is fixed at 5.
struct ParabolaConfig {
  int m = 100;    // grid points per parameter axis
  int n = 50;     // x samples
  double L = 10;  // interval length
};

struct ABPair {
  double a = 0;
  double b = 0;
  bool operator==(const ABPair&) const = default;
};

inline void pack(ByteWriter& w, const ABPair& p) {
  w.value(p.a);
  w.value(p.b);
}

inline void unpack(ByteReader& r, ABPair& p) {
  p.a = r.value<double>();
  p.b = r.value<double>();
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return xs;
}

inline std::vector<double> parabola_func(const std::vector<double>& x, double a, double b,
                                         double c) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = a * x[i] * x[i] + b * x[i] + c;
  return out;
}

/// The m^2 task inputs: a outer loop, b inner loop, both over [-1, 1].
inline std::vector<ABPair> parabola_initialize(const ParabolaConfig& cfg) {
  if (cfg.m < 2 || cfg.n < 2 || !(cfg.L > 0)) throw std::invalid_argument("bad parabola config");
  const auto a_values = linspace(-1, 1, cfg.m);
  const auto b_values = linspace(-1, 1, cfg.m);
  std::vector<ABPair> inputs;
  inputs.reserve(static_cast<std::size_t>(cfg.m) * static_cast<std::size_t>(cfg.m));
  for (double a : a_values)
    for (double b : b_values) inputs.push_back({a, b});
  return inputs;
}

/// The (a, b) combinations whose task output (minimum sampled value) is
/// negative, in input order.
inline std::vector<ABPair> parabola_finalize(const std::vector<ABPair>& inputs,
                                             const std::vector<double>& outputs) {
  if (inputs.size() != outputs.size())
    throw std::invalid_argument("parabola_finalize: input/output length mismatch");
  std::vector<ABPair> ab;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (outputs[i] < 0) ab.push_back(inputs[i]);
  return ab;
}

struct ParabolaResult {
  std::vector<double> outputs;  // per-task minimum, the finalize input
  std::vector<ABPair> ab;       // flagged combinations
};

/// Runs the sweep; serial when comm is null, otherwise via the parallel task
/// driver (result meaningful on rank 0 only).
inline ParabolaResult run_parabola(const ParabolaConfig& cfg, Communicator* comm = nullptr) {
  const auto x = linspace(0, cfg.L, cfg.n);
  const double c = 5;
  auto initialize = [&] { return parabola_initialize(cfg); };
  auto task = [&](const ABPair& in) {
    const auto values = parabola_func(x, in.a, in.b, c);
    double m = values[0];
    for (double v : values) m = std::min(m, v);
    return m;
  };
  ParabolaResult result;
  auto finalize = [&](const std::vector<double>& outputs) {
    result.outputs = outputs;
    result.ab = parabola_finalize(parabola_initialize(cfg), outputs);
  };
  if (comm)
    parallel_solve_problem(initialize, task, finalize, *comm);
  else
    solve_problem(initialize, task, finalize);
  return result;
}

}  // namespace parpat::parabola

#endif
