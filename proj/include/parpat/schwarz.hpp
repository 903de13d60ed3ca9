#ifndef PARPAT_SCHWARZ_HPP
#define PARPAT_SCHWARZ_HPP

#include <cmath>
#include <iostream>
#include <limits>
#include <string>
#include <utility>

#include "parpat/comm.hpp"
#include "parpat/errors.hpp"

namespace parpat {

/// Field object a subdomain solve returns: an independent snapshot via
/// copy(), a difference via operator-, and an inner product.
template <class F>
concept Field = requires(const F& a, const F& b) {
  { a.copy() } -> std::convertible_to<F>;
  { a - b } -> std::convertible_to<F>;
  { a.inner(b) } -> std::convertible_to<double>;
};

struct ConvergenceParams {
  int max_iter;
  double threshold;
};

/// Global relative-change test: r_s = <d,d>/<u,u> with d = solution - previous,
/// reduced with a collective max so every rank returns the same boolean.
/// Zero-norm corners: 0/0 counts as converged, x/0 as not converged.
template <Field F>
bool simple_convergence_test(const F& solution, const F& previous, double threshold,
                             Communicator& comm) {
  const F diff = solution - previous;
  const double dd = diff.inner(diff);
  const double uu = solution.inner(solution);
  double local;
  if (uu == 0.0) {
    local = dd == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    std::cerr << "simple_convergence_test: zero solution norm on rank " << comm.rank()
              << (dd == 0.0 ? " (zero change)" : " (nonzero change)") << "\n";
  } else {
    local = dd / uu;
  }
  return comm.all_reduce_max(local) < threshold;
}

template <class F>
struct SchwarzResult {
  F solution;
  int iterations;
  bool converged;
};

/// Additive Schwarz fixed-point loop. Per iteration: snapshot the previous
/// iterate, set internal boundary conditions, solve the subdomain problem,
/// exchange overlap values with the neighbors, then test global convergence.
template <Field F, class Solve, class SetBC, class Communicate, class ConvTest>
SchwarzResult<F> additive_schwarz_iterations(Solve&& subdomain_solve, SetBC&& set_bc,
                                             Communicate&& communicate,
                                             const ConvergenceParams& params, F solution,
                                             Communicator& comm, ConvTest&& convergence_test) {
  int iter = 0;
  bool converged = false;
  while (!converged && iter < params.max_iter) {
    ++iter;
    const F previous = solution.copy();
    set_bc(solution);
    solution = subdomain_solve();
    communicate(solution);
    if (!std::isfinite(solution.inner(solution)))
      throw DivergenceError("non-finite iterate at Schwarz iteration " + std::to_string(iter));
    converged = convergence_test(solution, previous, params.threshold, comm);
  }
  return {std::move(solution), iter, converged};
}

template <Field F, class Solve, class SetBC, class Communicate>
SchwarzResult<F> additive_schwarz_iterations(Solve&& subdomain_solve, SetBC&& set_bc,
                                             Communicate&& communicate,
                                             const ConvergenceParams& params, F solution,
                                             Communicator& comm) {
  return additive_schwarz_iterations(std::forward<Solve>(subdomain_solve),
                                     std::forward<SetBC>(set_bc),
                                     std::forward<Communicate>(communicate), params,
                                     std::move(solution), comm,
                                     [](const F& s, const F& p, double thr, Communicator& c) {
                                       return simple_convergence_test(s, p, thr, c);
                                     });
}

}  // namespace parpat

#endif
