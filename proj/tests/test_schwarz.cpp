#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "parpat/schwarz.hpp"
#include "parpat/spawn.hpp"

using namespace parpat;

namespace {

/// One-dimensional field: a single scalar value.
struct Scalar {
  double v = 0;
  Scalar copy() const { return *this; }
  Scalar operator-(const Scalar& o) const { return {v - o.v}; }
  double inner(const Scalar& o) const { return v * o.v; }
};

static_assert(Field<Scalar>);

GroupConfig single() {
  GroupConfig cfg;
  cfg.size = 1;
  return cfg;
}

}  // namespace

TEST_CASE("convergence test compares relative change against the threshold") {
  auto results = spawn_group(single(), [](Communicator& comm) -> int {
    // d = 1e-6, u = 10: r = dd/uu = 1e-14.
    CHECK(simple_convergence_test(Scalar{10.0}, Scalar{10.0 + 1e-6}, 1e-15, comm) == false);
    CHECK(simple_convergence_test(Scalar{10.0}, Scalar{10.0 + 1e-6}, 1e-13, comm) == true);
    // Zero-norm corners: 0/0 converged, x/0 not.
    CHECK(simple_convergence_test(Scalar{0.0}, Scalar{0.0}, 1e-10, comm) == true);
    CHECK(simple_convergence_test(Scalar{0.0}, Scalar{1.0}, 1e-10, comm) == false);
    return 0;
  });
  CHECK(results[0] == 0);
}

TEST_CASE("convergence is a global decision via the max reduction") {
  GroupConfig cfg;
  cfg.size = 2;
  auto results = spawn_group(cfg, [](Communicator& comm) -> int {
    // Rank 0 has converged locally, rank 1 has not; both must report false.
    const Scalar mine{1.0};
    const Scalar prev = comm.rank() == 0 ? Scalar{1.0} : Scalar{2.0};
    return simple_convergence_test(mine, prev, 1e-10, comm) ? 1 : 0;
  });
  CHECK(results == std::vector<int>{0, 0});
}

TEST_CASE("schwarz loop iterates the fixed point to convergence") {
  // x <- (x + 3) / 2 converges to 3; each "subdomain solve" is one step.
  auto results = spawn_group(single(), [](Communicator& comm) -> std::pair<double, int> {
    Scalar state{0.0};
    int bc_calls = 0;
    const auto r = additive_schwarz_iterations(
        [&] {
          state.v = (state.v + 3.0) / 2.0;
          return state;
        },
        [&](Scalar& s) {
          state = s;
          ++bc_calls;
        },
        [](Scalar&) {}, ConvergenceParams{200, 1e-24}, Scalar{0.0}, comm);
    CHECK(r.converged);
    CHECK(bc_calls == r.iterations);
    return {r.solution.v, r.iterations};
  });
  CHECK(results[0].first == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(results[0].second > 3);
}

TEST_CASE("iteration cap leaves converged false") {
  auto results = spawn_group(single(), [](Communicator& comm) -> std::pair<int, int> {
    Scalar state{1.0};
    const auto r = additive_schwarz_iterations(
        [&] {
          state.v *= -1.0;  // oscillates, never converges
          return state;
        },
        [&](Scalar& s) { state = s; }, [](Scalar&) {}, ConvergenceParams{7, 1e-12}, Scalar{1.0},
        comm);
    return {r.iterations, r.converged ? 1 : 0};
  });
  CHECK(results[0].first == 7);
  CHECK(results[0].second == 0);
}

TEST_CASE("non-finite iterates raise a divergence error naming the iteration") {
  CHECK_THROWS_WITH(spawn_group(single(),
                                [](Communicator& comm) {
                                  Scalar state{1.0};
                                  additive_schwarz_iterations(
                                      [&] {
                                        state.v *= 1e200;  // overflows to inf
                                        return state;
                                      },
                                      [&](Scalar& s) { state = s; }, [](Scalar&) {},
                                      ConvergenceParams{50, 1e-12}, Scalar{1.0}, comm);
                                  return 0;
                                }),
                    doctest::Contains("non-finite iterate at Schwarz iteration"));
}

TEST_CASE("threshold zero still counts an exact fixed point as not converged") {
  // r_s = 0 must beat a positive threshold but not a zero one.
  auto results = spawn_group(single(), [](Communicator& comm) -> int {
    CHECK(simple_convergence_test(Scalar{5.0}, Scalar{5.0}, 1e-300, comm) == true);
    CHECK(simple_convergence_test(Scalar{5.0}, Scalar{5.0}, 0.0, comm) == false);
    return 0;
  });
  CHECK(results[0] == 0);
}
