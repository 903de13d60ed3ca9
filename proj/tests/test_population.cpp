#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <random>
#include <vector>

#include "parpat/population.hpp"
#include "parpat/spawn.hpp"

using namespace parpat;

namespace {

/// Deterministic test population: each member is an int id; markers are
/// scripted per step. Observables are the current ids.
struct ScriptedPopulation {
  std::vector<int> ids;
  std::vector<int> next_markers;  // marker for index i on the next move()
  double threshold = 1.5;
  int next_id = 1000;

  void move() {
    if (next_markers.size() != ids.size()) next_markers.assign(ids.size(), 1);
  }
  int get_marker(std::size_t i) const { return next_markers[i]; }
  void append(std::size_t i, int nchilds) {
    for (int c = 0; c < nchilds; ++c) ids.push_back(ids[i]);
  }
  void remove(std::size_t i) { ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(i)); }
  std::vector<int> sample_observables() const { return ids; }
  void finalize_timestep(std::size_t, std::size_t) {}
  std::size_t length() const { return ids.size(); }
  double threshold_factor() const { return threshold; }

  Payload cut_slice(std::size_t k) {
    std::vector<int> tail(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    ids.resize(k);
    return to_payload(tail);
  }
  void paste_slice(const Payload& s) {
    for (int x : from_payload<std::vector<int>>(s)) ids.push_back(x);
  }
};

static_assert(Population<ScriptedPopulation>);

}  // namespace

TEST_CASE("population_step removes marker-0 and clones marker-n walkers") {
  ScriptedPopulation pop;
  pop.ids = {10, 20, 30, 40};
  pop.next_markers = {1, 0, 3, 2};
  const auto obs = population_step(pop);
  // 20 dies; 30 gains two clones; 40 gains one. Clones are appended.
  CHECK(obs == std::vector<int>{10, 30, 40, 40, 30, 30});
  CHECK(pop.length() == 6);
}

TEST_CASE("do_timestep raises on local extinction") {
  ScriptedPopulation pop;
  pop.ids = {1, 2};
  pop.next_markers = {0, 0};
  CHECK_THROWS_AS(do_timestep(pop), ExtinctionError);
}

TEST_CASE("time_integration collects one observation per step") {
  std::vector<std::vector<int>> trace;
  time_integration(
      [] {
        ScriptedPopulation pop;
        pop.ids = {7};
        return std::pair(pop, 3);
      },
      [](ScriptedPopulation& p) { return do_timestep(p); },
      [&](const std::vector<std::vector<int>>& t) { trace = t; });
  REQUIRE(trace.size() == 3);
  for (const auto& obs : trace) CHECK(obs == std::vector<int>{7});
}

TEST_CASE("imbalance_rate clamps the empty minimum") {
  CHECK(imbalance_rate({4, 4, 4}) == 1.0);
  CHECK(imbalance_rate({8, 2}) == 4.0);
  CHECK(imbalance_rate({5, 0}) == 5.0);
  CHECK_THROWS_AS(imbalance_rate({}), std::invalid_argument);
}

TEST_CASE("find_optimal_workload matches hand-computed cases") {
  // C = 16 / (1/1 + 1/3) = 12 -> [12, 4].
  CHECK(find_optimal_workload({1, 3}, {8, 8}) == std::vector<std::size_t>{12, 4});
  // C = 11 / (1/2 + 1/3 + 1/6) = 11 -> raw [5.5, 3.667, 1.833] -> [5, 4, 2].
  CHECK(find_optimal_workload({2, 3, 6}, {5, 5, 1}) == std::vector<std::size_t>{5, 4, 2});
  CHECK_THROWS_AS(find_optimal_workload({1, 0}, {3, 3}), std::invalid_argument);
  CHECK_THROWS_AS(find_optimal_workload({1}, {3, 3}), std::invalid_argument);
}

TEST_CASE("find_optimal_workload preserves totals and balances equal timings") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> nproc(1, 16);
  std::uniform_int_distribution<std::size_t> load(0, 500);
  std::uniform_real_distribution<double> time_dist(0.01, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int p = nproc(rng);
    std::vector<std::size_t> current(static_cast<std::size_t>(p));
    std::vector<double> timings(static_cast<std::size_t>(p));
    for (auto& c : current) c = load(rng);
    for (auto& t : timings) t = time_dist(rng);
    const std::size_t total = std::accumulate(current.begin(), current.end(), std::size_t{0});

    const auto target = find_optimal_workload(timings, current);
    CHECK(std::accumulate(target.begin(), target.end(), std::size_t{0}) == total);

    const auto equal = find_optimal_workload(std::vector<double>(p, 1.0), current);
    const auto [mn, mx] = std::minmax_element(equal.begin(), equal.end());
    CHECK(*mx - *mn <= 1);
  }
}

namespace {

std::multiset<int> multiset_of(const std::vector<std::vector<int>>& per_rank) {
  std::multiset<int> all;
  for (const auto& ids : per_rank) all.insert(ids.begin(), ids.end());
  return all;
}

}  // namespace

TEST_CASE("redistribute_work reaches the target with at most P-1 transfers") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int p = std::uniform_int_distribution<int>(2, 8)(rng);
    std::vector<std::size_t> current(static_cast<std::size_t>(p));
    std::size_t total = 0;
    for (auto& c : current) {
      c = std::uniform_int_distribution<std::size_t>(0, 60)(rng);
      total += c;
    }
    std::vector<double> timings(static_cast<std::size_t>(p));
    for (auto& t : timings) t = std::uniform_real_distribution<double>(0.1, 4.0)(rng);
    const auto target = find_optimal_workload(timings, current);

    GroupConfig cfg;
    cfg.size = p;
    auto results = spawn_group(cfg, [&](Communicator& comm) -> std::pair<int, std::vector<int>> {
      ScriptedPopulation pop;
      std::size_t base = 0;
      for (int r = 0; r < comm.rank(); ++r) base += current[static_cast<std::size_t>(r)];
      for (std::size_t i = 0; i < current[static_cast<std::size_t>(comm.rank())]; ++i)
        pop.ids.push_back(static_cast<int>(base + i));
      const int transfers = redistribute_work(pop, current, target, comm);
      return {transfers, pop.ids};
    });

    std::multiset<int> before;
    for (std::size_t i = 0; i < total; ++i) before.insert(static_cast<int>(i));
    std::vector<std::vector<int>> after;
    for (const auto& [transfers, ids] : results) {
      CHECK(transfers <= p - 1);
      after.push_back(ids);
    }
    for (int r = 0; r < p; ++r)
      CHECK(after[static_cast<std::size_t>(r)].size() == target[static_cast<std::size_t>(r)]);
    CHECK(multiset_of(after) == before);
  }
}

TEST_CASE("redistribute_work validates shapes and totals") {
  GroupConfig cfg;
  cfg.size = 1;
  auto results = spawn_group(cfg, [](Communicator& comm) -> int {
    ScriptedPopulation pop;
    pop.ids = {1, 2, 3};
    CHECK_THROWS_AS(redistribute_work(pop, {3}, {2, 1}, comm), std::invalid_argument);
    CHECK_THROWS_AS(redistribute_work(pop, {3}, {4}, comm), std::invalid_argument);
    CHECK(redistribute_work(pop, {3}, {3}, comm) == 0);
    return 0;
  });
  CHECK(results[0] == 0);
}

TEST_CASE("dynamic_load_balancing only redistributes above the threshold") {
  GroupConfig cfg;
  cfg.size = 2;
  // Balanced: counts [3, 3], imbalance 1.0 < 1.5 -> untouched.
  auto balanced = spawn_group(cfg, [](Communicator& comm) -> std::pair<std::vector<std::size_t>, std::size_t> {
    ScriptedPopulation pop;
    for (int i = 0; i < 3; ++i) pop.ids.push_back(comm.rank() * 10 + i);
    const auto counts = dynamic_load_balancing(pop, 1.0, comm);
    return {counts, pop.length()};
  });
  for (const auto& [counts, len] : balanced) {
    CHECK(counts == std::vector<std::size_t>{3, 3});
    CHECK(len == 3);
  }

  // Skewed: counts [8, 2], imbalance 4.0 > 1.5 -> balanced to [5, 5] under
  // equal timings; returned counts are the pre-redistribution ones.
  auto skewed = spawn_group(cfg, [](Communicator& comm) -> std::pair<std::vector<std::size_t>, std::size_t> {
    ScriptedPopulation pop;
    const int n = comm.rank() == 0 ? 8 : 2;
    for (int i = 0; i < n; ++i) pop.ids.push_back(comm.rank() * 10 + i);
    const auto counts = dynamic_load_balancing(pop, 1.0, comm);
    return {counts, pop.length()};
  });
  for (const auto& [counts, len] : skewed) {
    CHECK(counts == std::vector<std::size_t>{8, 2});
    CHECK(len == 5);
  }
}

TEST_CASE("parallel_time_integration matches serial on a deterministic population") {
  // With scripted unit markers the population never changes; the parallel
  // trace must be the rank-concatenated per-step observations.
  GroupConfig cfg;
  cfg.size = 3;
  auto results = spawn_group(cfg, [](Communicator& comm) -> std::vector<std::vector<int>> {
    std::vector<std::vector<int>> trace;
    parallel_time_integration(
        [](int my_rank, int) {
          ScriptedPopulation pop;
          pop.ids = {my_rank};
          return std::pair(pop, 2);
        },
        [](ScriptedPopulation& p) { return population_step(p); },
        [&](const std::vector<std::vector<int>>& t) { trace = t; }, comm,
        TimingPolicy::uniform);
    return trace;
  });
  REQUIRE(results[0].size() == 6);  // 3 ranks x 2 steps, rank-major
  CHECK(results[0][0] == std::vector<int>{0});
  CHECK(results[0][2] == std::vector<int>{1});
  CHECK(results[0][4] == std::vector<int>{2});
}

TEST_CASE("parallel_time_integration flags global extinction") {
  GroupConfig cfg;
  cfg.size = 2;
  CHECK_THROWS_WITH(spawn_group(cfg,
                                [](Communicator& comm) {
                                  parallel_time_integration(
                                      [](int, int) {
                                        ScriptedPopulation pop;
                                        pop.ids = {1};
                                        pop.next_markers = {0};
                                        return std::pair(pop, 3);
                                      },
                                      [](ScriptedPopulation& p) { return population_step(p); },
                                      [](const std::vector<std::vector<int>>&) {}, comm,
                                      TimingPolicy::uniform);
                                  return 0;
                                }),
                    doctest::Contains("died out at step 0"));
}
