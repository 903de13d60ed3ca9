#ifndef PARPAT_POPULATION_HPP
#define PARPAT_POPULATION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "parpat/errors.hpp"
#include "parpat/partition.hpp"

namespace parpat {

/// Required surface of any dynamic walker population. cut_slice(k) removes
/// the walkers with index >= k and serializes them; paste_slice restores them
/// bit-exactly on another rank.
template <class P>
concept Population = requires(P& p, const P& cp, std::size_t i, int nchilds, const Payload& s) {
  p.move();
  { cp.get_marker(i) } -> std::convertible_to<int>;
  p.append(i, nchilds);
  p.remove(i);
  p.sample_observables();
  p.finalize_timestep(std::size_t{}, std::size_t{});
  { cp.length() } -> std::convertible_to<std::size_t>;
  { p.cut_slice(i) } -> std::convertible_to<Payload>;
  p.paste_slice(s);
  { cp.threshold_factor() } -> std::convertible_to<double>;
};

// One step without the extinction check, for parallel drivers whose local
// population may legitimately be empty. Walkers are visited in reverse index
// order so that removals do not invalidate the indices still to be visited.
template <Population P>
auto population_step(P& pop) {
  pop.move();
  for (std::size_t i = pop.length(); i-- > 0;) {
    const int marker = pop.get_marker(i);
    if (marker == 0)
      pop.remove(i);
    else if (marker > 1)
      pop.append(i, marker - 1);
  }
  return pop.sample_observables();
}

/// Moves the population, removes walkers with marker 0 and clones walkers
/// with marker n >= 2 into n total copies, then samples observables.
template <Population P>
auto do_timestep(P& pop) {
  auto obs = population_step(pop);
  if (pop.length() == 0) throw ExtinctionError("population died out in do_timestep");
  return obs;
}

/// Serial time loop: run `timesteps` steps and hand the observation trace to
/// `finalize`. `initialize` returns (population, timesteps).
template <class Init, class Step, class Finalize>
void time_integration(Init&& initialize, Step&& step, Finalize&& finalize) {
  auto [walkers, timesteps] = initialize();
  using Obs = decltype(step(walkers));
  std::vector<Obs> output;
  output.reserve(static_cast<std::size_t>(timesteps));
  for (int i = 0; i < timesteps; ++i) {
    const std::size_t old_len = walkers.length();
    output.push_back(step(walkers));
    walkers.finalize_timestep(old_len, walkers.length());
  }
  finalize(output);
}

/// max(counts) / max(1, min(counts)); >= 1, and == 1 iff perfectly balanced
/// (with a nonempty minimum).
inline double imbalance_rate(const std::vector<std::size_t>& counts) {
  if (counts.empty()) throw std::invalid_argument("imbalance_rate: empty workload vector");
  const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
  return static_cast<double>(*mx) / static_cast<double>(std::max<std::size_t>(1, *mn));
}

/// Ideal per-rank workload from last-step timings: target_i = C / t_i with
/// C = total / sum(1/t_i), made integral by floor plus largest-remainder
/// top-up (ties broken by lowest rank). The total is always preserved.
inline std::vector<std::size_t> find_optimal_workload(const std::vector<double>& timings,
                                                      const std::vector<std::size_t>& current) {
  if (timings.size() != current.size())
    throw std::invalid_argument("find_optimal_workload: size mismatch");
  for (double t : timings)
    if (!(t > 0.0)) throw std::invalid_argument("find_optimal_workload: non-positive timing");

  const std::size_t total = std::accumulate(current.begin(), current.end(), std::size_t{0});
  double inv_sum = 0.0;
  for (double t : timings) inv_sum += 1.0 / t;
  const double c = static_cast<double>(total) / inv_sum;

  std::vector<std::size_t> work(timings.size());
  std::vector<double> remainders(timings.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < timings.size(); ++i) {
    const double raw = c / timings[i];
    work[i] = static_cast<std::size_t>(std::floor(raw));
    remainders[i] = raw - static_cast<double>(work[i]);
    assigned += work[i];
  }
  while (assigned < total) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < remainders.size(); ++i)
      if (remainders[i] > remainders[arg]) arg = i;
    ++work[arg];
    remainders[arg] = 0.0;
    ++assigned;
  }
  return work;
}

/// Moves walkers from the rank with the largest surplus to the rank with the
/// largest deficit until every rank holds its target count. Conserves the
/// global walker multiset and needs at most num_ranks - 1 transfers; returns
/// the number performed. Collective call.
template <Population P>
int redistribute_work(P& pop, const std::vector<std::size_t>& current,
                      const std::vector<std::size_t>& target, Communicator& comm) {
  const std::size_t n = current.size();
  if (target.size() != n) throw std::invalid_argument("redistribute_work: size mismatch");
  std::vector<long long> diff(n);
  for (std::size_t i = 0; i < n; ++i)
    diff[i] = static_cast<long long>(current[i]) - static_cast<long long>(target[i]);
  if (std::accumulate(diff.begin(), diff.end(), 0LL) != 0)
    throw std::invalid_argument("redistribute_work: totals differ");

  const int my_rank = comm.rank();
  int transfers = 0;
  while (true) {
    std::size_t rank_max = 0, rank_min = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (diff[i] > diff[rank_max]) rank_max = i;
      if (diff[i] < diff[rank_min]) rank_min = i;
    }
    if (diff[rank_max] == 0) break;
    if (transfers >= static_cast<int>(n))
      throw CommError("redistribute_work failed to terminate");

    const long long amount = diff[rank_max];
    if (my_rank == static_cast<int>(rank_max)) {
      if (pop.length() < static_cast<std::size_t>(amount))
        throw CommError("redistribute_work: local population smaller than its surplus");
      const std::size_t keep = pop.length() - static_cast<std::size_t>(amount);
      comm.send(static_cast<int>(rank_min), pop.cut_slice(keep));
    } else if (my_rank == static_cast<int>(rank_min)) {
      pop.paste_slice(comm.recv(static_cast<int>(rank_max)));
    }
    diff[rank_min] += diff[rank_max];
    diff[rank_max] = 0;
    ++transfers;
  }
  return transfers;
}

/// Gathers per-rank walker counts; if the imbalance exceeds the population's
/// threshold factor, gathers last-step timings, computes the ideal workload
/// and redistributes. Returns the pre-redistribution counts, whose sum is the
/// global population size.
template <Population P>
std::vector<std::size_t> dynamic_load_balancing(P& pop, double task_time, Communicator& comm) {
  const auto gathered = comm.all_gather(to_payload(static_cast<std::uint64_t>(pop.length())));
  std::vector<std::size_t> counts(gathered.size());
  for (std::size_t i = 0; i < gathered.size(); ++i)
    counts[i] = static_cast<std::size_t>(from_payload<std::uint64_t>(gathered[i]));

  if (imbalance_rate(counts) > pop.threshold_factor()) {
    const auto timed = comm.all_gather(to_payload(task_time));
    std::vector<double> timings(timed.size());
    for (std::size_t i = 0; i < timed.size(); ++i) timings[i] = from_payload<double>(timed[i]);
    const auto target = find_optimal_workload(timings, counts);
    redistribute_work(pop, counts, target, comm);
  }
  return counts;
}

/// How the per-step task time fed to dynamic_load_balancing is obtained.
/// wall_clock follows measured time; uniform assumes equal per-step cost on
/// every rank, which keeps parallel runs bit-reproducible.
enum class TimingPolicy { wall_clock, uniform };

/// Parallel time loop. `initialize(my_rank, num_procs)` returns the local
/// population and the (rank-identical) number of timesteps. Each step is
/// timed, load balancing runs collectively, and finalize_timestep sees the
/// global population sizes. Rank 0 receives the rank-concatenated traces.
template <class Init, class Step, class Finalize>
void parallel_time_integration(Init&& initialize, Step&& step, Finalize&& finalize,
                               Communicator& comm,
                               TimingPolicy timing = TimingPolicy::wall_clock,
                               std::vector<std::vector<std::size_t>>* counts_history = nullptr) {
  auto [walkers, timesteps] = initialize(comm.rank(), comm.size());
  using Obs = decltype(step(walkers));

  const auto initial = comm.all_gather(to_payload(static_cast<std::uint64_t>(walkers.length())));
  std::size_t old_global = 0;
  for (const auto& p : initial) old_global += from_payload<std::uint64_t>(p);

  std::vector<Obs> my_output;
  my_output.reserve(static_cast<std::size_t>(timesteps));
  for (int i = 0; i < timesteps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    my_output.push_back(step(walkers));
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double task_time = timing == TimingPolicy::wall_clock ? std::max(elapsed, 1e-9) : 1.0;

    const auto counts = dynamic_load_balancing(walkers, task_time, comm);
    if (counts_history) counts_history->push_back(counts);
    const std::size_t new_global = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (new_global == 0)
      throw ExtinctionError("global population died out at step " + std::to_string(i));
    walkers.finalize_timestep(old_global, new_global);
    old_global = new_global;
  }

  auto output = collect_subproblem_output_args(my_output, comm);
  if (comm.rank() == 0) finalize(*output);
}

}  // namespace parpat

#endif
