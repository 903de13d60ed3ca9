#ifndef PARPAT_APPS_DMC_HPP
#define PARPAT_APPS_DMC_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "parpat/errors.hpp"
#include "parpat/partition.hpp"
#include "parpat/population.hpp"

namespace parpat::dmc {

struct DMCConfig {
  std::size_t nwalkers = 1000;
  int nspacedim = 3;
  double stepsize = 0.1;  // imaginary-time step tau
  int timesteps = 200;
  double diffusion = 1.0;
  double burn_in_fraction = 0.2;
  double threshold_factor = 1.1;
  std::uint64_t seed = 0;
};

struct Observation {
  std::uint64_t population = 0;
  double mean_potential = 0;
  double trial_energy = 0;
  bool operator==(const Observation&) const = default;
};

inline void pack(ByteWriter& w, const Observation& o) {
  w.value(o.population);
  w.value(o.mean_potential);
  w.value(o.trial_energy);
}

inline void unpack(ByteReader& r, Observation& o) {
  o.population = r.value<std::uint64_t>();
  o.mean_potential = r.value<double>();
  o.trial_energy = r.value<double>();
}

/// Harmonic trap V(r) = r^2, summed over the walker's coordinates.
inline double harmonic_potential(const double* coords, int dim) {
  double v = 0;
  for (int k = 0; k < dim; ++k) v += coords[k] * coords[k];
  return v;
}

// Branch weights above this are clamped; clamp events are counted.
inline constexpr double kBranchWeightCap = 10.0;

/// Replication count n = floor(w + u) with the Green's-function branch
/// weight w = exp(-((V_old + V_new)/2 - E_T) * tau) clamped to [0, 10].
/// E[n] over u equals w (below the clamp).
inline int branching_factor(double v_old, double v_new, double trial_energy, double tau,
                            double u, std::size_t* clamped = nullptr) {
  double w = std::exp(-(0.5 * (v_old + v_new) - trial_energy) * tau);
  if (w > kBranchWeightCap) {
    w = kBranchWeightCap;
    if (clamped) ++*clamped;
  }
  return static_cast<int>(std::floor(w + u));
}

/// Ensemble of random walkers in a 3D (or nspacedim-D) harmonic trap,
/// implementing the generic population surface so the population drivers can
/// move, branch and migrate it.
class WalkerEnsemble {
 public:
  WalkerEnsemble(std::size_t nwalkers, const DMCConfig& cfg, std::uint64_t seed)
      : dim_(cfg.nspacedim),
        tau_(cfg.stepsize),
        diffusion_(cfg.diffusion),
        target_size_(cfg.nwalkers),
        threshold_factor_(cfg.threshold_factor),
        rng_(seed) {
    positions_.resize(nwalkers * static_cast<std::size_t>(dim_));
    markers_.assign(nwalkers, 1);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (auto& x : positions_) x = unit(rng_);
    trial_energy_ = mean_potential();
  }

  std::size_t length() const { return markers_.size(); }
  int dim() const { return dim_; }
  double trial_energy() const { return trial_energy_; }
  double threshold_factor() const { return threshold_factor_; }
  std::size_t clamp_events() const { return clamped_; }
  const std::vector<double>& positions() const { return positions_; }

  double potential(std::size_t walker) const {
    return harmonic_potential(positions_.data() + walker * static_cast<std::size_t>(dim_), dim_);
  }

  double mean_potential() const {
    if (markers_.empty()) return 0;
    double sum = 0;
    for (std::size_t i = 0; i < length(); ++i) sum += potential(i);
    return sum / static_cast<double>(length());
  }

  /// Diffusion plus branching: displace every coordinate by a Gaussian with
  /// variance 2*D*tau, then set markers from old and new potentials.
  void move() {
    const double sigma = std::sqrt(2.0 * diffusion_ * tau_);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> proposed(positions_.size());
    for (std::size_t i = 0; i < proposed.size(); ++i) proposed[i] = positions_[i] + gauss(rng_);
    for (std::size_t w = 0; w < length(); ++w) {
      const double v_old = potential(w);
      const double v_new =
          harmonic_potential(proposed.data() + w * static_cast<std::size_t>(dim_), dim_);
      markers_[w] = branching_factor(v_old, v_new, trial_energy_, tau_, uniform(rng_), &clamped_);
    }
    positions_ = std::move(proposed);
  }

  int get_marker(std::size_t walker) const { return markers_[walker]; }

  void append(std::size_t walker, int nchilds) {
    const auto* src = positions_.data() + walker * static_cast<std::size_t>(dim_);
    for (int c = 0; c < nchilds; ++c) {
      positions_.insert(positions_.end(), src, src + dim_);
      markers_.push_back(1);
      src = positions_.data() + walker * static_cast<std::size_t>(dim_);  // vector may reallocate
    }
  }

  void remove(std::size_t walker) {
    const auto begin = positions_.begin() + static_cast<std::ptrdiff_t>(walker * static_cast<std::size_t>(dim_));
    positions_.erase(begin, begin + dim_);
    markers_.erase(markers_.begin() + static_cast<std::ptrdiff_t>(walker));
  }

  Observation sample_observables() const {
    return {static_cast<std::uint64_t>(length()), mean_potential(), trial_energy_};
  }

  /// Population control: steer E_T so the global population tracks the
  /// target, E_T += (kappa/tau) * ln(target / new_global) with kappa = 0.1.
  void finalize_timestep(std::size_t /*old_global*/, std::size_t new_global) {
    if (new_global == 0) throw ExtinctionError("walker population died out");
    constexpr double kappa = 0.1;
    trial_energy_ += (kappa / tau_) *
                     std::log(static_cast<double>(target_size_) / static_cast<double>(new_global));
  }

  Payload cut_slice(std::size_t k) {
    if (k > length()) throw std::invalid_argument("cut_slice: index beyond population");
    ByteWriter w;
    w.value<std::uint64_t>(length() - k);
    for (std::size_t i = k; i < length(); ++i) {
      w.raw(positions_.data() + i * static_cast<std::size_t>(dim_),
            sizeof(double) * static_cast<std::size_t>(dim_));
      w.value<std::int32_t>(markers_[i]);
    }
    positions_.resize(k * static_cast<std::size_t>(dim_));
    markers_.resize(k);
    return w.take();
  }

  void paste_slice(const Payload& slice) {
    ByteReader r(slice);
    const auto count = r.value<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
      double coords[16];
      r.raw(coords, sizeof(double) * static_cast<std::size_t>(dim_));
      positions_.insert(positions_.end(), coords, coords + dim_);
      markers_.push_back(r.value<std::int32_t>());
    }
    r.expect_end();
  }

 private:
  int dim_;
  double tau_;
  double diffusion_;
  double trial_energy_ = 0;
  std::size_t target_size_;
  double threshold_factor_;
  std::vector<double> positions_;
  std::vector<int> markers_;
  std::mt19937_64 rng_;
  std::size_t clamped_ = 0;
};

static_assert(Population<WalkerEnsemble>);

/// Local ensemble for one rank: walker counts from simple_partitioning,
/// initial positions standard normal, E_T at the local initial mean
/// potential.
inline WalkerEnsemble dmc_initialize(int my_rank, int num_procs, const DMCConfig& cfg) {
  if (cfg.nspacedim < 1 || cfg.nspacedim > 16)
    throw std::invalid_argument("nspacedim must be in [1, 16]");
  const auto per_proc = simple_partitioning(cfg.nwalkers, num_procs);
  return WalkerEnsemble(per_proc[static_cast<std::size_t>(my_rank)], cfg,
                        cfg.seed + static_cast<std::uint64_t>(my_rank));
}

struct EnergyEstimate {
  double value = 0;
  double std_error = 0;
};

inline void pack(ByteWriter& w, const EnergyEstimate& e) {
  w.value(e.value);
  w.value(e.std_error);
}

inline void unpack(ByteReader& r, EnergyEstimate& e) {
  e.value = r.value<double>();
  e.std_error = r.value<double>();
}

/// Population-weighted mean of <V> over the post-burn-in trace; standard
/// error from 20 blocks of the same weighted estimator.
inline EnergyEstimate dmc_energy_estimate(const std::vector<Observation>& trace,
                                          std::size_t burn_in) {
  constexpr std::size_t nblocks = 20;
  if (trace.size() < burn_in + nblocks)
    throw std::invalid_argument("trace too short for burn-in plus blocking");
  const std::size_t n = trace.size() - burn_in;

  double wsum = 0, vsum = 0;
  for (std::size_t i = burn_in; i < trace.size(); ++i) {
    const double w = static_cast<double>(trace[i].population);
    wsum += w;
    vsum += w * trace[i].mean_potential;
  }
  EnergyEstimate est;
  est.value = vsum / wsum;

  std::vector<double> block_means;
  block_means.reserve(nblocks);
  for (std::size_t b = 0; b < nblocks; ++b) {
    const std::size_t lo = burn_in + b * n / nblocks;
    const std::size_t hi = burn_in + (b + 1) * n / nblocks;
    double bw = 0, bv = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double w = static_cast<double>(trace[i].population);
      bw += w;
      bv += w * trace[i].mean_potential;
    }
    block_means.push_back(bv / bw);
  }
  double mean = 0;
  for (double b : block_means) mean += b;
  mean /= static_cast<double>(nblocks);
  double var = 0;
  for (double b : block_means) var += (b - mean) * (b - mean);
  var /= static_cast<double>(nblocks - 1);
  est.std_error = std::sqrt(var / static_cast<double>(nblocks));
  return est;
}

struct DMCRun {
  std::vector<Observation> trace;  // global per-step observations
  EnergyEstimate estimate;
  std::vector<std::vector<std::size_t>> counts_per_step;  // per-rank counts (parallel runs)
};

inline std::size_t default_burn_in(const DMCConfig& cfg) {
  return static_cast<std::size_t>(cfg.burn_in_fraction * cfg.timesteps);
}

inline DMCRun run_dmc_serial(const DMCConfig& cfg) {
  DMCRun run;
  time_integration(
      [&] { return std::pair(dmc_initialize(0, 1, cfg), cfg.timesteps); },
      [](WalkerEnsemble& w) { return do_timestep(w); },
      [&](const std::vector<Observation>& trace) { run.trace = trace; });
  run.estimate = dmc_energy_estimate(run.trace, default_burn_in(cfg));
  return run;
}

/// Combines rank-concatenated traces into one global per-step trace: sizes
/// add, <V> is population weighted, E_T is taken from rank 0.
inline std::vector<Observation> combine_traces(const std::vector<Observation>& concatenated,
                                               int num_procs, int timesteps) {
  const auto steps = static_cast<std::size_t>(timesteps);
  if (concatenated.size() != steps * static_cast<std::size_t>(num_procs))
    throw std::invalid_argument("combine_traces: unexpected trace length");
  std::vector<Observation> global(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    std::uint64_t pop = 0;
    double vsum = 0;
    for (int r = 0; r < num_procs; ++r) {
      const auto& o = concatenated[static_cast<std::size_t>(r) * steps + s];
      pop += o.population;
      vsum += static_cast<double>(o.population) * o.mean_potential;
    }
    global[s] = {pop, pop > 0 ? vsum / static_cast<double>(pop) : 0.0,
                 concatenated[s].trial_energy};
  }
  return global;
}

/// Parallel run; the returned trace and estimate are filled on rank 0 only.
inline DMCRun run_dmc_parallel(const DMCConfig& cfg, Communicator& comm,
                               TimingPolicy timing = TimingPolicy::wall_clock) {
  DMCRun run;
  parallel_time_integration(
      [&](int my_rank, int num_procs) {
        return std::pair(dmc_initialize(my_rank, num_procs, cfg), cfg.timesteps);
      },
      [](WalkerEnsemble& w) { return population_step(w); },
      [&](const std::vector<Observation>& concatenated) {
        run.trace = combine_traces(concatenated, comm.size(), cfg.timesteps);
        run.estimate = dmc_energy_estimate(run.trace, default_burn_in(cfg));
      },
      comm, timing, &run.counts_per_step);
  return run;
}

}  // namespace parpat::dmc

#endif
