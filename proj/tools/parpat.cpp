// Command-line front end: run the demo apps under a process/thread group and
// emit JSON (and CSV, for benchmarks) reports.

#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "parpat/apps/dmc.hpp"
#include "parpat/apps/idealpoint.hpp"
#include "parpat/apps/parabola.hpp"
#include "parpat/apps/poisson.hpp"
#include "parpat/report.hpp"
#include "parpat/spawn.hpp"

namespace {

using parpat::Backend;
using parpat::Communicator;
using parpat::GroupConfig;
using parpat::Payload;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct CommonOpts {
  int procs = 1;
  std::string backend = "threads";
  std::uint64_t seed = 0;
  std::string out;
};

struct ParabolaOpts {
  int m = 100, n = 50;
  double L = 10;
};

struct IdealpointOpts {
  int legislators = 50, votes = 200, iters = 2000, burnin = 500, chains = 4;
};

struct DmcOpts {
  int walkers = 1000, steps = 200;
  double tau = 0.1, D = 1.0;
};

struct PoissonOpts {
  int nx = 63, ny = -1, overlap = 4, max_iter = 200;
  double threshold = 1e-10;
};

struct SleepOpts {
  int tasks = 1000;
  double task_ms = 10;
};

struct AppOpts {
  ParabolaOpts parabola;
  IdealpointOpts idealpoint;
  DmcOpts dmc;
  PoissonOpts poisson;
  SleepOpts sleep;
};

GroupConfig group_config(const CommonOpts& c) {
  GroupConfig cfg;
  cfg.size = c.procs;
  cfg.backend = c.backend == "sockets" ? Backend::sockets : Backend::threads;
  cfg.base_seed = c.seed;
  return cfg;
}

std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

// Every group entry returns (wall seconds, rank-0 result payload).
using Entry = std::pair<double, Payload>;

parpat::RunReport run_app(const std::string& app, const CommonOpts& common, const AppOpts& opts) {
  parpat::RunReport report;
  report.app = app;
  report.ranks = common.procs;
  report.backend = common.backend;
  report.seed = common.seed;
  const auto cfg = group_config(common);

  std::vector<Entry> per_rank;
  const auto t0 = std::chrono::steady_clock::now();

  if (app == "parabola") {
    const parpat::parabola::ParabolaConfig pc{opts.parabola.m, opts.parabola.n, opts.parabola.L};
    per_rank = parpat::spawn_group(cfg, [&](Communicator& comm) -> Entry {
      const auto r0 = std::chrono::steady_clock::now();
      const auto result = parpat::parabola::run_parabola(pc, &comm);
      Payload out;
      if (comm.rank() == 0) {
        parpat::ByteWriter w;
        w.value<std::uint64_t>(result.outputs.size());
        w.value<std::uint64_t>(result.ab.size());
        w.value<std::uint64_t>(
            fnv1a(reinterpret_cast<const std::uint8_t*>(result.outputs.data()),
                  result.outputs.size() * sizeof(double)));
        out = w.take();
      }
      return {seconds_since(r0), out};
    });
    report.elapsed_seconds = seconds_since(t0);
    parpat::ByteReader r(per_rank[0].second);
    report.results = {{"tasks", r.value<std::uint64_t>()},
                      {"flagged", r.value<std::uint64_t>()},
                      {"output_hash", r.value<std::uint64_t>()}};
  } else if (app == "idealpoint") {
    const auto& io = opts.idealpoint;
    const auto data = parpat::idealpoint::generate_synthetic(io.legislators, io.votes, 1,
                                                             common.seed);
    parpat::idealpoint::GibbsConfig gc;
    gc.iterations = io.iters;
    gc.burn_in = io.burnin;
    gc.seed = common.seed + 1000;
    const int chains = io.chains;
    per_rank = parpat::spawn_group(cfg, [&](Communicator& comm) -> Entry {
      const auto r0 = std::chrono::steady_clock::now();
      const auto summaries = parpat::idealpoint::run_multichain(data.votes, gc, chains, comm);
      Payload out;
      if (comm.rank() == 0) {
        std::vector<double> truth(data.true_x.data(), data.true_x.data() + data.true_x.size());
        std::vector<double> spearman;
        for (const auto& s : summaries)
          spearman.push_back(parpat::idealpoint::spearman_abs(s.x_mean, truth));
        out = parpat::to_payload(spearman);
      }
      return {seconds_since(r0), out};
    });
    report.elapsed_seconds = seconds_since(t0);
    const auto spearman = parpat::from_payload<std::vector<double>>(per_rank[0].second);
    report.results = {{"chains", chains},
                      {"spearman_vs_truth", spearman},
                      {"iterations", io.iters},
                      {"burn_in", io.burnin}};
  } else if (app == "dmc") {
    parpat::dmc::DMCConfig dc;
    dc.nwalkers = static_cast<std::size_t>(opts.dmc.walkers);
    dc.timesteps = opts.dmc.steps;
    dc.stepsize = opts.dmc.tau;
    dc.diffusion = opts.dmc.D;
    dc.seed = common.seed;
    per_rank = parpat::spawn_group(cfg, [&](Communicator& comm) -> Entry {
      const auto r0 = std::chrono::steady_clock::now();
      const auto run = comm.size() == 1 ? parpat::dmc::run_dmc_serial(dc)
                                        : parpat::dmc::run_dmc_parallel(dc, comm);
      Payload out;
      if (comm.rank() == 0) {
        parpat::ByteWriter w;
        w.value(run.estimate.value);
        w.value(run.estimate.std_error);
        w.value<std::uint64_t>(run.trace.back().population);
        w.value(run.trace.back().trial_energy);
        out = w.take();
      }
      return {seconds_since(r0), out};
    });
    report.elapsed_seconds = seconds_since(t0);
    parpat::ByteReader r(per_rank[0].second);
    const double energy = r.value<double>();
    const double se = r.value<double>();
    const auto final_pop = r.value<std::uint64_t>();
    const double et = r.value<double>();
    report.results = {{"energy", energy},
                      {"std_error", se},
                      {"final_population", final_pop},
                      {"final_trial_energy", et},
                      {"initial_counts",
                       parpat::simple_partitioning(dc.nwalkers, common.procs)}};
  } else if (app == "poisson") {
    const auto& po = opts.poisson;
    const int ny = po.ny > 0 ? po.ny : po.nx;
    per_rank = parpat::spawn_group(cfg, [&](Communicator& comm) -> Entry {
      const auto r0 = std::chrono::steady_clock::now();
      const auto rep = parpat::poisson::run_poisson_demo(po.nx, ny, po.overlap, po.threshold,
                                                         po.max_iter, comm);
      Payload out;
      if (comm.rank() == 0) {
        parpat::ByteWriter w;
        w.value<std::int32_t>(rep.iterations);
        w.value<std::uint8_t>(rep.converged ? 1 : 0);
        w.value(rep.rel_change);
        w.value(rep.max_error);
        out = w.take();
      }
      return {seconds_since(r0), out};
    });
    report.elapsed_seconds = seconds_since(t0);
    parpat::ByteReader r(per_rank[0].second);
    const int iterations = r.value<std::int32_t>();
    const bool converged = r.value<std::uint8_t>() != 0;
    const double rel_change = r.value<double>();
    const double max_error = r.value<double>();
    report.results = {{"iterations", iterations}, {"converged", converged},
                      {"rel_change", rel_change}, {"max_error", max_error},
                      {"overlap", po.overlap},   {"nx", po.nx},
                      {"ny", ny}};
  } else if (app == "sleep") {
    const auto& so = opts.sleep;
    per_rank = parpat::spawn_group(cfg, [&](Communicator& comm) -> Entry {
      const auto r0 = std::chrono::steady_clock::now();
      int done = 0;
      parpat::parallel_solve_problem(
          [&] { return std::vector<int>(static_cast<std::size_t>(so.tasks), 0); },
          [&](int) {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(so.task_ms));
            return 1;
          },
          [&](const std::vector<int>& outs) {
            for (int x : outs) done += x;
          },
          comm);
      Payload out;
      if (comm.rank() == 0) out = parpat::to_payload(done);
      return {seconds_since(r0), out};
    });
    report.elapsed_seconds = seconds_since(t0);
    report.results = {{"tasks", so.tasks},
                      {"task_ms", so.task_ms},
                      {"completed", parpat::from_payload<int>(per_rank[0].second)}};
  } else {
    throw std::invalid_argument("unknown app: " + app);
  }

  for (const auto& [wall, payload] : per_rank) report.rank_seconds.push_back(wall);
  return report;
}

std::vector<int> parse_procs_list(const std::string& csv) {
  std::vector<int> procs;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) procs.push_back(std::stoi(tok));
  if (procs.empty() || procs.front() != 1)
    throw CLI::ValidationError("--procs-list must start at 1");
  for (std::size_t i = 1; i < procs.size(); ++i)
    if (procs[i] <= procs[i - 1]) throw CLI::ValidationError("--procs-list must be ascending");
  return procs;
}

void add_app_flags(CLI::App* cmd, AppOpts& opts) {
  cmd->add_option("--m", opts.parabola.m, "parabola: grid points per parameter axis");
  cmd->add_option("--n", opts.parabola.n, "parabola: x samples");
  cmd->add_option("--L", opts.parabola.L, "parabola: interval length");
  cmd->add_option("--legislators", opts.idealpoint.legislators, "idealpoint: legislators");
  cmd->add_option("--votes", opts.idealpoint.votes, "idealpoint: votes");
  cmd->add_option("--iters", opts.idealpoint.iters, "idealpoint: Gibbs iterations");
  cmd->add_option("--burnin", opts.idealpoint.burnin, "idealpoint: burn-in iterations");
  cmd->add_option("--chains", opts.idealpoint.chains, "idealpoint: chains");
  cmd->add_option("--walkers", opts.dmc.walkers, "dmc: target walker count");
  cmd->add_option("--steps", opts.dmc.steps, "dmc: timesteps");
  cmd->add_option("--tau", opts.dmc.tau, "dmc: imaginary-time step");
  cmd->add_option("--D", opts.dmc.D, "dmc: diffusion constant");
  cmd->add_option("--nx", opts.poisson.nx, "poisson: interior points per axis");
  cmd->add_option("--ny", opts.poisson.ny, "poisson: interior rows (default nx)");
  cmd->add_option("--overlap", opts.poisson.overlap, "poisson: strip overlap");
  cmd->add_option("--threshold", opts.poisson.threshold, "poisson: convergence threshold");
  cmd->add_option("--max-iter", opts.poisson.max_iter, "poisson: Schwarz iteration cap");
  cmd->add_option("--tasks", opts.sleep.tasks, "sleep: task count");
  cmd->add_option("--task-ms", opts.sleep.task_ms, "sleep: per-task duration (ms)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"parallel-patterns demo runner"};
  cli.require_subcommand(1);

  CommonOpts common;
  AppOpts opts;
  std::string app;
  std::string procs_list = "1,2,4";

  auto* run = cli.add_subcommand("run", "run one app and write a JSON report");
  run->add_option("app", app, "parabola|idealpoint|dmc|poisson|sleep")->required();
  run->add_option("--procs", common.procs, "group size")->check(CLI::PositiveNumber);
  run->add_option("--backend", common.backend)->check(CLI::IsMember({"threads", "sockets"}));
  run->add_option("--seed", common.seed, "base RNG seed");
  run->add_option("--out", common.out, "report file (JSON)");
  add_app_flags(run, opts);

  auto* bench = cli.add_subcommand("bench", "speedup table over a list of group sizes");
  bench->add_option("app", app, "parabola|idealpoint|dmc|poisson|sleep")->required();
  bench->add_option("--procs-list", procs_list, "ascending, starting at 1 (e.g. 1,2,4)");
  bench->add_option("--backend", common.backend)->check(CLI::IsMember({"threads", "sockets"}));
  bench->add_option("--seed", common.seed, "base RNG seed");
  bench->add_option("--out", common.out, "report file (JSON); CSV written next to it");
  add_app_flags(bench, opts);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nlohmann::json out_json;
    if (run->parsed()) {
      const auto report = run_app(app, common, opts);
      out_json = to_json(report);
    } else {
      std::vector<parpat::BenchRow> rows;
      nlohmann::json runs = nlohmann::json::array();
      double t1 = 0;
      for (int p : parse_procs_list(procs_list)) {
        CommonOpts c = common;
        c.procs = p;
        const auto report = run_app(app, c, opts);
        if (p == 1) t1 = report.elapsed_seconds;
        parpat::BenchRow row;
        row.procs = p;
        row.seconds = report.elapsed_seconds;
        row.speedup = t1 / report.elapsed_seconds;
        row.efficiency = row.speedup / p;
        rows.push_back(row);
        runs.push_back(to_json(report));
      }
      out_json = {{"app", app}, {"backend", common.backend}, {"seed", common.seed},
                  {"table", to_json(rows)}, {"runs", runs}};
      if (!common.out.empty())
        parpat::write_text_file(common.out + ".csv", parpat::bench_csv(rows));
      else
        std::cout << parpat::bench_csv(rows);
    }
    if (!common.out.empty())
      parpat::write_text_file(common.out, out_json.dump(2) + "\n");
    else
      std::cout << out_json.dump(2) << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
