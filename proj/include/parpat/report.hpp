#ifndef PARPAT_REPORT_HPP
#define PARPAT_REPORT_HPP

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace parpat {

/// One app execution: identity, timing and the app-specific results block.
struct RunReport {
  std::string app;
  int ranks = 1;
  std::string backend;
  std::uint64_t seed = 0;
  double elapsed_seconds = 0;        // wall time of the whole group
  std::vector<double> rank_seconds;  // per-rank wall time inside the group
  nlohmann::json results;            // app-specific payload
};

inline nlohmann::json to_json(const RunReport& r) {
  return {{"app", r.app},
          {"ranks", r.ranks},
          {"backend", r.backend},
          {"seed", r.seed},
          {"elapsed_seconds", r.elapsed_seconds},
          {"rank_seconds", r.rank_seconds},
          {"results", r.results}};
}

/// One row of a speedup table; the P=1 row is the baseline.
struct BenchRow {
  int procs = 1;
  double seconds = 0;
  double speedup = 1;
  double efficiency = 1;
};

inline nlohmann::json to_json(const std::vector<BenchRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows)
    out.push_back({{"procs", r.procs},
                   {"seconds", r.seconds},
                   {"speedup", r.speedup},
                   {"efficiency", r.efficiency}});
  return out;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string csv = "procs,seconds,speedup,efficiency\n";
  for (const auto& r : rows)
    csv += std::to_string(r.procs) + "," + std::to_string(r.seconds) + "," +
           std::to_string(r.speedup) + "," + std::to_string(r.efficiency) + "\n";
  return csv;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace parpat

#endif
