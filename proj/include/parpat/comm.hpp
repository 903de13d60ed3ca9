#ifndef PARPAT_COMM_HPP
#define PARPAT_COMM_HPP

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "parpat/errors.hpp"
#include "parpat/payload.hpp"

namespace parpat {

enum class Backend { threads, sockets };

inline const char* backend_name(Backend b) {
  return b == Backend::threads ? "threads" : "sockets";
}

struct GroupConfig {
  int size = 1;
  Backend backend = Backend::threads;
  std::uint64_t base_seed = 0;
  /// Sockets backend: receive/accept timeout. The threads backend detects
  /// stuck groups directly and ignores this.
  double timeout_seconds = 30.0;
};

/// Rank-addressed message-passing handle. One handle per rank; point-to-point
/// delivery is FIFO per (source, dest) pair and bit-exact. Collectives are
/// built on top of point-to-point (gather to rank 0, then broadcast).
class Communicator {
 public:
  virtual ~Communicator() = default;

  int rank() const { return rank_; }
  int size() const { return size_; }
  std::uint64_t base_seed() const { return base_seed_; }

  /// Per-rank RNG stream seed.
  std::uint64_t rng_seed() const { return base_seed_ + static_cast<std::uint64_t>(rank_); }

  virtual void send(int dest, const Payload& payload) = 0;
  virtual Payload recv(int source) = 0;

  std::vector<Payload> all_gather(const Payload& payload) {
    std::vector<Payload> all;
    if (rank_ == 0) {
      all.resize(static_cast<std::size_t>(size_));
      all[0] = payload;
      for (int r = 1; r < size_; ++r) all[static_cast<std::size_t>(r)] = recv(r);
      const Payload combined = to_payload(all);
      for (int r = 1; r < size_; ++r) send(r, combined);
    } else {
      send(0, payload);
      all = from_payload<std::vector<Payload>>(recv(0));
    }
    return all;
  }

  Payload broadcast(const Payload& payload, int root) {
    check_rank(root, "broadcast root");
    if (rank_ == root) {
      for (int r = 0; r < size_; ++r)
        if (r != root) send(r, payload);
      return payload;
    }
    return recv(root);
  }

  double all_reduce_max(double x) {
    const auto parts = all_gather(to_payload(x));
    double m = from_payload<double>(parts[0]);
    for (std::size_t i = 1; i < parts.size(); ++i) m = std::max(m, from_payload<double>(parts[i]));
    return m;
  }

  void barrier() { (void)all_gather(Payload{}); }

 protected:
  Communicator(int rank, int size, std::uint64_t base_seed)
      : rank_(rank), size_(size), base_seed_(base_seed) {}

  void check_rank(int r, const char* what) const {
    if (r < 0 || r >= size_)
      throw CommError(std::string(what) + " out of range: " + std::to_string(r) + " (group size " +
                      std::to_string(size_) + ")");
  }

  int rank_;
  int size_;
  std::uint64_t base_seed_;
};

}  // namespace parpat

#endif
