#ifndef PARPAT_SPAWN_HPP
#define PARPAT_SPAWN_HPP

#include <stdexcept>
#include <type_traits>

#include "parpat/comm.hpp"
#include "parpat/comm_sockets.hpp"
#include "parpat/comm_threads.hpp"

namespace parpat {

/// Runs `entry` once per rank with a live communicator and returns the
/// per-rank results ordered by rank. Any rank's failure aborts the group
/// with a GroupError naming the failing rank.
template <class F>
auto spawn_group(const GroupConfig& cfg, F&& entry)
    -> std::vector<std::invoke_result_t<F&, Communicator&>> {
  using R = std::invoke_result_t<F&, Communicator&>;
  static_assert(Packable<R>, "group entry result must be payload-serializable");
  if (cfg.size < 1) throw std::invalid_argument("group size must be >= 1");
  switch (cfg.backend) {
    case Backend::threads:
      return detail::run_thread_group<R>(cfg, entry);
    case Backend::sockets:
      return detail::run_socket_group<R>(cfg, entry);
  }
  throw std::invalid_argument("unknown backend");
}

}  // namespace parpat

#endif
