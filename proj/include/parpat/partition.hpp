#ifndef PARPAT_PARTITION_HPP
#define PARPAT_PARTITION_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parpat/comm.hpp"

namespace parpat {

/// Splits `length` equally weighted items over `num_procs` ranks: every rank
/// gets floor(length/num_procs), and the first (length mod num_procs) ranks
/// get one extra.
inline std::vector<std::size_t> simple_partitioning(std::size_t length, int num_procs) {
  if (num_procs <= 0) throw std::invalid_argument("num_procs must be positive");
  const auto p = static_cast<std::size_t>(num_procs);
  std::vector<std::size_t> sublengths(p, length / p);
  for (std::size_t i = 0; i < length % p; ++i) ++sublengths[i];
  return sublengths;
}

/// This rank's contiguous slice of the global item list.
template <class T>
std::vector<T> get_subproblem_input_args(const std::vector<T>& items, int my_rank,
                                         int num_procs) {
  if (my_rank < 0 || my_rank >= num_procs)
    throw std::invalid_argument("rank out of range: " + std::to_string(my_rank));
  const auto sub_ns = simple_partitioning(items.size(), num_procs);
  std::size_t offset = 0;
  for (int r = 0; r < my_rank; ++r) offset += sub_ns[static_cast<std::size_t>(r)];
  const auto begin = items.begin() + static_cast<std::ptrdiff_t>(offset);
  return std::vector<T>(begin,
                        begin + static_cast<std::ptrdiff_t>(sub_ns[static_cast<std::size_t>(my_rank)]));
}

/// Gathers per-rank output lists onto rank 0, concatenated in rank order.
/// Non-root ranks get an empty optional so that using a non-root result by
/// mistake fails loudly.
template <Packable T>
std::optional<std::vector<T>> collect_subproblem_output_args(const std::vector<T>& my_outputs,
                                                             Communicator& comm) {
  if (comm.rank() == 0) {
    std::vector<T> all = my_outputs;
    for (int r = 1; r < comm.size(); ++r) {
      auto part = from_payload<std::vector<T>>(comm.recv(r));
      all.insert(all.end(), std::make_move_iterator(part.begin()),
                 std::make_move_iterator(part.end()));
    }
    return all;
  }
  comm.send(0, to_payload(my_outputs));
  return std::nullopt;
}

}  // namespace parpat

#endif
