#ifndef PARPAT_TASKMAP_HPP
#define PARPAT_TASKMAP_HPP

#include <string>
#include <vector>

#include "parpat/errors.hpp"
#include "parpat/partition.hpp"

namespace parpat {

/// Serial driver for the initialize -> map(task) -> finalize pattern.
/// `finalize` receives outputs in the same order as the inputs.
template <class Init, class Task, class Finalize>
void solve_problem(Init&& initialize, Task&& task, Finalize&& finalize) {
  auto inputs = initialize();
  using Out = decltype(task(inputs.front()));
  std::vector<Out> outputs;
  outputs.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    try {
      outputs.push_back(task(inputs[i]));
    } catch (const std::exception& e) {
      throw TaskError("task " + std::to_string(i) + " failed: " + e.what());
    }
  }
  finalize(outputs);
}

/// Parallel driver. `initialize` must be deterministic: it runs on every rank
/// and each rank takes its own contiguous slice of the identical input list.
/// Only rank 0 runs `finalize`, with the exact serial output order.
template <class Init, class Task, class Finalize>
void parallel_solve_problem(Init&& initialize, Task&& task, Finalize&& finalize,
                            Communicator& comm) {
  auto inputs = initialize();
  using Out = decltype(task(inputs.front()));
  const auto my_inputs = get_subproblem_input_args(inputs, comm.rank(), comm.size());

  std::size_t offset = 0;
  {
    const auto sub_ns = simple_partitioning(inputs.size(), comm.size());
    for (int r = 0; r < comm.rank(); ++r) offset += sub_ns[static_cast<std::size_t>(r)];
  }

  std::vector<Out> my_outputs;
  my_outputs.reserve(my_inputs.size());
  for (std::size_t i = 0; i < my_inputs.size(); ++i) {
    try {
      my_outputs.push_back(task(my_inputs[i]));
    } catch (const std::exception& e) {
      throw TaskError("rank " + std::to_string(comm.rank()) + ": task " +
                      std::to_string(offset + i) + " failed: " + e.what());
    }
  }

  auto outputs = collect_subproblem_output_args(my_outputs, comm);
  if (comm.rank() == 0) finalize(*outputs);
}

}  // namespace parpat

#endif
