#ifndef PARPAT_ERRORS_HPP
#define PARPAT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace parpat {

struct CommError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A rank's failure aborts the whole group; the message names the rank.
struct GroupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TaskError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExtinctionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace parpat

#endif
