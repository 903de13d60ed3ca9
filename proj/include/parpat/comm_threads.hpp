#ifndef PARPAT_COMM_THREADS_HPP
#define PARPAT_COMM_THREADS_HPP

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "parpat/comm.hpp"

namespace parpat {
namespace detail {

// Shared state of an in-process group. One global mutex guards all queues,
// which makes the stuck-group check exact: if every unfinished rank waits on
// an empty queue while the lock is held, no progress is possible.
struct ThreadGroupState {
  explicit ThreadGroupState(int n)
      : size(n), queues(static_cast<std::size_t>(n) * static_cast<std::size_t>(n)),
        wait_src(static_cast<std::size_t>(n), -1) {}

  std::deque<Payload>& queue(int src, int dst) {
    return queues[static_cast<std::size_t>(src) * static_cast<std::size_t>(size) +
                  static_cast<std::size_t>(dst)];
  }

  // Call with the mutex held.
  bool stuck() const {
    int waiting = 0;
    for (int r = 0; r < size; ++r)
      if (wait_src[static_cast<std::size_t>(r)] >= 0) ++waiting;
    if (waiting == 0 || waiting + finished < size) return false;
    for (int r = 0; r < size; ++r) {
      const int src = wait_src[static_cast<std::size_t>(r)];
      if (src < 0) continue;
      if (!queues[static_cast<std::size_t>(src) * static_cast<std::size_t>(size) +
                  static_cast<std::size_t>(r)]
               .empty())
        return false;
    }
    return true;
  }

  // Call with the mutex held, after stuck() returned true.
  std::string stuck_message() const {
    std::ostringstream os;
    os << (finished > 0 ? "group shutdown" : "deadlock") << ": rank(s)";
    for (int r = 0; r < size; ++r)
      if (wait_src[static_cast<std::size_t>(r)] >= 0)
        os << " " << r << " (blocked in recv(" << wait_src[static_cast<std::size_t>(r)] << "))";
    os << " cannot make progress";
    return os.str();
  }

  void fail(std::string msg) {
    if (!failed) {
      failed = true;
      fail_msg = std::move(msg);
    }
  }

  const int size;
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::deque<Payload>> queues;
  std::vector<int> wait_src;  // -1 while not blocked in recv
  int finished = 0;
  bool failed = false;
  std::string fail_msg;
};

class ThreadCommunicator final : public Communicator {
 public:
  ThreadCommunicator(std::shared_ptr<ThreadGroupState> st, int rank, const GroupConfig& cfg)
      : Communicator(rank, cfg.size, cfg.base_seed), st_(std::move(st)) {}

  void send(int dest, const Payload& payload) override {
    check_rank(dest, "send dest");
    if (dest == rank_) throw CommError("send to self is not allowed");
    std::lock_guard lk(st_->mu);
    if (st_->failed) throw CommError(st_->fail_msg);
    st_->queue(rank_, dest).push_back(payload);
    st_->cv.notify_all();
  }

  Payload recv(int source) override {
    check_rank(source, "recv source");
    if (source == rank_) throw CommError("recv from self is not allowed");
    std::unique_lock lk(st_->mu);
    auto& q = st_->queue(source, rank_);
    while (true) {
      if (st_->failed) throw CommError(st_->fail_msg);
      if (!q.empty()) {
        Payload p = std::move(q.front());
        q.pop_front();
        return p;
      }
      st_->wait_src[static_cast<std::size_t>(rank_)] = source;
      if (st_->stuck()) {
        st_->fail(st_->stuck_message());
        st_->wait_src[static_cast<std::size_t>(rank_)] = -1;
        st_->cv.notify_all();
        throw CommError(st_->fail_msg);
      }
      st_->cv.wait(lk);
      st_->wait_src[static_cast<std::size_t>(rank_)] = -1;
    }
  }

 private:
  std::shared_ptr<ThreadGroupState> st_;
};

template <class R, class F>
std::vector<R> run_thread_group(const GroupConfig& cfg, F& entry) {
  auto st = std::make_shared<ThreadGroupState>(cfg.size);
  std::vector<std::optional<R>> results(static_cast<std::size_t>(cfg.size));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(cfg.size));

  for (int r = 0; r < cfg.size; ++r) {
    threads.emplace_back([&, r] {
      ThreadCommunicator comm(st, r, cfg);
      try {
        results[static_cast<std::size_t>(r)] = entry(comm);
        std::lock_guard lk(st->mu);
        ++st->finished;
        if (st->stuck()) st->fail(st->stuck_message());
        st->cv.notify_all();
      } catch (const std::exception& e) {
        std::lock_guard lk(st->mu);
        st->fail("rank " + std::to_string(r) + " failed: " + e.what());
        ++st->finished;
        st->cv.notify_all();
      }
    });
  }
  for (auto& t : threads) t.join();

  if (st->failed) throw GroupError(st->fail_msg);
  std::vector<R> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace detail
}  // namespace parpat

#endif
