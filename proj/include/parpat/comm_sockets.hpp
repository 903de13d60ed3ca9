#ifndef PARPAT_COMM_SOCKETS_HPP
#define PARPAT_COMM_SOCKETS_HPP

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "parpat/comm.hpp"

namespace parpat {

// Wire format: little-endian unsigned 32-bit byte length, then the payload
// bytes. Connections form a full mesh over loopback TCP.

inline std::vector<std::uint8_t> encode_frame(const Payload& p) {
  if (p.size() > 0xffffffffu) throw CommError("payload too large for wire format");
  const auto n = static_cast<std::uint32_t>(p.size());
  std::vector<std::uint8_t> out(4 + p.size());
  out[0] = static_cast<std::uint8_t>(n & 0xffu);
  out[1] = static_cast<std::uint8_t>((n >> 8) & 0xffu);
  out[2] = static_cast<std::uint8_t>((n >> 16) & 0xffu);
  out[3] = static_cast<std::uint8_t>((n >> 24) & 0xffu);
  std::memcpy(out.data() + 4, p.bytes.data(), p.size());
  return out;
}

namespace detail {

// Works for both sockets and pipes; SIGPIPE is ignored by run_socket_group.
inline void write_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (n > 0) {
    const ssize_t w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw CommError(std::string("socket write failed: ") + std::strerror(errno));
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

inline void read_all(int fd, void* data, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(data);
  while (n > 0) {
    const ssize_t r = ::read(fd, p, n);
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK)
        throw CommError("socket recv timed out");
      throw CommError(std::string("socket read failed: ") + std::strerror(errno));
    }
    if (r == 0) throw CommError("connection closed by peer");
    p += r;
    n -= static_cast<std::size_t>(r);
  }
}

inline void write_frame(int fd, const Payload& p) {
  const auto buf = encode_frame(p);
  write_all(fd, buf.data(), buf.size());
}

inline Payload read_frame(int fd) {
  std::uint8_t hdr[4];
  read_all(fd, hdr, 4);
  const std::uint32_t n = static_cast<std::uint32_t>(hdr[0]) |
                          (static_cast<std::uint32_t>(hdr[1]) << 8) |
                          (static_cast<std::uint32_t>(hdr[2]) << 16) |
                          (static_cast<std::uint32_t>(hdr[3]) << 24);
  Payload p;
  p.bytes.resize(n);
  if (n > 0) read_all(fd, p.bytes.data(), n);
  return p;
}

inline void set_recv_timeout(int fd, double seconds) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(seconds);
  tv.tv_usec = static_cast<suseconds_t>((seconds - std::floor(seconds)) * 1e6);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

class SocketCommunicator final : public Communicator {
 public:
  SocketCommunicator(int rank, int listen_fd, const std::string& bootstrap_path,
                     std::uint64_t base_seed, double timeout)
      : Communicator(rank, 0, base_seed) {
    std::ifstream in(bootstrap_path);
    if (!in) throw CommError("cannot open bootstrap file " + bootstrap_path);
    nlohmann::json boot = nlohmann::json::parse(in);
    size_ = boot.at("size").get<int>();
    const auto ports = boot.at("ports").get<std::vector<int>>();

    fds_.assign(static_cast<std::size_t>(size_), -1);
    // Lower ranks accept, higher ranks connect.
    for (int peer = 0; peer < rank_; ++peer) {
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) throw CommError("socket() failed");
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_port = htons(static_cast<std::uint16_t>(ports[static_cast<std::size_t>(peer)]));
      ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
      if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw CommError("connect to rank " + std::to_string(peer) + " failed: " +
                        std::strerror(errno));
      const auto me = static_cast<std::uint32_t>(rank_);
      write_all(fd, &me, sizeof me);
      setup_fd(fd, timeout);
      fds_[static_cast<std::size_t>(peer)] = fd;
    }
    set_recv_timeout(listen_fd, timeout);
    for (int i = rank_ + 1; i < size_; ++i) {
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) throw CommError(std::string("accept failed: ") + std::strerror(errno));
      std::uint32_t peer = 0;
      read_all(fd, &peer, sizeof peer);
      if (peer >= static_cast<std::uint32_t>(size_)) throw CommError("bad peer handshake");
      setup_fd(fd, timeout);
      fds_[peer] = fd;
    }
    ::close(listen_fd);
  }

  ~SocketCommunicator() override {
    for (int fd : fds_)
      if (fd >= 0) ::close(fd);
  }

  SocketCommunicator(const SocketCommunicator&) = delete;
  SocketCommunicator& operator=(const SocketCommunicator&) = delete;

  void send(int dest, const Payload& payload) override {
    check_rank(dest, "send dest");
    if (dest == rank_) throw CommError("send to self is not allowed");
    write_frame(fds_[static_cast<std::size_t>(dest)], payload);
  }

  Payload recv(int source) override {
    check_rank(source, "recv source");
    if (source == rank_) throw CommError("recv from self is not allowed");
    return read_frame(fds_[static_cast<std::size_t>(source)]);
  }

 private:
  static void setup_fd(int fd, double timeout) {
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    set_recv_timeout(fd, timeout);
  }

  std::vector<int> fds_;
};

template <class R, class F>
std::vector<R> run_socket_group(const GroupConfig& cfg, F& entry) {
  std::signal(SIGPIPE, SIG_IGN);

  const int n = cfg.size;
  std::vector<int> listeners(static_cast<std::size_t>(n), -1);
  std::vector<int> ports(static_cast<std::size_t>(n), 0);
  for (int r = 0; r < n; ++r) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw CommError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = 0;
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(fd, n) != 0)
      throw CommError(std::string("bind/listen failed: ") + std::strerror(errno));
    sockaddr_in got{};
    socklen_t len = sizeof got;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&got), &len);
    listeners[static_cast<std::size_t>(r)] = fd;
    ports[static_cast<std::size_t>(r)] = ntohs(got.sin_port);
  }

  // Rank/port assignments go through a JSON bootstrap file.
  char path_buf[] = "/tmp/parpat_bootstrap_XXXXXX";
  const int tmp_fd = ::mkstemp(path_buf);
  if (tmp_fd < 0) throw CommError("mkstemp failed");
  const std::string bootstrap_path(path_buf);
  {
    nlohmann::json boot;
    boot["size"] = n;
    boot["ports"] = ports;
    const std::string text = boot.dump();
    if (::write(tmp_fd, text.data(), text.size()) != static_cast<ssize_t>(text.size()))
      throw CommError("bootstrap write failed");
    ::close(tmp_fd);
  }

  std::vector<int> result_pipes(static_cast<std::size_t>(n), -1);
  std::vector<pid_t> pids(static_cast<std::size_t>(n), -1);
  for (int r = 0; r < n; ++r) {
    int pfd[2];
    if (::pipe(pfd) != 0) throw CommError("pipe failed");
    const pid_t pid = ::fork();
    if (pid < 0) throw CommError("fork failed");
    if (pid == 0) {
      ::close(pfd[0]);
      for (int other = 0; other < n; ++other)
        if (other != r) ::close(listeners[static_cast<std::size_t>(other)]);
      for (int other = 0; other < r; ++other) ::close(result_pipes[static_cast<std::size_t>(other)]);
      int status = 0;
      Payload result;
      try {
        SocketCommunicator comm(r, listeners[static_cast<std::size_t>(r)], bootstrap_path,
                                cfg.base_seed, cfg.timeout_seconds);
        result = to_payload(entry(comm));
      } catch (const std::exception& e) {
        status = 1;
        result = to_payload(std::string(e.what()));
      }
      try {
        const std::uint8_t sb = static_cast<std::uint8_t>(status);
        write_all(pfd[1], &sb, 1);
        write_frame(pfd[1], result);
      } catch (...) {
        status = 2;
      }
      ::close(pfd[1]);
      ::_exit(status);
    }
    ::close(pfd[1]);
    result_pipes[static_cast<std::size_t>(r)] = pfd[0];
    pids[static_cast<std::size_t>(r)] = pid;
  }
  for (int r = 0; r < n; ++r) ::close(listeners[static_cast<std::size_t>(r)]);

  std::vector<R> results;
  results.reserve(static_cast<std::size_t>(n));
  std::string failure;
  for (int r = 0; r < n; ++r) {
    const int fd = result_pipes[static_cast<std::size_t>(r)];
    try {
      std::uint8_t status = 0;
      read_all(fd, &status, 1);
      const Payload p = read_frame(fd);
      if (status != 0) {
        if (failure.empty())
          failure = "rank " + std::to_string(r) + " failed: " + from_payload<std::string>(p);
      } else if (failure.empty()) {
        results.push_back(from_payload<R>(p));
      }
    } catch (const std::exception& e) {
      if (failure.empty())
        failure = "rank " + std::to_string(r) + " terminated unexpectedly: " + e.what();
    }
    ::close(fd);
  }
  for (int r = 0; r < n; ++r) {
    int wstatus = 0;
    ::waitpid(pids[static_cast<std::size_t>(r)], &wstatus, 0);
    if (failure.empty() && (!WIFEXITED(wstatus) || WEXITSTATUS(wstatus) != 0))
      failure = "rank " + std::to_string(r) + " exited abnormally";
  }
  ::unlink(bootstrap_path.c_str());

  if (!failure.empty()) throw GroupError(failure);
  return results;
}

}  // namespace detail
}  // namespace parpat

#endif
