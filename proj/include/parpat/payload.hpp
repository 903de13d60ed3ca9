#ifndef PARPAT_PAYLOAD_HPP
#define PARPAT_PAYLOAD_HPP

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace parpat {

/// Opaque serialized value moved between ranks. Transport is bit-exact.
struct Payload {
  std::vector<std::uint8_t> bytes;

  Payload() = default;
  explicit Payload(std::vector<std::uint8_t> b) : bytes(std::move(b)) {}

  std::size_t size() const { return bytes.size(); }
  bool operator==(const Payload&) const = default;
};

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void value(T v) {
    raw(&v, sizeof v);
  }

  Payload take() { return Payload{std::move(buf_)}; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const Payload& p) : data_(p.bytes.data()), size_(p.bytes.size()) {}

  void raw(void* p, std::size_t n) {
    if (pos_ + n > size_) throw std::runtime_error("payload decode: out of bounds");
    std::memcpy(p, data_ + pos_, n);
    pos_ += n;
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  T value() {
    T v;
    raw(&v, sizeof v);
    return v;
  }

  std::size_t remaining() const { return size_ - pos_; }

  void expect_end() const {
    if (pos_ != size_) throw std::runtime_error("payload decode: trailing bytes");
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

// Built-in codecs. User types join by providing ADL-visible
// pack(ByteWriter&, const T&) / unpack(ByteReader&, T&).

template <class T>
  requires std::is_arithmetic_v<T>
inline void pack(ByteWriter& w, T v) {
  w.value(v);
}

template <class T>
  requires std::is_arithmetic_v<T>
inline void unpack(ByteReader& r, T& v) {
  v = r.value<T>();
}

inline void pack(ByteWriter& w, const std::string& s) {
  w.value<std::uint64_t>(s.size());
  w.raw(s.data(), s.size());
}

inline void unpack(ByteReader& r, std::string& s) {
  s.resize(r.value<std::uint64_t>());
  r.raw(s.data(), s.size());
}

inline void pack(ByteWriter& w, const Payload& p) {
  w.value<std::uint64_t>(p.bytes.size());
  w.raw(p.bytes.data(), p.bytes.size());
}

inline void unpack(ByteReader& r, Payload& p) {
  p.bytes.resize(r.value<std::uint64_t>());
  r.raw(p.bytes.data(), p.bytes.size());
}

template <class T>
inline void pack(ByteWriter& w, const std::vector<T>& xs) {
  w.value<std::uint64_t>(xs.size());
  for (const auto& x : xs) pack(w, x);
}

template <class T>
inline void unpack(ByteReader& r, std::vector<T>& xs) {
  xs.resize(r.value<std::uint64_t>());
  for (auto& x : xs) unpack(r, x);
}

template <class A, class B>
inline void pack(ByteWriter& w, const std::pair<A, B>& p) {
  pack(w, p.first);
  pack(w, p.second);
}

template <class A, class B>
inline void unpack(ByteReader& r, std::pair<A, B>& p) {
  unpack(r, p.first);
  unpack(r, p.second);
}

template <class T>
concept Packable = requires(ByteWriter& w, ByteReader& r, const T& c, T& m) {
  pack(w, c);
  unpack(r, m);
};

template <Packable T>
Payload to_payload(const T& v) {
  ByteWriter w;
  pack(w, v);
  return w.take();
}

template <Packable T>
T from_payload(const Payload& p) {
  ByteReader r(p);
  T v{};
  unpack(r, v);
  r.expect_end();
  return v;
}

}  // namespace parpat

#endif
