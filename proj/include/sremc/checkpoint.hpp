#pragma once

// Versioned binary checkpoints for chain state.  Round-trips are bit-exact:
// spins, operator strings, accumulated step results and the full RNG state
// are restored verbatim, so a resumed run reproduces the uninterrupted one.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sremc/qsse.hpp"
#include "sremc/rng.hpp"
#include "sremc/sse.hpp"
#include "sremc/version.hpp"

namespace sremc {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("BinaryWriter: cannot open " + path);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i32(std::int32_t v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  template <typename T>
  void vec(const std::vector<T>& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    u64(v.size());
    raw(v.data(), v.size() * sizeof(T));
  }
  bool good() const { return static_cast<bool>(out_); }

 private:
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("BinaryReader: cannot open " + path);
  }
  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  std::int32_t i32() { std::int32_t v; raw(&v, 4); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::string str() {
    std::string s(u64(), '\0');
    raw(s.data(), s.size());
    return s;
  }
  template <typename T>
  std::vector<T> vec() {
    static_assert(std::is_trivially_copyable_v<T>);
    std::vector<T> v(u64());
    raw(v.data(), v.size() * sizeof(T));
    return v;
  }

 private:
  void raw(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("BinaryReader: truncated checkpoint");
  }
  std::ifstream in_;
};

inline void write_replica(BinaryWriter& w, const SseReplica& r) {
  w.vec(r.spins0);
  std::vector<std::int32_t> raw(r.slots.size());
  for (std::size_t i = 0; i < r.slots.size(); ++i) raw[i] = r.slots[i].raw();
  w.vec(raw);
  w.i32(r.n);
  w.i32(r.n_bond);
}

inline SseReplica read_replica(BinaryReader& rd) {
  SseReplica r;
  r.spins0 = rd.vec<std::uint8_t>();
  const auto raw = rd.vec<std::int32_t>();
  r.slots.reserve(raw.size());
  for (auto c : raw) r.slots.push_back(OperatorSlot::from_raw(c));
  r.n = rd.i32();
  r.n_bond = rd.i32();
  return r;
}

inline void write_qconfiguration(BinaryWriter& w, const QConfiguration& qc) {
  for (const auto& r : qc.replicas) write_replica(w, r);
  w.vec(qc.pauli.offdiag);
}

inline QConfiguration read_qconfiguration(BinaryReader& rd) {
  QConfiguration qc;
  for (auto& r : qc.replicas) r = read_replica(rd);
  qc.pauli.offdiag = rd.vec<std::uint8_t>();
  return qc;
}

// Atomic-ish write: stream to a temp file, then rename over the target.
template <typename Fn>
void write_checkpoint_file(const std::string& path, Fn&& payload) {
  const std::string tmp = path + ".tmp";
  {
    BinaryWriter w(tmp);
    w.u32(0x53524d43u);  // 'SRMC'
    w.u32(kCheckpointVersion);
    payload(w);
    if (!w.good()) throw std::runtime_error("checkpoint write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename Fn>
void read_checkpoint_file(const std::string& path, Fn&& payload) {
  BinaryReader r(path);
  if (r.u32() != 0x53524d43u) throw std::runtime_error("not a checkpoint file: " + path);
  const auto version = r.u32();
  if (version != static_cast<std::uint32_t>(kCheckpointVersion))
    throw std::runtime_error("unsupported checkpoint version in " + path);
  payload(r);
}

}  // namespace sremc
