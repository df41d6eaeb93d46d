// Versioned binary checkpoints. Round trips are bit-exact: doubles are
// written as raw little-endian IEEE-754 words.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "layerwise/resnet.hpp"

namespace lw {

namespace io {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& os, double d) {
  put_u64(os, std::bit_cast<std::uint64_t>(d));
}

inline double get_f64(std::istream& is) {
  return std::bit_cast<double>(get_u64(is));
}

inline void put_matrix(std::ostream& os, const Matrix& m) {
  put_u64(os, m.rows());
  put_u64(os, m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) put_f64(os, m.data()[i]);
}

inline Matrix get_matrix(std::istream& is) {
  const std::size_t r = get_u64(is), c = get_u64(is);
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = get_f64(is);
  return m;
}

}  // namespace io

inline constexpr std::uint64_t kNetMagic = 0x4C574E4554303031ull;  // "LWNET001"

inline void save_net(std::ostream& os, const GrowableResNet& net) {
  io::put_u64(os, kNetMagic);
  io::put_u64(os, net.head == Head::softmax ? 1 : 0);
  io::put_u64(os, net.input_frozen ? 1 : 0);
  io::put_matrix(os, net.U);
  io::put_matrix(os, net.u);
  io::put_matrix(os, net.W_pred);
  io::put_matrix(os, net.b_pred);
  io::put_u64(os, net.layers.size());
  for (const auto& l : net.layers) {
    io::put_u64(os, static_cast<std::uint64_t>(l.activation));
    io::put_u64(os, (l.frozen ? 1u : 0u) | (l.skip ? 2u : 0u));
    io::put_matrix(os, l.W);
    io::put_matrix(os, l.b);
  }
}

inline GrowableResNet load_net(std::istream& is) {
  if (io::get_u64(is) != kNetMagic)
    throw std::runtime_error("checkpoint: bad magic");
  GrowableResNet net;
  net.head = io::get_u64(is) ? Head::softmax : Head::identity;
  net.input_frozen = io::get_u64(is) != 0;
  net.U = io::get_matrix(is);
  net.u = io::get_matrix(is);
  net.W_pred = io::get_matrix(is);
  net.b_pred = io::get_matrix(is);
  const std::size_t n = io::get_u64(is);
  net.layers.resize(n);
  for (std::size_t h = 0; h < n; ++h) {
    net.layers[h].activation = static_cast<Act>(io::get_u64(is));
    const std::uint64_t flags = io::get_u64(is);
    net.layers[h].frozen = (flags & 1u) != 0;
    net.layers[h].skip = (flags & 2u) != 0;
    net.layers[h].W = io::get_matrix(is);
    net.layers[h].b = io::get_matrix(is);
  }
  net.touch();
  return net;
}

inline void save_net(const std::string& path, const GrowableResNet& net) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  save_net(f, net);
}

inline GrowableResNet load_net(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  return load_net(f);
}

inline constexpr std::uint64_t kChainMagic = 0x4C574348303031ull;  // "LWCH001"

inline void save_chain(const std::string& path, const std::vector<GrowableResNet>& nets) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  io::put_u64(f, kChainMagic);
  io::put_u64(f, nets.size());
  for (const auto& n : nets) save_net(f, n);
}

inline std::vector<GrowableResNet> load_chain(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  if (io::get_u64(f) != kChainMagic)
    throw std::runtime_error("checkpoint: bad chain magic");
  const std::size_t n = io::get_u64(f);
  std::vector<GrowableResNet> nets;
  nets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) nets.push_back(load_net(f));
  return nets;
}

}  // namespace lw
