#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "decseg/nn/module.hpp"

namespace decseg {

// Binary checkpoint container: a string->string metadata section plus named
// raw tensors (exact bit patterns, so save/load round-trips are lossless).
// Little-endian, fixed-width fields; written atomically (temp file + rename).
template <class T>
struct CheckpointData {
  std::map<std::string, std::string> meta;
  std::map<std::string, Tensor<T>> tensors;

  bool has_group(const std::string& group) const {
    const std::string prefix = group + ".";
    for (const auto& [name, t] : tensors) {
      if (name.rfind(prefix, 0) == 0) return true;
    }
    return false;
  }
};

namespace detail {

constexpr char kCkptMagic[8] = {'D', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

template <class U>
void write_pod(std::ostream& os, const U& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <class U>
U read_pod(std::istream& is, const std::string& path) {
  U v;
  is.read(reinterpret_cast<char*>(&v), sizeof(U));
  DECSEG_CHECK(is.good(), "checkpoint '" << path << "' is truncated or unreadable");
  return v;
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_pod(os, (std::uint32_t)s.size());
  os.write(s.data(), (std::streamsize)s.size());
}

inline std::string read_str(std::istream& is, const std::string& path) {
  const auto n = read_pod<std::uint32_t>(is, path);
  DECSEG_CHECK(n <= (1u << 20), "checkpoint '" << path << "' has an implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  DECSEG_CHECK(is.good(), "checkpoint '" << path << "' is truncated or unreadable");
  return s;
}

template <class T>
constexpr std::uint8_t dtype_code() {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8, "unsupported checkpoint scalar");
  return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::filesystem::path& path, const CheckpointData<T>& data) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    DECSEG_CHECK(os.good(), "cannot open '" << tmp.string() << "' for writing");
    os.write(detail::kCkptMagic, 8);
    detail::write_pod(os, detail::kCkptVersion);
    detail::write_pod(os, (std::uint32_t)data.meta.size());
    for (const auto& [k, v] : data.meta) {
      detail::write_str(os, k);
      detail::write_str(os, v);
    }
    detail::write_pod(os, (std::uint32_t)data.tensors.size());
    for (const auto& [name, t] : data.tensors) {
      detail::write_str(os, name);
      detail::write_pod(os, detail::dtype_code<T>());
      detail::write_pod(os, (std::uint8_t)t.dim());
      for (int i = 0; i < t.dim(); ++i) detail::write_pod(os, (std::uint32_t)t.size(i));
      os.write(reinterpret_cast<const char*>(t.data()), (std::streamsize)(t.numel() * sizeof(T)));
    }
    DECSEG_CHECK(os.good(), "write to '" << tmp.string() << "' failed");
  }
  fs::rename(tmp, path);
}

template <class T>
CheckpointData<T> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  DECSEG_CHECK(is.good(), "checkpoint '" << path.string() << "' does not exist or is unreadable");
  char magic[8];
  is.read(magic, 8);
  DECSEG_CHECK(is.good() && std::equal(magic, magic + 8, detail::kCkptMagic),
               "'" << path.string() << "' is not a checkpoint file");
  const auto version = detail::read_pod<std::uint32_t>(is, path.string());
  DECSEG_CHECK(version == detail::kCkptVersion,
               "checkpoint '" << path.string() << "' has unsupported version " << version);
  CheckpointData<T> data;
  const auto nmeta = detail::read_pod<std::uint32_t>(is, path.string());
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    auto k = detail::read_str(is, path.string());
    auto v = detail::read_str(is, path.string());
    data.meta.emplace(std::move(k), std::move(v));
  }
  const auto ntensors = detail::read_pod<std::uint32_t>(is, path.string());
  for (std::uint32_t i = 0; i < ntensors; ++i) {
    auto name = detail::read_str(is, path.string());
    const auto dtype = detail::read_pod<std::uint8_t>(is, path.string());
    DECSEG_CHECK(dtype == detail::dtype_code<T>(),
                 "checkpoint tensor '" << name << "' has dtype code " << (int)dtype
                                       << ", expected " << (int)detail::dtype_code<T>());
    const auto ndim = detail::read_pod<std::uint8_t>(is, path.string());
    std::vector<int> shape(ndim);
    for (int d = 0; d < ndim; ++d) {
      shape[d] = (int)detail::read_pod<std::uint32_t>(is, path.string());
    }
    Tensor<T> t(shape);
    is.read(reinterpret_cast<char*>(t.data()), (std::streamsize)(t.numel() * sizeof(T)));
    DECSEG_CHECK(is.good(), "checkpoint '" << path.string() << "' is truncated");
    data.tensors.emplace(std::move(name), std::move(t));
  }
  return data;
}

// Collect every parameter and buffer of a module under its dotted name.
template <class T>
void collect_state(const Module<T>& m, CheckpointData<T>& out) {
  for (const auto& [name, p] : m.named_parameters()) out.tensors.emplace(name, p->value);
  for (const auto& [name, b] : m.named_buffers()) out.tensors.emplace(name, *b);
}

// Load a module's parameters and buffers from checkpoint data. Every tensor
// the module owns must be present with a matching shape; a missing tensor
// reports the missing top-level groups to make partial checkpoints
// diagnosable (e.g. an ablation checkpoint without fused-decoder weights).
template <class T>
void load_state(Module<T>& m, const CheckpointData<T>& data) {
  std::set<std::string> missing_groups;
  std::vector<std::string> missing;
  auto assign = [&](const std::string& name, Tensor<T>& dst) {
    auto it = data.tensors.find(name);
    if (it == data.tensors.end()) {
      missing.push_back(name);
      missing_groups.insert(name.substr(0, name.find('.')));
      return;
    }
    DECSEG_CHECK(it->second.shape() == dst.shape(),
                 "checkpoint tensor '" << name << "' has shape " << shape_str(it->second.shape())
                                       << ", model expects " << shape_str(dst.shape()));
    std::memcpy(dst.data(), it->second.data(), sizeof(T) * dst.numel());
  };
  for (const auto& [name, p] : m.named_parameters()) assign(name, p->value);
  for (const auto& [name, b] : m.named_buffers()) assign(name, *b);
  if (!missing.empty()) {
    std::string groups;
    for (const auto& g : missing_groups) groups += (groups.empty() ? "" : ", ") + g;
    DECSEG_CHECK(false, "checkpoint is missing " << missing.size()
                                                 << " tensors; missing parameter groups: "
                                                 << groups << " (first: " << missing[0] << ")");
  }
}

}  // namespace decseg
