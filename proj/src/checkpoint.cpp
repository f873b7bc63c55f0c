// SPDX-License-Identifier: Apache-2.0
#include "afcn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "afcn/config.hpp"
#include "afcn/errors.hpp"

namespace afcn {
namespace {

template <typename T>
void put(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw LoadError("truncated checkpoint while reading " + what);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const std::string& what) {
  const auto n = get<std::uint32_t>(in, what);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw LoadError("truncated checkpoint while reading " + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const ModelConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const auto arch = architecture_json(config);
  out.write("AFCN", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, config_hash(arch));
  put_string(out, arch.dump());
  const auto refs = params.refs();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(refs.size()));
  for (const auto* p : refs) {
    put_string(out, p->name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape()) put<std::uint64_t>(out, d);
    for (double v : p->value.data()) put<double>(out, v);
  }
  if (!out) throw Error("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "AFCN", 4) != 0) {
    throw LoadError(path.string() + " is not an AFCN checkpoint");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config_hash = get<std::uint64_t>(in, "config hash");
  try {
    ck.architecture = nlohmann::json::parse(get_string(in, "architecture"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint architecture record: ") + e.what());
  }
  const auto count = get<std::uint32_t>(in, "array count");
  for (std::uint32_t a = 0; a < count; ++a) {
    std::string name = get_string(in, "array name");
    const auto rank = get<std::uint32_t>(in, name);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<std::size_t>(get<std::uint64_t>(in, name)));
    std::vector<double> data(element_count(shape));
    for (auto& v : data) v = get<double>(in, name);
    ck.arrays.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ck;
}

std::pair<ModelConfig, ModelParams> restore_model(const Checkpoint& ck) {
  if (config_hash(ck.architecture) != ck.config_hash) {
    throw ConfigError("checkpoint config hash does not match its architecture record");
  }
  ModelConfig config = model_config_from_architecture(ck.architecture);
  ModelParams params = init_model(config, 0);
  for (auto* p : params.refs()) {
    auto it = std::find_if(ck.arrays.begin(), ck.arrays.end(), [&](const auto& a) { return a.first == p->name; });
    if (it == ck.arrays.end()) throw ConfigError("checkpoint lacks parameter '" + p->name + "'");
    if (it->second.shape() != p->value.shape()) {
      throw ConfigError("checkpoint parameter '" + p->name + "' has shape " + shape_str(it->second.shape()) +
                        ", expected " + shape_str(p->value.shape()));
    }
    p->value = it->second;
    p->zero_grad();
  }
  return {config, std::move(params)};
}

}  // namespace afcn
