#include "rlbf/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "rlbf/error.hpp"

namespace rlbf {
namespace {

constexpr std::array<char, 8> kMagic = {'R', 'L', 'B', 'F', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw Error("model_error", "truncated model file " + path);
  }
  return value;
}

}  // namespace

void save_model(const AgentParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io_error", "cannot write model file " + path);
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, params.shape.max_jobs);
  put<std::uint64_t>(out, params.shape.features);
  put<std::uint64_t>(out, params.shape.policy_hidden);
  put<std::uint64_t>(out, params.shape.value_hidden);
  put<std::uint64_t>(out, params.policy.size());
  put<std::uint64_t>(out, params.value.size());
  out.write(reinterpret_cast<const char*>(params.policy.data()),
            static_cast<std::streamsize>(params.policy.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(params.value.data()),
            static_cast<std::streamsize>(params.value.size() * sizeof(double)));
  if (!out) throw Error("io_error", "failed writing model file " + path);
}

AgentParams load_model(const std::string& path, const std::optional<NetworkShape>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("model_error", "cannot open model file " + path);

  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error("model_error", path + " is not a model file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kFormatVersion) {
    throw Error("model_error", "unsupported model format version " + std::to_string(version));
  }

  NetworkShape shape;
  shape.max_jobs = get<std::uint64_t>(in, path);
  shape.features = get<std::uint64_t>(in, path);
  shape.policy_hidden = get<std::uint64_t>(in, path);
  shape.value_hidden = get<std::uint64_t>(in, path);
  if (shape.features != kJobFeatures || shape.max_jobs == 0 || shape.max_jobs > 65536 ||
      shape.policy_hidden == 0 || shape.policy_hidden > 4096 || shape.value_hidden == 0 ||
      shape.value_hidden > 4096) {
    throw Error("model_error", "implausible shape signature in " + path);
  }
  if (expected && !(*expected == shape)) {
    throw Error("model_error", "model shape in " + path + " does not match the expected shape");
  }
  const auto policy_size = get<std::uint64_t>(in, path);
  const auto value_size = get<std::uint64_t>(in, path);
  if (policy_size != shape.policy_size() || value_size != shape.value_size()) {
    throw Error("model_error", "parameter counts in " + path + " disagree with its shape");
  }

  auto params = AgentParams::zeros(shape);
  if (!in.read(reinterpret_cast<char*>(params.policy.data()),
               static_cast<std::streamsize>(policy_size * sizeof(double))) ||
      !in.read(reinterpret_cast<char*>(params.value.data()),
               static_cast<std::streamsize>(value_size * sizeof(double)))) {
    throw Error("model_error", "truncated model file " + path);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error("model_error", "trailing bytes in model file " + path);
  }
  return params;
}

}  // namespace rlbf
