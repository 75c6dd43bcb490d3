// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>

#include "chanest/gmm_cme.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts need swapping");

namespace chanest {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'E', 'S', 'T', 'G', 'M', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("model file truncated: " + path);
  return value;
}

void write_complex(std::ofstream& out, const cd& value) {
  write_pod(out, value.real());
  write_pod(out, value.imag());
}

cd read_complex(std::ifstream& in, const std::string& path) {
  const double re = read_pod<double>(in, path);
  const double im = read_pod<double>(in, path);
  return {re, im};
}

}  // namespace

void save_gmm(const GmmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open model file for write: " + path);

  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(model.dimension));
  write_pod(out, static_cast<std::uint32_t>(model.components()));
  write_pod(out, model.sample_count);
  write_pod(out, model.grid_id);
  write_pod(out, model.angular_spread_deg);
  write_pod(out, model.rician_k_db);
  write_pod(out, model.seed);

  for (double w : model.weights) write_pod(out, w);
  for (const CVector& mean : model.means) {
    for (Eigen::Index i = 0; i < mean.size(); ++i) write_complex(out, mean(i));
  }
  for (const CMatrix& cov : model.covariances) {
    for (Eigen::Index row = 0; row < cov.rows(); ++row) {
      for (Eigen::Index col = 0; col < cov.cols(); ++col) {
        write_complex(out, cov(row, col));
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

GmmModel load_gmm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a model file: " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw std::runtime_error("unsupported model file version " +
                             std::to_string(version) + ": " + path);
  }

  GmmModel model;
  const auto dimension = read_pod<std::uint32_t>(in, path);
  const auto components = read_pod<std::uint32_t>(in, path);
  if (dimension == 0 || components == 0 || dimension > (1u << 20) ||
      components > (1u << 20)) {
    throw std::runtime_error("model file has implausible header: " + path);
  }
  model.dimension = static_cast<int>(dimension);
  model.sample_count = read_pod<std::uint64_t>(in, path);
  model.grid_id = read_pod<std::uint32_t>(in, path);
  model.angular_spread_deg = read_pod<double>(in, path);
  model.rician_k_db = read_pod<double>(in, path);
  model.seed = read_pod<std::uint64_t>(in, path);
  model.noise_rule =
      model.grid_id == 0 ? NoiseRule::full : NoiseRule::projected;

  model.weights.resize(components);
  for (auto& w : model.weights) w = read_pod<double>(in, path);
  model.means.resize(components);
  for (auto& mean : model.means) {
    mean.resize(dimension);
    for (std::uint32_t i = 0; i < dimension; ++i) {
      mean(i) = read_complex(in, path);
    }
  }
  model.covariances.resize(components);
  for (auto& cov : model.covariances) {
    cov.resize(dimension, dimension);
    for (std::uint32_t row = 0; row < dimension; ++row) {
      for (std::uint32_t col = 0; col < dimension; ++col) {
        cov(row, col) = read_complex(in, path);
      }
    }
  }
  return model;
}

}  // namespace chanest
