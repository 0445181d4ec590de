#pragma once

// Estimator persistence: a JSON architecture header followed by the raw
// weight blob. File layout:
//   bytes 0-7   magic "SBIMDN01"
//   bytes 8-15  unsigned 64-bit little-endian header length L
//   bytes 16..  L bytes of JSON (direction, dims, standardization vectors)
//   then        n_weights doubles, little-endian IEEE 754
// The blob preserves weights bit-exactly, so save/load round-trips the
// estimator's densities to the last ulp.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbikit/core/errors.hpp"
#include "sbikit/neural/mdn.hpp"

namespace sbikit {

inline constexpr char kEstimatorMagic[8] = {'S', 'B', 'I', 'M',
                                            'D', 'N', '0', '1'};

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

inline Eigen::VectorXd from_std(const std::vector<double>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace detail

inline void save_estimator(const std::string& path,
                           const CondDensityEstimator& est) {
  nlohmann::json header;
  header["direction"] = cond_direction_name(est.direction());
  header["cond_dim"] = est.cond_dim();
  header["out_dim"] = est.out_dim();
  header["k"] = est.n_components();
  header["hidden"] = est.hidden_dim();
  header["cond_mean"] = detail::to_std(est.cond_mean());
  header["cond_sd"] = detail::to_std(est.cond_sd());
  header["out_mean"] = detail::to_std(est.out_mean());
  header["out_sd"] = detail::to_std(est.out_sd());
  header["n_weights"] = est.n_weights();
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out.write(kEstimatorMagic, 8);
  const std::uint64_t len = text.size();
  char len_bytes[8];
  for (int i = 0; i < 8; ++i)
    len_bytes[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  out.write(len_bytes, 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  // Doubles written as-is; this toolchain is little-endian IEEE 754.
  out.write(reinterpret_cast<const char*>(est.weights().data()),
            static_cast<std::streamsize>(est.n_weights() * sizeof(double)));
  if (!out) throw Error("write failed: " + path);
}

inline CondDensityEstimator load_estimator(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kEstimatorMagic, 8) != 0)
    throw Error("estimator file has wrong magic: " + path);
  char len_bytes[8];
  in.read(len_bytes, 8);
  if (!in) throw Error("estimator file truncated: " + path);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(len_bytes[i]))
           << (8 * i);
  if (len > (1u << 26)) throw Error("estimator header oversized: " + path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("estimator file truncated: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("estimator header is not valid JSON: " + std::string(e.what()));
  }
  const std::string dir_name = header.at("direction").get<std::string>();
  CondDirection direction;
  if (dir_name == "posterior") {
    direction = CondDirection::posterior;
  } else if (dir_name == "likelihood") {
    direction = CondDirection::likelihood;
  } else {
    throw Error("estimator header has unknown direction: " + dir_name);
  }

  CondDensityEstimator est(direction,
                           header.at("cond_dim").get<std::size_t>(),
                           header.at("out_dim").get<std::size_t>(),
                           header.at("k").get<std::size_t>(),
                           header.at("hidden").get<std::size_t>());
  est.cond_mean() =
      detail::from_std(header.at("cond_mean").get<std::vector<double>>());
  est.cond_sd() =
      detail::from_std(header.at("cond_sd").get<std::vector<double>>());
  est.out_mean() =
      detail::from_std(header.at("out_mean").get<std::vector<double>>());
  est.out_sd() =
      detail::from_std(header.at("out_sd").get<std::vector<double>>());
  if (est.cond_mean().size() != static_cast<Eigen::Index>(est.cond_dim()) ||
      est.cond_sd().size() != static_cast<Eigen::Index>(est.cond_dim()) ||
      est.out_mean().size() != static_cast<Eigen::Index>(est.out_dim()) ||
      est.out_sd().size() != static_cast<Eigen::Index>(est.out_dim()))
    throw Error("estimator header standardization dimensions inconsistent");

  const std::size_t n_weights = header.at("n_weights").get<std::size_t>();
  if (n_weights != est.n_weights())
    throw Error("estimator weight count inconsistent with architecture");
  in.read(reinterpret_cast<char*>(est.weights().data()),
          static_cast<std::streamsize>(n_weights * sizeof(double)));
  if (!in) throw Error("estimator weight blob truncated: " + path);
  return est;
}

}  // namespace sbikit
