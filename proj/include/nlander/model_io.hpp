// Versioned JSON serialization of trained networks.
//
// Field order: format, version, arch, gamma, spectral_normalization,
// input_spec {attitude, include_xy, names, mean, scale}, output_scale,
// layers [{rows, cols, W (row-major), b, sigma}], constant, provenance.
#pragma once

#include "nlander/network.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <string>

namespace nlander {

inline constexpr const char* kModelFormat = "nlander-model";
inline constexpr int kModelVersion = 1;

namespace detail {
inline nlohmann::ordered_json vec_to_json(const VecX& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
inline VecX vec_from_json(const nlohmann::ordered_json& a) {
  VecX v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}
}  // namespace detail

inline nlohmann::ordered_json model_to_json(const SpecNormNet& net) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["arch"] = to_string(net.arch);
  j["gamma"] = net.gamma;
  j["spectral_normalization"] = net.spectral_normalization;
  auto& in = j["input_spec"];
  in["attitude"] = to_string(net.input_spec.attitude);
  in["include_xy"] = net.input_spec.include_xy;
  in["names"] = net.input_spec.names();
  in["mean"] = detail::vec_to_json(net.input_spec.mean);
  in["scale"] = detail::vec_to_json(net.input_spec.scale);
  j["output_scale"] = net.output_scale;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : net.layers) {
    nlohmann::ordered_json lj;
    lj["rows"] = l.W.rows();
    lj["cols"] = l.W.cols();
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) w.push_back(l.W(r, c));
    lj["W"] = std::move(w);
    lj["b"] = detail::vec_to_json(l.b);
    lj["sigma"] = l.sigma;
    j["layers"].push_back(std::move(lj));
  }
  j["constant"] = detail::vec_to_json(net.constant);
  j["provenance"] = net.provenance;
  return j;
}

inline SpecNormNet model_from_json(const nlohmann::ordered_json& j) {
  if (j.value("format", std::string{}) != kModelFormat) throw IoError("not an nlander model file");
  if (j.value("version", 0) != kModelVersion) throw IoError("unsupported model version");
  SpecNormNet net;
  net.arch = arch_from_string(j.at("arch").get<std::string>());
  net.gamma = j.at("gamma").get<double>();
  net.spectral_normalization = j.at("spectral_normalization").get<bool>();
  const auto& in = j.at("input_spec");
  net.input_spec.attitude = attitude_encoding_from_string(in.at("attitude").get<std::string>());
  net.input_spec.include_xy = in.at("include_xy").get<bool>();
  net.input_spec.mean = detail::vec_from_json(in.at("mean"));
  net.input_spec.scale = detail::vec_from_json(in.at("scale"));
  if (net.input_spec.mean.size() != 0 && !net.input_spec.fitted()) throw IoError("model input_spec has wrong size");
  net.output_scale = j.at("output_scale").get<double>();
  for (const auto& lj : j.at("layers")) {
    DenseLayer l;
    const auto rows = lj.at("rows").get<Eigen::Index>();
    const auto cols = lj.at("cols").get<Eigen::Index>();
    const auto& w = lj.at("W");
    if (static_cast<Eigen::Index>(w.size()) != rows * cols) throw IoError("layer weight count mismatch");
    l.W.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) l.W(r, c) = w[static_cast<std::size_t>(r * cols + c)].get<double>();
    l.b = detail::vec_from_json(lj.at("b"));
    // The stored sigma is never trusted below the exact value, so edited
    // weights cannot pass the certificate.
    const double exact = l.W.size() ? Eigen::JacobiSVD<MatX>(l.W).singularValues()(0) : 0.0;
    l.sigma = std::max(lj.at("sigma").get<double>(), exact);
    net.layers.push_back(std::move(l));
  }
  net.constant = detail::vec_from_json(j.at("constant"));
  net.provenance = j.value("provenance", std::string{});
  return net;
}

inline void save_model(const SpecNormNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file " + path);
  out << model_to_json(net).dump(2) << '\n';
}

inline SpecNormNet load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read model file " + path);
  nlohmann::ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace nlander
