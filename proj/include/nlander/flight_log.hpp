// Fixed-rate flight records and their CSV form.
#pragma once

#include "nlander/common.hpp"
#include "nlander/vehicle.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace nlander {

struct LogRecord {
  double t = 0.0;
  int segment = 0;
  VehicleState x;            // state as seen by the controller
  Vec4 u = Vec4::Zero();     // rotor command applied from t on
  Vec3 f_a = Vec3::Zero();   // true disturbance force
  Vec3 tau_a = Vec3::Zero();
  Vec3 f_hat = Vec3::Zero(); // model prediction
  Vec3 s = Vec3::Zero();
  Vec3 p_tilde = Vec3::Zero();
  Vec3 p_d = Vec3::Zero();
  Vec3 f_u_avg = Vec3::Zero();  // mean world rotor force over the preceding interval
  Vec4 u_avg = Vec4::Zero();    // mean applied command over the preceding interval
  Vec3 f_a_avg = Vec3::Zero();  // mean true disturbance force over the preceding interval
  double fp_residual = 0.0;     // max over the preceding interval
  double fp_ratio = 0.0;        // max measured contraction ratio over the interval
  double cert_ratio = 0.0;
  double rho = 0.0;             // max |du| / |s| over the interval
  double delta_u = 0.0;         // max |u_k - u_{k-1}| over the interval
  int fp_iters = 0;
  bool saturated = false;
  bool tilt_limited = false;
  bool contact = false;
};

struct FlightLog {
  static constexpr int kSchemaVersion = 1;
  double rate_hz = 100.0;
  std::vector<LogRecord> records;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  double dt() const { return 1.0 / rate_hz; }
};

inline const std::vector<std::string>& flight_log_columns() {
  static const std::vector<std::string> cols = {
      "t", "segment", "px", "py", "pz", "vx", "vy", "vz",
      "R00", "R01", "R02", "R10", "R11", "R12", "R20", "R21", "R22",
      "wx", "wy", "wz", "u1", "u2", "u3", "u4",
      "fa_x", "fa_y", "fa_z", "ta_x", "ta_y", "ta_z", "fhat_x", "fhat_y", "fhat_z",
      "s_x", "s_y", "s_z", "pt_x", "pt_y", "pt_z", "pd_x", "pd_y", "pd_z",
      "fu_x", "fu_y", "fu_z", "ua1", "ua2", "ua3", "ua4", "faa_x", "faa_y", "faa_z", "fp_residual", "fp_ratio", "cert_ratio", "rho", "delta_u",
      "fp_iters", "saturated", "tilt_limited", "contact"};
  return cols;
}

namespace detail {
inline void put(std::string& line, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  if (!line.empty()) line += ',';
  line += buf;
}
inline void put3(std::string& line, const Vec3& v) {
  for (int i = 0; i < 3; ++i) put(line, v[i]);
}
}  // namespace detail

inline void write_flight_log_csv(const FlightLog& log, std::ostream& out) {
  char rate[32];
  std::snprintf(rate, sizeof rate, "%.17g", log.rate_hz);
  out << "# nlander-flightlog v" << FlightLog::kSchemaVersion << " rate_hz=" << rate << '\n';
  out << "# meta " << log.meta.dump() << '\n';
  const auto& cols = flight_log_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  std::string line;
  for (const auto& r : log.records) {
    line.clear();
    detail::put(line, r.t);
    detail::put(line, r.segment);
    detail::put3(line, r.x.p);
    detail::put3(line, r.x.v);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) detail::put(line, r.x.R(a, b));
    detail::put3(line, r.x.omega);
    for (int i = 0; i < 4; ++i) detail::put(line, r.u[i]);
    detail::put3(line, r.f_a);
    detail::put3(line, r.tau_a);
    detail::put3(line, r.f_hat);
    detail::put3(line, r.s);
    detail::put3(line, r.p_tilde);
    detail::put3(line, r.p_d);
    detail::put3(line, r.f_u_avg);
    for (int i = 0; i < 4; ++i) detail::put(line, r.u_avg[i]);
    detail::put3(line, r.f_a_avg);
    detail::put(line, r.fp_residual);
    detail::put(line, r.fp_ratio);
    detail::put(line, r.cert_ratio);
    detail::put(line, r.rho);
    detail::put(line, r.delta_u);
    detail::put(line, r.fp_iters);
    detail::put(line, r.saturated ? 1 : 0);
    detail::put(line, r.tilt_limited ? 1 : 0);
    detail::put(line, r.contact ? 1 : 0);
    out << line << '\n';
  }
}

inline FlightLog read_flight_log_csv(std::istream& in) {
  FlightLog log;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# nlander-flightlog v", 0) != 0) {
    throw IoError("not an nlander flight log (missing version header)");
  }
  {
    const auto vpos = line.find('v', 2);
    const int version = std::stoi(line.substr(vpos + 1));
    if (version != FlightLog::kSchemaVersion) throw IoError("unsupported flight log schema version");
    const auto rpos = line.find("rate_hz=");
    if (rpos == std::string::npos) throw IoError("flight log header lacks rate_hz");
    log.rate_hz = std::stod(line.substr(rpos + 8));
  }
  if (!std::getline(in, line)) throw IoError("flight log lacks a column header");
  if (line.rfind("# meta ", 0) == 0) {
    try {
      log.meta = nlohmann::ordered_json::parse(line.substr(7));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("flight log meta line is not valid JSON: ") + e.what());
    }
    if (!std::getline(in, line)) throw IoError("flight log lacks a column header");
  }
  const std::size_t ncols = flight_log_columns().size();
  std::vector<double> v(ncols);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < ncols; ++c) {
      const std::size_t next = line.find(',', pos);
      if (next == std::string::npos && c + 1 != ncols) throw IoError("short flight log row");
      v[c] = std::strtod(line.c_str() + pos, nullptr);
      pos = next + 1;
    }
    LogRecord r;
    std::size_t i = 0;
    const auto take3 = [&] {
      Vec3 out(v[i], v[i + 1], v[i + 2]);
      i += 3;
      return out;
    };
    r.t = v[i++];
    r.segment = static_cast<int>(v[i++]);
    r.x.p = take3();
    r.x.v = take3();
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r.x.R(a, b) = v[i++];
    r.x.omega = take3();
    for (int k = 0; k < 4; ++k) r.u[k] = v[i++];
    r.f_a = take3();
    r.tau_a = take3();
    r.f_hat = take3();
    r.s = take3();
    r.p_tilde = take3();
    r.p_d = take3();
    r.f_u_avg = take3();
    for (int k = 0; k < 4; ++k) r.u_avg[k] = v[i++];
    r.f_a_avg = take3();
    r.fp_residual = v[i++];
    r.fp_ratio = v[i++];
    r.cert_ratio = v[i++];
    r.rho = v[i++];
    r.delta_u = v[i++];
    r.fp_iters = static_cast<int>(v[i++]);
    r.saturated = v[i++] != 0.0;
    r.tilt_limited = v[i++] != 0.0;
    r.contact = v[i++] != 0.0;
    log.records.push_back(r);
  }
  return log;
}

inline void save_flight_log(const FlightLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write flight log " + path);
  write_flight_log_csv(log, out);
}

inline FlightLog load_flight_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read flight log " + path);
  return read_flight_log_csv(in);
}

}  // namespace nlander
