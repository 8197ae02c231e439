#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oldroyd/energy.hpp"
#include "oldroyd/errors.hpp"
#include "oldroyd/field.hpp"
#include "oldroyd/leray.hpp"
#include "oldroyd/picard.hpp"

namespace oldroyd {

inline constexpr const char* kSeriesHeader =
    "t,F,G,H,dFdt,cert_margin,norm_u_L2,norm_gradu_L2,norm_Au_L2,norm_tau_H2,norm_dtu_L2,norm_dttau_L2,"
    "norm_Pdivtau_L2,norm_curldivtau_L2,picard_iters";

/// Shortest round-trip-safe decimal form used by every text output (17 significant digits).
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string series_row(const EnergyReport& r) {
  const double values[] = {r.t,
                           r.f_val,
                           r.g_val,
                           r.h_val,
                           r.df_dt,
                           r.certificate_margin,
                           r.norm_u(),
                           r.norm_grad_u(),
                           r.norm_au(),
                           r.norm_tau_h2(),
                           r.norm_du(),
                           r.norm_dtau(),
                           r.norm_pdiv_tau(),
                           r.norm_curl_div_tau()};
  std::string line;
  for (double v : values) {
    line += format_double(v);
    line += ',';
  }
  line += std::to_string(r.picard_iters);
  return line;
}

/// Appends rows to an energy time-series CSV.
class SeriesWriter {
 public:
  explicit SeriesWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot create " + path.string());
    out_ << kSeriesHeader << '\n';
  }
  void write(const EnergyReport& r) {
    out_ << series_row(r) << '\n';
    if (!out_) throw IoError("failed writing time series");
  }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

/// Rows of a time-series CSV as reports; only t, F, G, H, the norms and picard_iters are restored.
inline std::vector<EnergyReport> read_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kSeriesHeader) throw IoError(path.string() + " has an unexpected header");
  std::vector<EnergyReport> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 15) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 15 columns");
    EnergyReport r;
    r.t = v[0];
    r.f_val = v[1];
    r.g_val = v[2];
    r.h_val = v[3];
    r.df_dt = v[4];
    r.certificate_margin = v[5];
    r.norms.u = v[6] * v[6];
    r.norms.grad_u = v[7] * v[7];
    r.norms.au = v[8] * v[8];
    r.norms.tau_h2 = v[9] * v[9];
    r.norms.du = v[10] * v[10];
    r.norms.dtau = v[11] * v[11];
    r.norms.pdiv_tau = v[12] * v[12];
    r.norms.curl_div_tau = v[13] * v[13];
    r.picard_iters = static_cast<int>(v[14]);
    rows.push_back(r);
  }
  return rows;
}

namespace detail {

// All checkpoint scalars are little-endian on disk.
template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T))) throw IoError("checkpoint is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

inline void put_array(std::ostream& out, std::span<const double> v) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (double x : v) put(out, x);
  }
}

inline void get_array(std::istream& in, std::span<double> v) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)))) {
      throw IoError("checkpoint is truncated");
    }
  } else {
    for (double& x : v) x = get<double>(in);
  }
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary snapshot: magic "OBCK", version, dim, n per axis, box lengths, t, (re, we, alpha, a),
/// then u components and the tau upper triangle as row-major f64 arrays.
template <int Dim>
void write_checkpoint(const std::filesystem::path& path, const FlowState<Dim>& state, const PhysicalParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create checkpoint " + path.string());
  const auto& spec = state.grid().spec();
  out.write("OBCK", 4);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(Dim));
  for (int d = 0; d < Dim; ++d) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.n[d]));
  for (int d = 0; d < Dim; ++d) detail::put<double>(out, spec.box_length[d]);
  detail::put<double>(out, state.t);
  detail::put<double>(out, params.re);
  detail::put<double>(out, params.we);
  detail::put<double>(out, params.alpha);
  detail::put<double>(out, params.a);
  for (const auto& c : state.u.c) detail::put_array(out, c.values());
  for (const auto& c : state.tau.c) detail::put_array(out, c.values());
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

template <int Dim>
struct Checkpoint {
  FlowState<Dim> state;
  PhysicalParams params;
};

/// Dimension stored in a checkpoint header.
inline int checkpoint_dim(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "OBCK", 4) != 0) throw IoError(path.string() + " is not a checkpoint");
  (void)detail::get<std::uint32_t>(in);
  return static_cast<int>(detail::get<std::uint32_t>(in));
}

template <int Dim>
Checkpoint<Dim> read_checkpoint(const std::filesystem::path& path, bool dealias = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "OBCK", 4) != 0) throw IoError(path.string() + " is not a checkpoint");
  const auto version = detail::get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto dim = detail::get<std::uint32_t>(in);
  if (dim != static_cast<std::uint32_t>(Dim)) throw IoError("checkpoint dimension does not match");
  GridSpec<Dim> spec;
  spec.dealias = dealias;
  for (int d = 0; d < Dim; ++d) spec.n[d] = static_cast<int>(detail::get<std::uint32_t>(in));
  for (int d = 0; d < Dim; ++d) spec.box_length[d] = detail::get<double>(in);
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("checkpoint grid is invalid: ") + e.what());
  }
  const Grid<Dim> grid(spec);
  Checkpoint<Dim> ck;
  ck.state.t = detail::get<double>(in);
  ck.params.re = detail::get<double>(in);
  ck.params.we = detail::get<double>(in);
  ck.params.alpha = detail::get<double>(in);
  ck.params.a = detail::get<double>(in);
  for (auto& c : ck.state.u.c) {
    RealBuffer v(grid.real_size());
    detail::get_array(in, v);
    c = ScalarField<Dim>(grid, std::move(v));
  }
  for (auto& c : ck.state.tau.c) {
    RealBuffer v(grid.real_size());
    detail::get_array(in, v);
    c = ScalarField<Dim>(grid, std::move(v));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError("checkpoint has trailing bytes");
  return ck;
}

}  // namespace oldroyd
