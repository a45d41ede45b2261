#include "peal/core.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace peal {

void HolsteinParams::validate() const {
  if (L < 4 || L % 2 != 0) throw ParameterError("L must be even and >= 4, got " + std::to_string(L));
  if (t_nn != 1.0) throw ParameterError("t_nn must equal 1 (energy unit)");
  if (!(dt > 0) || !std::isfinite(dt)) throw ParameterError("dt must be > 0");
  if (!(M > 0) || !std::isfinite(M)) throw ParameterError("M must be > 0");
  if (!(k > 0) || !std::isfinite(k)) throw ParameterError("k must be > 0");
  if (!(gamma >= 0) || !std::isfinite(gamma)) throw ParameterError("gamma must be >= 0");
  if (!std::isfinite(g)) throw ParameterError("g must be finite");
  if (filling < 0 || (filling > 0 && filling >= L))
    throw ParameterError("filling must satisfy 0 < filling < L");
}

DimensionlessScales dimensionless_scales(const HolsteinParams& p) {
  if (!(p.g > 0)) throw ParameterError("g must be > 0 for dimensionless scales");
  if (!(p.k > 0)) throw ParameterError("k must be > 0 for dimensionless scales");
  if (!(p.M > 0)) throw ParameterError("M must be > 0 for dimensionless scales");
  DimensionlessScales s{};
  s.omega = std::sqrt(p.k / p.M);
  s.Q0 = p.g / p.k;
  s.P0 = p.M * s.omega * p.g / p.k;
  s.lambda = p.g * p.g / (4.0 * p.k * p.t_nn);
  return s;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(splitmix64(seed) ^ h) ^ index);
}

State sample_initial_state(const HolsteinParams& params, double q_std, std::uint64_t seed) {
  if (!(q_std >= 0)) throw ParameterError("q_std must be >= 0");
  State s;
  s.t = 0;
  s.Q = Eigen::VectorXd::Zero(params.L);
  s.P = Eigen::VectorXd::Zero(params.L);
  if (q_std == 0) return s;
  Rng rng = make_stream(seed, "initial-state");
  std::normal_distribution<double> normal(0.0, q_std);
  for (int i = 0; i < params.L; ++i) s.Q(i) = normal(rng);
  return s;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trajectory_header(int L) {
  std::string h = "t";
  for (const char* block : {"Q", "P", "n"})
    for (int i = 0; i < L; ++i) h += "," + std::string(block) + "_" + std::to_string(i);
  h += ",cdw,hop,nnn,gs_energy";
  return h;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int L = traj.params.L;
  if (!traj.metadata.empty()) os << "# " << traj.metadata << '\n';
  os << trajectory_header(L) << '\n';
  std::string row;
  for (const auto& s : traj.samples) {
    row = format_double(s.state.t);
    for (int i = 0; i < L; ++i) row += ',' + format_double(s.state.Q(i));
    for (int i = 0; i < L; ++i) row += ',' + format_double(s.state.P(i));
    for (int i = 0; i < L; ++i) row += ',' + format_double(s.obs.n(i));
    row += ',' + format_double(s.obs.cdw);
    row += ',' + format_double(s.obs.hop);
    row += ',' + format_double(s.obs.nnn);
    row += ',' + format_double(s.obs.gs_energy);
    os << row << '\n';
  }
}

namespace {

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
  std::vector<double> out;
  const char* p = line.c_str();
  while (*p) {
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p) throw DataError("unparsable number on line " + std::to_string(line_no));
    out.push_back(v);
    p = end;
    if (*p == ',') ++p;
    else if (*p == '\r' || *p == '\0') break;
    else throw DataError("unexpected character on line " + std::to_string(line_no));
  }
  return out;
}

}  // namespace

Trajectory read_trajectory_csv(std::istream& is, const HolsteinParams& params) {
  Trajectory traj;
  traj.params = params;
  int L = params.L;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (traj.metadata.empty() && !header_seen) {
        traj.metadata = line.substr(line.size() > 1 ? 2 : 1);
        traj.params = apply_metadata(params, traj.metadata);
        L = traj.params.L;
      }
      continue;
    }
    if (!header_seen) {
      if (line != trajectory_header(L))
        throw DataError("trajectory header does not match L=" + std::to_string(L));
      header_seen = true;
      continue;
    }
    auto v = parse_row(line, line_no);
    if (v.size() != static_cast<std::size_t>(3 * L + 5))
      throw DataError("wrong column count on line " + std::to_string(line_no));
    TrajectorySample s;
    s.state.t = v[0];
    s.state.Q = Eigen::Map<Eigen::VectorXd>(v.data() + 1, L);
    s.state.P = Eigen::Map<Eigen::VectorXd>(v.data() + 1 + L, L);
    s.obs.n = Eigen::Map<Eigen::VectorXd>(v.data() + 1 + 2 * L, L);
    s.obs.cdw = v[3 * L + 1];
    s.obs.hop = v[3 * L + 2];
    s.obs.nnn = v[3 * L + 3];
    s.obs.gs_energy = v[3 * L + 4];
    traj.samples.push_back(std::move(s));
  }
  if (!header_seen) throw DataError("trajectory file has no header");
  return traj;
}

std::string params_metadata(const HolsteinParams& p) {
  return "L=" + std::to_string(p.L) + " g=" + format_double(p.g) + " k=" + format_double(p.k) +
         " M=" + format_double(p.M) + " gamma=" + format_double(p.gamma) + " dt=" + format_double(p.dt) +
         " filling=" + std::to_string(p.electrons());
}

HolsteinParams apply_metadata(HolsteinParams base, const std::string& metadata) {
  std::istringstream is(metadata);
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    try {
      if (key == "L") base.L = std::stoi(val);
      else if (key == "g") base.g = std::stod(val);
      else if (key == "k") base.k = std::stod(val);
      else if (key == "M") base.M = std::stod(val);
      else if (key == "gamma") base.gamma = std::stod(val);
      else if (key == "dt") base.dt = std::stod(val);
      else if (key == "filling") base.filling = std::stoi(val);
    } catch (const std::exception&) {
      throw DataError("bad metadata value for " + key + ": '" + val + "'");
    }
  }
  return base;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  write_file_atomic(path, os.str());
}

Trajectory load_trajectory(const std::string& path, const HolsteinParams& params) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory file " + path);
  return read_trajectory_csv(in, params);
}

}  // namespace peal
