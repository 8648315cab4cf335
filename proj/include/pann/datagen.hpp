#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pann/errors.hpp"
#include "pann/kinematics.hpp"
#include "pann/loading.hpp"
#include "pann/manifest.hpp"
#include "pann/models.hpp"
#include "pann/rng.hpp"
#include "pann/serialize.hpp"

namespace pann {

enum class StressMeasure { Cauchy, Nominal };

inline std::string to_string(StressMeasure m) {
  return m == StressMeasure::Cauchy ? "cauchy" : "nominal";
}

inline StressMeasure measure_from_string(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "cauchy") return StressMeasure::Cauchy;
  if (s == "nominal") return StressMeasure::Nominal;
  throw FormatError("unknown stress measure '" + s + "'");
}

struct SampleConfig {
  double delta = 0.2;  // entry perturbation half-width
  int n = 0;           // number of records
  std::uint64_t seed = 0;
};

struct Record {
  DefGrad f{};
  std::array<double, 6> sigma{};  // Voigt order xx,yy,zz,xy,xz,yz
};

struct DatasetMeta {
  std::string kind;         // ground-truth model kind
  std::string fingerprint;  // ground-truth parameter fingerprint
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::string generator_version = kToolVersion;
  std::uint64_t attempts = 0;  // sampler draws including rejections
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Record> records;
};

namespace detail {
inline constexpr std::uint64_t kDatagenLabel = 0x646174616765006eULL;
}  // namespace detail

// One raw draw of Eq.-style entries: diagonal 1 + U(-d, d), off-diagonal
// U(-d, d), row-major draw order.
inline DefGrad sample_defgrad_once(rng::Stream& rng, double delta) {
  DefGrad f{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double u = rng.next_uniform(-delta, delta);
      f[i][j] = (i == j) ? 1.0 + u : u;
    }
  return f;
}

// Rejection sampling: keep a draw only if det F > 0 and the characteristic
// discriminant of F itself (real-eigenvalue condition) is nonnegative.
inline DefGrad sample_defgrad(rng::Stream& rng, double delta,
                              std::uint64_t* attempts = nullptr) {
  if (!(delta > 0.0)) throw DomainError("sample_defgrad: delta must be > 0");
  for (std::uint64_t k = 0; k < 1000000; ++k) {
    const DefGrad f = sample_defgrad_once(rng, delta);
    if (attempts) ++*attempts;
    const double i3 = det3(f);
    if (!(i3 > 0.0)) continue;
    const double i1 = trace(f);
    const double i2 = trace(cofactor(f));
    if (admissibility_discriminant(i1, i2, i3) >= 0.0) return f;
  }
  throw RejectionOverflow(
      "sample_defgrad: 1e6 consecutive rejections (delta = " +
      std::to_string(delta) + ")");
}

// Three (mu, alpha) pairs with matched signs,|alpha| in (1, 5], kappa wide
// enough to cover the reference materials, beta in (1, 2).
inline OgdenParams sample_ogden_params(std::uint64_t seed) {
  rng::Stream rng(rng::mix(seed, 0x6f6764656e706172ULL));
  OgdenParams p;
  for (int i = 0; i < 3; ++i) {
    double mu = 0.0, alpha = 0.0;
    do {
      mu = rng.next_uniform(-5.0, 5.0);
      const double sign = rng.next_unit() < 0.5 ? -1.0 : 1.0;
      alpha = sign * rng.next_uniform(1.0, 5.0);
      if ((mu < 0.0) != (alpha < 0.0)) mu = -mu;
    } while (!(mu * alpha > 0.0) || !(std::abs(alpha) > 1.0));
    p.mu.push_back(mu);
    p.alpha.push_back(alpha);
  }
  p.kappa = rng.next_uniform(10.0, 55.0);
  p.beta = rng.next_uniform(1.0, 2.0);
  validate(p, true);
  return p;
}

// Term counts from {2,3}, coefficients from U(0.1, 3), kappa from U(0.1, 1).
inline GenOgdenParams sample_genogden_params(std::uint64_t seed) {
  rng::Stream rng(rng::mix(seed, 0x67656e6f67646570ULL));
  GenOgdenParams p;
  const int m = rng.next_unit() < 0.5 ? 2 : 3;
  const int n = rng.next_unit() < 0.5 ? 2 : 3;
  for (int i = 0; i < m; ++i) p.c_i0.push_back(rng.next_uniform(0.1, 3.0));
  for (int j = 0; j < n; ++j) p.c_0j.push_back(rng.next_uniform(0.1, 3.0));
  p.kappa = rng.next_uniform(0.1, 1.0);
  validate(p);
  return p;
}

inline std::string model_fingerprint(const EnergyModel& m) {
  return text_fingerprint(model_to_json(m).dump());
}

inline Dataset build_dataset(const EnergyModel& truth,
                             const SampleConfig& cfg) {
  if (cfg.n <= 0) throw DomainError("build_dataset: n must be > 0");
  if (!(cfg.delta > 0.0))
    throw DomainError("build_dataset: delta must be > 0");
  Dataset ds;
  ds.meta.kind = to_string(truth.kind());
  ds.meta.fingerprint = model_fingerprint(truth);
  ds.meta.delta = cfg.delta;
  ds.meta.seed = cfg.seed;
  rng::Stream rng(rng::mix(cfg.seed, detail::kDatagenLabel));
  ds.records.reserve(static_cast<std::size_t>(cfg.n));
  for (int k = 0; k < cfg.n; ++k) {
    Record r;
    r.f = sample_defgrad(rng, cfg.delta, &ds.meta.attempts);
    const SpectralState s = spectral(r.f);
    const std::array<double, 3> iu = invariants_u(s);
    if (!admissible(iu[0], iu[1], iu[2]))
      throw DomainError("build_dataset: emitted sample fails admissibility");
    r.sigma = to_voigt(cauchy_stress(truth, r.f));
    ds.records.push_back(r);
  }
  return ds;
}

inline nlohmann::json meta_to_json(const DatasetMeta& m) {
  nlohmann::json j;
  j["kind"] = m.kind;
  j["fingerprint"] = m.fingerprint;
  j["delta"] = m.delta;
  j["seed"] = m.seed;
  j["generator_version"] = m.generator_version;
  j["attempts"] = m.attempts;
  return j;
}

inline std::string dataset_dumps(const Dataset& ds) {
  std::string out;
  nlohmann::json header;
  header["meta"] = meta_to_json(ds.meta);
  out += header.dump();
  out += '\n';
  for (const Record& r : ds.records) {
    nlohmann::json j;
    j["F"] = {r.f[0][0], r.f[0][1], r.f[0][2], r.f[1][0], r.f[1][1],
              r.f[1][2], r.f[2][0], r.f[2][1], r.f[2][2]};
    j["sigma"] = r.sigma;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << dataset_dumps(ds);
  if (!out) throw FormatError("write failed for '" + path + "'");
}

inline Dataset dataset_loads(const std::string& text) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " +
                        e.what());
    }
    try {
      if (!have_header) {
        const auto& m = j.at("meta");
        ds.meta.kind = m.at("kind").get<std::string>();
        ds.meta.fingerprint = m.at("fingerprint").get<std::string>();
        ds.meta.delta = m.at("delta").get<double>();
        ds.meta.seed = m.at("seed").get<std::uint64_t>();
        ds.meta.generator_version =
            m.at("generator_version").get<std::string>();
        ds.meta.attempts = m.at("attempts").get<std::uint64_t>();
        have_header = true;
        continue;
      }
      const auto fv = j.at("F").get<std::vector<double>>();
      const auto sv = j.at("sigma").get<std::vector<double>>();
      if (fv.size() != 9 || sv.size() != 6)
        throw FormatError("dataset line " + std::to_string(lineno) +
                          ": F must have 9 entries and sigma 6");
      Record r;
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c)
          r.f[i][c] = fv[static_cast<std::size_t>(i) * 3 + c];
      for (int i = 0; i < 6; ++i) r.sigma[static_cast<std::size_t>(i)] = sv[static_cast<std::size_t>(i)];
      ds.records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  if (!have_header)
    throw FormatError("dataset: missing metadata header line");
  return ds;
}

inline Dataset load_dataset(const std::string& path) {
  return dataset_loads(read_file(path));
}

// ---------------------------------------------------------------------------
// Experimental mode-curve data: CSV `mode,stretch,stress,measure`.

struct ExperimentalPoint {
  ModeSpec spec;
  double stress = 0.0;
  StressMeasure measure = StressMeasure::Cauchy;
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& s, int lineno,
                           const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw FormatError("experimental CSV line " + std::to_string(lineno) +
                      ": bad " + what + " '" + s + "'");
  }
}
}  // namespace detail

inline std::vector<ExperimentalPoint> load_experimental(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<ExperimentalPoint> out;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (!have_header) {
      if (cells != std::vector<std::string>{"mode", "stretch", "stress",
                                            "measure"})
        throw FormatError("experimental CSV line " + std::to_string(lineno) +
                          ": header must be 'mode,stretch,stress,measure'");
      have_header = true;
      continue;
    }
    if (cells.size() != 4)
      throw FormatError("experimental CSV line " + std::to_string(lineno) +
                        ": expected 4 fields, got " +
                        std::to_string(cells.size()));
    ExperimentalPoint pt;
    pt.spec.mode = mode_from_string(cells[0]);
    pt.spec.lambda = detail::parse_double(cells[1], lineno, "stretch");
    if (!(pt.spec.lambda > 0.0))
      throw FormatError("experimental CSV line " + std::to_string(lineno) +
                        ": stretch must be > 0");
    pt.stress = detail::parse_double(cells[2], lineno, "stress");
    pt.measure = measure_from_string(cells[3]);
    out.push_back(pt);
  }
  if (out.empty())
    std::cerr << "warning: no experimental records in " << path << "\n";
  return out;
}

}  // namespace pann
