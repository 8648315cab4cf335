#pragma once

#include <memory>
#include <string>

#include "pann/errors.hpp"
#include "pann/models.hpp"

namespace pann {

// Built-in reference materials: ten compressible Ogden parameter sets and ten
// generalized-Ogden parameter sets, addressable 1..10.  Shipping them as
// fixtures makes every benchmark reproducible without re-sampling.

inline OgdenParams ogden_fixture(int index) {
  // rows: mu1 mu2 mu3 alpha1 alpha2 alpha3 kappa beta
  static const double rows[10][8] = {
      {-2.933, 0.101, 2.832, -1.019, 3.711, 2.08, 47.592, 1.963},
      {0.621, -1.396, 0.775, 4.878, -3.244, 1.075, 53.929, 1.241},
      {1.786, -2.949, 1.163, 1.263, -1.174, 2.581, 37.179, 1.206},
      {3.62, -2.375, -1.244, 1.268, -1.29, -1.796, 17.555, 1.109},
      {-0.866, 0.375, 0.491, -1.672, 3.934, 2.634, 13.146, 1.938},
      {1.827, -2.39, 0.563, 2.061, -1.537, 2.208, 15.135, 1.325},
      {0.294, 0.963, -1.258, 2.62, 1.593, -3.729, 12.592, 1.652},
      {-1.544, 2.315, -0.771, -2.943, 1.548, -2.374, 22.143, 1.307},
      {-0.195, -2.232, 2.427, -3.508, -1.861, 1.604, 27.666, 1.109},
      {-0.052, -2.509, 2.561, -1.535, -1.568, 1.874, 22.642, 1.256},
  };
  if (index < 1 || index > 10)
    throw DomainError("ogden_fixture: index must be 1..10, got " +
                      std::to_string(index));
  const double* r = rows[index - 1];
  OgdenParams p;
  p.mu = {r[0], r[1], r[2]};
  p.alpha = {r[3], r[4], r[5]};
  p.kappa = r[6];
  p.beta = r[7];
  return p;
}

inline GenOgdenParams genogden_fixture(int index) {
  // rows: c10 c20 c30 c01 c02 c03 kappa; nan marks an absent term
  constexpr double na = -1.0;  // sentinel: term not present
  static const double rows[10][7] = {
      {1.583, 0.133, na, 2.9, 0.342, 0.248, 0.873},
      {1.302, 0.261, 0.246, 0.668, 0.245, 0.143, 0.831},
      {0.875, 0.181, na, 1.433, 0.312, 0.229, 0.804},
      {0.786, 0.577, na, 1.268, 1.334, na, 0.86},
      {1.221, 0.126, na, 2.874, 0.228, na, 0.493},
      {0.909, 0.318, 0.18, 2.604, 0.238, na, 0.743},
      {2.892, 0.248, na, 0.869, 0.312, 0.246, 0.931},
      {0.567, 0.533, 0.408, 0.253, 0.236, na, 0.954},
      {0.967, 0.906, 0.241, 0.341, 0.185, na, 0.968},
      {2.234, 0.13, na, 2.762, 0.109, na, 0.391},
  };
  if (index < 1 || index > 10)
    throw DomainError("genogden_fixture: index must be 1..10, got " +
                      std::to_string(index));
  const double* r = rows[index - 1];
  GenOgdenParams p;
  for (int i = 0; i < 3; ++i)
    if (r[i] != na) p.c_i0.push_back(r[i]);
  for (int i = 3; i < 6; ++i)
    if (r[i] != na) p.c_0j.push_back(r[i]);
  p.kappa = r[6];
  return p;
}

// Parse a ground-truth selector of the form "ogden-fixture:N" or
// "genogden-fixture:N" into the corresponding closed-form model.
inline std::unique_ptr<EnergyModel> make_fixture_truth(const std::string& sel) {
  const auto colon = sel.find(':');
  if (colon == std::string::npos)
    throw FormatError("truth selector '" + sel +
                      "' must look like ogden-fixture:N");
  const std::string family = sel.substr(0, colon);
  int index = 0;
  try {
    std::size_t used = 0;
    index = std::stoi(sel.substr(colon + 1), &used);
    if (used != sel.size() - colon - 1) throw std::invalid_argument("");
  } catch (const std::exception&) {
    throw FormatError("truth selector '" + sel + "' has a malformed index");
  }
  if (family == "ogden-fixture")
    return std::make_unique<OgdenCompressibleModel>(ogden_fixture(index));
  if (family == "genogden-fixture")
    return std::make_unique<GenOgdenModel>(genogden_fixture(index));
  throw FormatError("unknown fixture family '" + family + "'");
}

}  // namespace pann
