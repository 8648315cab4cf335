#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <utility>

#include "json.hpp"
#include "pann/errors.hpp"
#include "pann/models.hpp"

namespace pann {

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline nlohmann::json stack_to_json(const LayerStack& st) {
  nlohmann::json j;
  j["input_dim"] = st.input_dim;
  j["width"] = st.width;
  j["depth"] = st.depth;
  j["monotone"] = st.monotone;
  j["positive_output"] = st.positive_output;
  nlohmann::json hidden = nlohmann::json::array();
  for (const HiddenLayer& h : st.hidden) {
    nlohmann::json hl;
    hl["wx"] = h.wx.w;
    hl["wz"] = h.wz.w;
    hl["b"] = h.b;
    hidden.push_back(std::move(hl));
  }
  j["hidden"] = std::move(hidden);
  j["out"] = {{"wz", st.out.wz}, {"wx", st.out.wx}, {"b", st.out.b}};
  j["gate_log_alpha"] = st.gate_log_alpha;
  return j;
}

inline std::vector<double> checked_flat(const nlohmann::json& j,
                                        const char* what,
                                        std::size_t expect) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != expect)
    throw FormatError(std::string("model JSON: ") + what + " has " +
                      std::to_string(v.size()) + " entries, expected " +
                      std::to_string(expect));
  return v;
}

inline LayerStack stack_from_json(const nlohmann::json& j) {
  LayerStack st;
  st.input_dim = j.at("input_dim").get<int>();
  st.width = j.at("width").get<int>();
  st.depth = j.at("depth").get<int>();
  st.monotone = j.at("monotone").get<bool>();
  st.positive_output = j.at("positive_output").get<bool>();
  if (st.input_dim < 1 || st.width < 1 || st.depth < 1)
    throw FormatError("model JSON: non-positive stack dimensions");
  const auto& hidden = j.at("hidden");
  if (static_cast<int>(hidden.size()) != st.depth)
    throw FormatError("model JSON: hidden layer count does not match depth");
  const std::size_t w = static_cast<std::size_t>(st.width);
  const std::size_t in = static_cast<std::size_t>(st.input_dim);
  for (int l = 0; l < st.depth; ++l) {
    const auto& hl = hidden.at(static_cast<std::size_t>(l));
    HiddenLayer h;
    h.wx = Dense::zeros(st.width, st.input_dim);
    h.wx.w = checked_flat(hl.at("wx"), "hidden wx", w * in);
    if (l == 0) {
      if (!hl.at("wz").empty())
        throw FormatError("model JSON: first hidden layer must have empty wz");
      h.wz = Dense{};
    } else {
      h.wz = Dense::zeros(st.width, st.width);
      h.wz.w = checked_flat(hl.at("wz"), "hidden wz", w * w);
    }
    h.b = checked_flat(hl.at("b"), "hidden b", w);
    st.hidden.push_back(std::move(h));
  }
  const auto& out = j.at("out");
  st.out.wz = checked_flat(out.at("wz"), "out wz", w);
  st.out.wx = checked_flat(out.at("wx"), "out wx", in);
  st.out.b = out.at("b").get<double>();
  st.gate_log_alpha = j.at("gate_log_alpha").get<std::vector<double>>();
  if (!st.gate_log_alpha.empty() &&
      st.gate_log_alpha.size() != weight_count(st))
    throw FormatError("model JSON: gate_log_alpha size mismatch");
  return st;
}

}  // namespace detail

inline nlohmann::json model_to_json(const EnergyModel& m) {
  nlohmann::json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = to_string(m.kind());
  switch (m.kind()) {
    case ModelKind::OgdenIncompressible: {
      const auto& p =
          dynamic_cast<const OgdenIncompressibleModel&>(m).params();
      j["params"] = {{"mu", p.mu}, {"alpha", p.alpha}};
      break;
    }
    case ModelKind::OgdenCompressible: {
      const auto& p = dynamic_cast<const OgdenCompressibleModel&>(m).params();
      j["params"] = {{"mu", p.mu},
                     {"alpha", p.alpha},
                     {"kappa", p.kappa},
                     {"beta", p.beta}};
      break;
    }
    case ModelKind::GenOgdenInvariant: {
      const auto& p = dynamic_cast<const GenOgdenModel&>(m).params();
      j["params"] = {
          {"c_i0", p.c_i0}, {"c_0j", p.c_0j}, {"kappa", p.kappa}};
      break;
    }
    case ModelKind::LedretOgden: {
      const auto& p = dynamic_cast<const LedretModel&>(m).params();
      j["params"] = {
          {"a_terms", p.a_terms}, {"b_terms", p.b_terms}, {"kappa", p.kappa}};
      break;
    }
    default: {
      const auto& pm = dynamic_cast<const PannModel&>(m);
      j["p"] = pm.p;
      j["epsilon_growth"] = pm.eps_growth;
      j["offsets"] = {pm.offsets[0], pm.offsets[1], pm.offsets[2]};
      j["data_fingerprint"] = pm.data_fingerprint;
      if (pm.train_delta)
        j["train_delta"] = *pm.train_delta;
      else
        j["train_delta"] = nullptr;
      nlohmann::json stacks;
      pm.visit_stacks([&](const char* name, const LayerStack& st) {
        stacks[name] = detail::stack_to_json(st);
      });
      j["stacks"] = std::move(stacks);
      break;
    }
  }
  return j;
}

inline std::unique_ptr<EnergyModel> model_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("schema_version") ||
        j.at("schema_version").get<int>() != kSchemaVersion)
      throw FormatError("model JSON: missing or unsupported schema_version");
    const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
      case ModelKind::OgdenIncompressible: {
        OgdenParams p;
        p.mu = j.at("params").at("mu").get<std::vector<double>>();
        p.alpha = j.at("params").at("alpha").get<std::vector<double>>();
        return std::make_unique<OgdenIncompressibleModel>(std::move(p));
      }
      case ModelKind::OgdenCompressible: {
        OgdenParams p;
        p.mu = j.at("params").at("mu").get<std::vector<double>>();
        p.alpha = j.at("params").at("alpha").get<std::vector<double>>();
        p.kappa = j.at("params").at("kappa").get<double>();
        p.beta = j.at("params").at("beta").get<double>();
        return std::make_unique<OgdenCompressibleModel>(std::move(p));
      }
      case ModelKind::GenOgdenInvariant: {
        GenOgdenParams p;
        p.c_i0 = j.at("params").at("c_i0").get<std::vector<double>>();
        p.c_0j = j.at("params").at("c_0j").get<std::vector<double>>();
        p.kappa = j.at("params").at("kappa").get<double>();
        return std::make_unique<GenOgdenModel>(std::move(p));
      }
      case ModelKind::LedretOgden: {
        LedretParams p;
        p.a_terms = j.at("params").at("a_terms").get<std::vector<double>>();
        p.b_terms = j.at("params").at("b_terms").get<std::vector<double>>();
        p.kappa = j.at("params").at("kappa").get<double>();
        return std::make_unique<LedretModel>(std::move(p));
      }
      default: {
        auto pm = std::make_unique<PannModel>();
        pm->model_kind = kind;
        pm->p = j.at("p").get<double>();
        pm->eps_growth = j.at("epsilon_growth").get<double>();
        const auto off = j.at("offsets").get<std::vector<double>>();
        if (off.size() != 3)
          throw FormatError("model JSON: offsets must have 3 entries");
        pm->offsets = {off[0], off[1], off[2]};
        pm->data_fingerprint = j.at("data_fingerprint").get<std::string>();
        if (j.contains("train_delta") && !j.at("train_delta").is_null())
          pm->train_delta = j.at("train_delta").get<double>();
        const auto& stacks = j.at("stacks");
        auto holder = [&](const char* phi, const char* rho) {
          HolderSet hs;
          if (stacks.contains(phi))
            hs.phi = detail::stack_from_json(stacks.at(phi));
          hs.rho = detail::stack_from_json(stacks.at(rho));
          hs.p = pm->p;
          return hs;
        };
        switch (kind) {
          case ModelKind::LambdaPann:
          case ModelKind::LambdaPannNoPhi:
            pm->holder_f = holder("phi_f", "rho_f");
            pm->holder_cof = holder("phi_cof", "rho_cof");
            pm->outer = detail::stack_from_json(stacks.at("outer"));
            break;
          case ModelKind::LambdaPannAdditive:
            pm->holder_f = holder("phi_f", "rho_f");
            pm->holder_cof = holder("phi_cof", "rho_cof");
            pm->psi_j = detail::stack_from_json(stacks.at("psi_j"));
            break;
          case ModelKind::IPann:
            pm->outer = detail::stack_from_json(stacks.at("outer"));
            break;
          default:
            break;
        }
        const bool wants_phi = kind == ModelKind::LambdaPann ||
                               kind == ModelKind::LambdaPannAdditive;
        if (pm->holder_f &&
            (pm->holder_f->phi.has_value() != wants_phi ||
             pm->holder_cof->phi.has_value() != wants_phi))
          throw FormatError("model JSON: phi stacks inconsistent with kind");
        return pm;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model JSON: ") + e.what());
  }
}

inline std::string model_dumps(const EnergyModel& m) {
  return model_to_json(m).dump(2) + "\n";
}

inline void model_save(const EnergyModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << model_dumps(m);
  if (!out) throw FormatError("write failed for '" + path + "'");
}

inline std::unique_ptr<EnergyModel> model_loads(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline std::unique_ptr<EnergyModel> model_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  try {
    return model_loads(text);
  } catch (FormatError& e) {
    throw FormatError(std::string(e.what()) + " (file " + path + ")");
  }
}

}  // namespace pann
