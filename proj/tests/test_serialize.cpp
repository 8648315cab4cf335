#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "pann/fixtures.hpp"
#include "pann/manifest.hpp"
#include "pann/serialize.hpp"

using namespace pann;

namespace {

// Bitwise equality of two models over a probe of spectral states.
void check_same_response(const EnergyModel& a, const EnergyModel& b) {
  REQUIRE(a.kind() == b.kind());
  rng::Stream rs(55);
  for (int i = 0; i < 20; ++i) {
    const SpectralState s = spectral_from_stretches(
        rs.next_uniform(0.6, 1.7), rs.next_uniform(0.6, 1.7),
        rs.next_uniform(0.6, 1.7));
    CHECK(a.energy(s) == b.energy(s));
    const Vec3 ga = a.stretch_derivatives(s);
    const Vec3 gb = b.stretch_derivatives(s);
    CHECK(ga == gb);
  }
}

}  // namespace

TEST_CASE("text fingerprints are the reference FNV-1a values",
          "[serialize]") {
  CHECK(text_fingerprint("") == "fnv1a:cbf29ce484222325");
  CHECK(text_fingerprint("abc") == "fnv1a:e71fa2190541574b");
  CHECK(text_fingerprint("abc") == text_fingerprint("abc"));
  CHECK(text_fingerprint("abd") != text_fingerprint("abc"));
}

TEST_CASE("file fingerprint hashes the raw bytes", "[serialize]") {
  const auto path = std::filesystem::temp_directory_path() / "pann-fp.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "abc";
  }
  CHECK(file_fingerprint(path.string()) == "fnv1a:e71fa2190541574b");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(file_fingerprint(path.string()), FormatError);
}

TEST_CASE("closed-form models round-trip bitwise", "[serialize]") {
  const OgdenCompressibleModel oc(ogden_fixture(3));
  check_same_response(oc, *model_loads(model_dumps(oc)));

  OgdenParams inc;
  inc.mu = {1.25, -0.5};
  inc.alpha = {2.5, -1.5};
  const OgdenIncompressibleModel oi(inc);
  const auto oi2 = model_loads(model_dumps(oi));
  CHECK(oi2->incompressible());
  check_same_response(oi, *oi2);

  const GenOgdenModel gi(genogden_fixture(7));
  check_same_response(gi, *model_loads(model_dumps(gi)));

  const LedretModel le(LedretParams{{2.0, 1.5}, {1.2}, 0.7});
  check_same_response(le, *model_loads(model_dumps(le)));
}

TEST_CASE("neural models round-trip bitwise", "[serialize]") {
  for (ModelKind kind :
       {ModelKind::LambdaPann, ModelKind::LambdaPannNoPhi,
        ModelKind::LambdaPannAdditive, ModelKind::IPann}) {
    const auto m = make_pann(kind, 3.0, 2, 6, 17);
    const auto back = model_loads(model_dumps(*m));
    check_same_response(*m, *back);
    const auto& pm = dynamic_cast<const PannModel&>(*back);
    const auto& orig = dynamic_cast<const PannModel&>(*m);
    CHECK(pm.offsets == orig.offsets);
    CHECK(pm.p == orig.p);
    CHECK(pm.eps_growth == orig.eps_growth);
    CHECK(pm.total_params() == orig.total_params());
  }
}

TEST_CASE("gates and metadata survive the round trip", "[serialize]") {
  auto m = make_pann(ModelKind::LambdaPann, 3.0, 1, 5, 23);
  m->visit_stacks([](const std::string&, LayerStack& st) {
    enable_gates(st, 2.2);
    st.gate_log_alpha.front() = -40.0;  // one pruned weight
  });
  m->data_fingerprint = "fnv1a:0123456789abcdef";
  m->train_delta = 0.2;
  const auto back = model_loads(model_dumps(*m));
  const auto& pm = dynamic_cast<const PannModel&>(*back);
  CHECK(pm.has_gates());
  CHECK(pm.active_params() == m->active_params());
  CHECK(pm.active_params() < pm.total_params());
  CHECK(pm.data_fingerprint == "fnv1a:0123456789abcdef");
  REQUIRE(pm.train_delta.has_value());
  CHECK(*pm.train_delta == 0.2);
  check_same_response(*m, *back);

  // Absent train_delta serializes as null and comes back empty.
  const auto plain = make_pann(ModelKind::IPann, 3.0, 1, 4, 2);
  const auto back2 = model_loads(model_dumps(*plain));
  CHECK_FALSE(dynamic_cast<const PannModel&>(*back2).train_delta.has_value());
}

TEST_CASE("model files round-trip through disk", "[serialize]") {
  const auto path = std::filesystem::temp_directory_path() / "pann-m.json";
  const auto m = make_pann(ModelKind::LambdaPann, 2.0, 1, 4, 8);
  model_save(*m, path.string());
  const auto back = model_load(path.string());
  check_same_response(*m, *back);
  // Serialization itself is deterministic text.
  CHECK(model_dumps(*back) == model_dumps(*m));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(model_load(path.string()), FormatError);
}

TEST_CASE("malformed model JSON is rejected", "[serialize]") {
  CHECK_THROWS_AS(model_loads("not json at all"), FormatError);
  CHECK_THROWS_AS(model_loads("{}"), FormatError);
  CHECK_THROWS_AS(model_loads(R"({"schema_version": 99, "kind": "i-pann"})"),
                  FormatError);
  CHECK_THROWS_AS(
      model_loads(R"({"schema_version": 1, "kind": "mystery"})"),
      FormatError);
  // Structurally broken neural payloads.
  const auto m = make_pann(ModelKind::IPann, 3.0, 1, 4, 4);
  nlohmann::json j = model_to_json(*m);
  j["offsets"] = {1.0, 2.0};
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  j = model_to_json(*m);
  j["stacks"]["outer"]["depth"] = 3;
  CHECK_THROWS_AS(model_from_json(j), FormatError);
  j = model_to_json(*m);
  j["stacks"]["outer"]["hidden"][0]["wx"] = {1.0};
  CHECK_THROWS_AS(model_from_json(j), FormatError);
}

TEST_CASE("manifests round-trip", "[serialize]") {
  RunManifest m;
  m.command = "gen";
  m.argv = {"pann", "gen", "--truth", "ogden-fixture:1"};
  m.seed = 42;
  m.inputs["data.jsonl"] = "fnv1a:cbf29ce484222325";
  m.outputs["model.json"] = "fnv1a:e71fa2190541574b";
  m.wall_seconds = 1.5;

  const auto path =
      std::filesystem::temp_directory_path() / "pann-manifest.json";
  manifest_save(m, path.string());
  const RunManifest back = manifest_load(path.string());
  CHECK(back.tool_version == m.tool_version);
  CHECK(back.command == "gen");
  CHECK(back.argv == m.argv);
  CHECK(back.seed == 42);
  CHECK(back.inputs == m.inputs);
  CHECK(back.outputs == m.outputs);
  CHECK(back.wall_seconds == 1.5);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(manifest_load(path.string()), FormatError);
  const auto bad = std::filesystem::temp_directory_path() / "pann-badmf.json";
  {
    std::ofstream out(bad);
    out << "{\"command\": 3}";
  }
  CHECK_THROWS_AS(manifest_load(bad.string()), FormatError);
  std::filesystem::remove(bad);
}
