#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pann/datagen.hpp"
#include "pann/fixtures.hpp"

using namespace pann;
using Catch::Matchers::WithinAbs;

namespace {

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("deformation sampler is deterministic and admissible",
          "[datagen][property]") {
  rng::Stream a(rng::mix(3, detail::kDatagenLabel));
  rng::Stream b(rng::mix(3, detail::kDatagenLabel));
  for (int i = 0; i < 50; ++i) {
    const DefGrad fa = sample_defgrad(a, 0.3);
    const DefGrad fb = sample_defgrad(b, 0.3);
    CHECK(fa == fb);
  }
  rng::Stream c(1234);
  for (int i = 0; i < 10000; ++i) {
    const DefGrad f = sample_defgrad(c, 0.3);
    const double i3 = det3(f);
    CHECK(i3 > 0.0);
    CHECK(admissibility_discriminant(trace(f), trace(cofactor(f)), i3) >=
          0.0);
    // Entries stay inside the perturbation box.
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) {
        const double center = r == col ? 1.0 : 0.0;
        CHECK(std::abs(f[r][col] - center) <= 0.3);
      }
  }
}

TEST_CASE("reference material tables", "[datagen]") {
  const OgdenParams o1 = ogden_fixture(1);
  CHECK(o1.mu == std::vector<double>{-2.933, 0.101, 2.832});
  CHECK(o1.alpha == std::vector<double>{-1.019, 3.711, 2.08});
  CHECK(o1.kappa == 47.592);
  CHECK(o1.beta == 1.963);
  const OgdenParams o4 = ogden_fixture(4);
  CHECK(o4.mu[2] == -1.244);
  CHECK(o4.alpha[2] == -1.796);

  const GenOgdenParams g1 = genogden_fixture(1);
  CHECK(g1.c_i0 == std::vector<double>{1.583, 0.133});
  CHECK(g1.c_0j == std::vector<double>{2.9, 0.342, 0.248});
  CHECK(g1.kappa == 0.873);
  const GenOgdenParams g4 = genogden_fixture(4);
  CHECK(g4.c_i0.size() == 2);
  CHECK(g4.c_0j.size() == 2);

  // Every row satisfies its own validity constraints.
  for (int i = 1; i <= 10; ++i) {
    CHECK_NOTHROW(validate(ogden_fixture(i), true));
    CHECK_NOTHROW(validate(genogden_fixture(i)));
  }
  CHECK_THROWS_AS(ogden_fixture(0), DomainError);
  CHECK_THROWS_AS(ogden_fixture(11), DomainError);
  CHECK_THROWS_AS(genogden_fixture(-3), DomainError);
}

TEST_CASE("truth selectors", "[datagen]") {
  CHECK(make_fixture_truth("ogden-fixture:3")->kind() ==
        ModelKind::OgdenCompressible);
  CHECK(make_fixture_truth("genogden-fixture:10")->kind() ==
        ModelKind::GenOgdenInvariant);
  CHECK_THROWS_AS(make_fixture_truth("ogden-fixture"), FormatError);
  CHECK_THROWS_AS(make_fixture_truth("ogden-fixture:zan"), FormatError);
  CHECK_THROWS_AS(make_fixture_truth("mystery:1"), FormatError);
  CHECK_THROWS_AS(make_fixture_truth("ogden-fixture:0"), DomainError);
}

TEST_CASE("random material samplers emit valid parameters", "[datagen]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CHECK_NOTHROW(validate(sample_ogden_params(seed), true));
    CHECK_NOTHROW(validate(sample_genogden_params(seed)));
  }
  // Deterministic in the seed.
  CHECK(sample_ogden_params(7).mu == sample_ogden_params(7).mu);
  CHECK(sample_ogden_params(7).mu != sample_ogden_params(8).mu);
}

TEST_CASE("frozen dataset regression", "[datagen]") {
  const OgdenCompressibleModel truth(ogden_fixture(5));
  const Dataset ds = build_dataset(truth, {0.2, 200, 7});
  CHECK(ds.records.size() == 200);
  CHECK(ds.meta.attempts == 630);
  CHECK(ds.meta.kind == "ogden-compressible");
  CHECK(ds.meta.fingerprint == "fnv1a:845644004ac7b286");
  CHECK(ds.meta.generator_version == "0.1.0");
  CHECK(ds.meta.delta == 0.2);
  CHECK(ds.meta.seed == 7);
  CHECK(text_fingerprint(dataset_dumps(ds)) == "fnv1a:dafe5b83a48aa38f");

  // Regenerating with the same config is bitwise identical.
  const Dataset again = build_dataset(truth, {0.2, 200, 7});
  CHECK(dataset_dumps(again) == dataset_dumps(ds));
}

TEST_CASE("dataset serialization round-trips bitwise", "[datagen]") {
  const GenOgdenModel truth(genogden_fixture(2));
  const Dataset ds = build_dataset(truth, {0.25, 40, 99});
  const std::string text = dataset_dumps(ds);
  const Dataset back = dataset_loads(text);
  CHECK(back.meta.kind == ds.meta.kind);
  CHECK(back.meta.seed == ds.meta.seed);
  CHECK(back.meta.attempts == ds.meta.attempts);
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].f == ds.records[i].f);
    CHECK(back.records[i].sigma == ds.records[i].sigma);
  }
  CHECK(dataset_dumps(back) == text);

  const auto path = write_temp("pann-ds-roundtrip.jsonl", text);
  const Dataset fromfile = load_dataset(path.string());
  CHECK(dataset_dumps(fromfile) == text);
  std::filesystem::remove(path);
}

TEST_CASE("recorded stresses are symmetric Cauchy tensors", "[datagen]") {
  const OgdenCompressibleModel truth(ogden_fixture(1));
  const Dataset ds = build_dataset(truth, {0.2, 20, 5});
  for (const Record& r : ds.records) {
    const Mat3 sig = cauchy_stress(truth, r.f);
    // Voigt packing keeps xx,yy,zz,xy,xz,yz of the symmetric tensor.
    CHECK(r.sigma[0] == sig[0][0]);
    CHECK(r.sigma[3] == sig[0][1]);
    CHECK(r.sigma[5] == sig[1][2]);
    CHECK_THAT(sig[0][1] - sig[1][0], WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("dataset generation guards", "[datagen]") {
  const OgdenCompressibleModel truth(ogden_fixture(1));
  CHECK_THROWS_AS(build_dataset(truth, {0.2, 0, 1}), DomainError);
  CHECK_THROWS_AS(build_dataset(truth, {-0.1, 10, 1}), DomainError);
  OgdenParams inc;
  inc.mu = {1.0};
  inc.alpha = {2.0};
  const OgdenIncompressibleModel m(inc);
  CHECK_THROWS_AS(build_dataset(m, {0.2, 10, 1}), IncompressibleUnsupported);
  rng::Stream rs(1);
  CHECK_THROWS_AS(sample_defgrad(rs, 0.0), DomainError);
}

TEST_CASE("malformed dataset text is rejected", "[datagen]") {
  const OgdenCompressibleModel truth(ogden_fixture(1));
  const Dataset ds = build_dataset(truth, {0.2, 3, 2});
  const std::string text = dataset_dumps(ds);
  CHECK_THROWS_AS(dataset_loads(""), FormatError);
  CHECK_THROWS_AS(dataset_loads("{not json"), FormatError);
  // Drop the metadata header line.
  const std::string headerless = text.substr(text.find('\n') + 1);
  CHECK_THROWS_AS(dataset_loads(headerless), FormatError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/nope.jsonl"), FormatError);
}

TEST_CASE("stress measure strings", "[datagen]") {
  CHECK(to_string(StressMeasure::Cauchy) == "cauchy");
  CHECK(to_string(StressMeasure::Nominal) == "nominal");
  CHECK(measure_from_string("Cauchy") == StressMeasure::Cauchy);
  CHECK(measure_from_string("NOMINAL") == StressMeasure::Nominal);
  CHECK_THROWS_AS(measure_from_string("pk2"), FormatError);
}

TEST_CASE("experimental CSV loader", "[datagen]") {
  const auto good = write_temp("pann-exp-good.csv",
                               "mode,stretch,stress,measure\r\n"
                               "UT,1.5,0.31,nominal\n"
                               "\n"
                               "ET, 2.0 , 1.25 ,cauchy\n");
  const auto pts = load_experimental(good.string());
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].spec.mode == Mode::UT);
  CHECK(pts[0].spec.lambda == 1.5);
  CHECK(pts[0].stress == 0.31);
  CHECK(pts[0].measure == StressMeasure::Nominal);
  CHECK(pts[1].spec.mode == Mode::ET);
  CHECK(pts[1].spec.lambda == 2.0);
  CHECK(pts[1].measure == StressMeasure::Cauchy);
  std::filesystem::remove(good);

  const auto bad_header =
      write_temp("pann-exp-h.csv", "lambda,stress\nUT,1.5\n");
  CHECK_THROWS_AS(load_experimental(bad_header.string()), FormatError);
  std::filesystem::remove(bad_header);

  const auto bad_count = write_temp(
      "pann-exp-c.csv", "mode,stretch,stress,measure\nUT,1.5,0.3\n");
  CHECK_THROWS_AS(load_experimental(bad_count.string()), FormatError);
  std::filesystem::remove(bad_count);

  const auto bad_num = write_temp(
      "pann-exp-n.csv", "mode,stretch,stress,measure\nUT,abc,0.3,cauchy\n");
  CHECK_THROWS_AS(load_experimental(bad_num.string()), FormatError);
  std::filesystem::remove(bad_num);

  const auto bad_stretch = write_temp(
      "pann-exp-s.csv", "mode,stretch,stress,measure\nUT,-1.0,0.3,cauchy\n");
  CHECK_THROWS_AS(load_experimental(bad_stretch.string()), FormatError);
  std::filesystem::remove(bad_stretch);

  const auto bad_mode = write_temp(
      "pann-exp-m.csv", "mode,stretch,stress,measure\nBX,1.5,0.3,cauchy\n");
  CHECK_THROWS_AS(load_experimental(bad_mode.string()), UnknownMode);
  std::filesystem::remove(bad_mode);

  CHECK_THROWS_AS(load_experimental("/nonexistent/exp.csv"), FormatError);

  const auto empty =
      write_temp("pann-exp-e.csv", "mode,stretch,stress,measure\n");
  CHECK(load_experimental(empty.string()).empty());
  std::filesystem::remove(empty);
}
