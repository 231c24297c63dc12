#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "clickstat/io.hpp"
#include "clickstat/mc_sim.hpp"
#include "helpers.hpp"

using namespace clickstat;
using Catch::Matchers::WithinAbs;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("clickstat_io_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

json load_schema(const std::string& name) {
  return load_json(std::string(CLICKSTAT_SCHEMA_DIR) + "/" + name);
}

} // namespace

TEST_CASE("areas CSV round trip with header detection") {
  TempDir tmp;
  const std::vector<double> areas = {1.5, -2.25, 1e4, 0.0, 3.14159};
  write_areas_csv(tmp.file("a.csv"), areas);
  const auto back = read_areas_csv(tmp.file("a.csv"));
  REQUIRE(back.size() == areas.size());
  for (std::size_t i = 0; i < areas.size(); ++i)
    CHECK_THAT(back[i], WithinAbs(areas[i], 1e-9));
}

TEST_CASE("areas CSV error reporting") {
  TempDir tmp;
  SECTION("empty file") {
    std::ofstream(tmp.file("empty.csv")) << "";
    CHECK_THROWS_AS(read_areas_csv(tmp.file("empty.csv")), io_error);
  }
  SECTION("bad line is named") {
    std::ofstream(tmp.file("bad.csv")) << "area\n1.0\nnot_a_number\n2.0\n";
    try {
      (void)read_areas_csv(tmp.file("bad.csv"));
      FAIL("expected io_error");
    } catch (const io_error& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
  }
  SECTION("missing file") {
    CHECK_THROWS_AS(read_areas_csv(tmp.file("nope.csv")), io_error);
  }
}

TEST_CASE("click sample CSV") {
  TempDir tmp;
  std::ofstream(tmp.file("k.csv")) << "clicks\n0\n1\n1\n5\n0\n";
  const auto s = read_click_sample_csv(tmp.file("k.csv"), 8);
  CHECK(s.n_trials == 5);
  CHECK(s.counts[0] == 2);
  CHECK(s.counts[1] == 2);
  CHECK(s.counts[5] == 1);
  std::ofstream(tmp.file("k_bad.csv")) << "0\n9\n";
  CHECK_THROWS_AS(read_click_sample_csv(tmp.file("k_bad.csv"), 8), io_error);
}

TEST_CASE("click distribution CSV round trip") {
  TempDir tmp;
  const auto d = testutil::binomial_distribution_vector(12, 0.4);
  write_click_distribution_csv(tmp.file("d.csv"), d);
  const auto back = read_click_distribution_csv(tmp.file("d.csv"));
  REQUIRE(back.n_pixels == 12);
  for (int k = 0; k <= 12; ++k)
    CHECK_THAT(back.probs[(std::size_t)k], WithinAbs(d.probs[(std::size_t)k], 1e-10));
}

TEST_CASE("reports validate against the shipped schemas") {
  SECTION("q_report") {
    const auto d = testutil::binomial_distribution_vector(10, 0.3);
    const json j = to_json(q_report(d));
    CHECK(schema_validate(j, load_schema("q_report.v1.schema.json")).empty());
  }
  SECTION("sim_summary") {
    SimConfig cfg;
    cfg.det.n_pixels = 6;
    cfg.source = PhotonSource::coherent(2.0);
    cfg.n_trials = 500;
    cfg.seed = 5;
    const auto r = simulate(cfg);
    const json j = to_json(r, cfg);
    CHECK(schema_validate(j, load_schema("sim_summary.v1.schema.json")).empty());
  }
  SECTION("mixture_fit") {
    GaussianMixtureFit fit;
    fit.delta_x = 100.0;
    fit.sigma0 = 18.0;
    fit.sigma1 = 0.37;
    fit.amplitudes = {0.5, 0.5};
    fit.converged = true;
    const json j = to_json(fit);
    CHECK(schema_validate(j, load_schema("mixture_fit.v1.schema.json")).empty());
  }
  SECTION("violations are reported") {
    json j = to_json(q_report(testutil::binomial_distribution_vector(10, 0.3)));
    j.erase("mean");
    j["method"] = "guesswork";
    const auto errors = schema_validate(j, load_schema("q_report.v1.schema.json"));
    REQUIRE(errors.size() == 2);
  }
}
