#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "clickstat/clickstat.hpp"
#include "helpers.hpp"

using namespace clickstat;
using Catch::Matchers::WithinAbs;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CLICKSTAT_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WEXITSTATUS(status);
  return r;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("clickstat_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::pair<int, double>> parse_click_table(const std::string& text) {
  std::vector<std::pair<int, double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == 'k') continue;
    const auto comma = line.find(',');
    rows.emplace_back(std::stoi(line.substr(0, comma)),
                      std::stod(line.substr(comma + 1)));
  }
  return rows;
}

} // namespace

TEST_CASE("model subcommand") {
  SECTION("vacuum puts all mass on zero clicks") {
    const auto r = run_cli("model --state coherent --mean-photons 0 --pixels 100");
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_click_table(r.out);
    REQUIRE(rows.size() == 101);
    CHECK_THAT(rows[0].second, WithinAbs(1.0, 1e-12));
  }
  SECTION("crosstalk table matches the library exactly") {
    TempDir tmp;
    const auto r = run_cli(
        "model --state coherent --mean-photons 100 --pixels 100 --chi 0.0025 --csv " +
        tmp.file("t.csv") + " --json " + tmp.file("t.json"));
    REQUIRE(r.exit_code == 0);
    DetectorConfig det;
    det.n_pixels = 100;
    det.crosstalk = 0.0025;
    const auto expected =
        click_distribution_with_crosstalk(PhotonSource::coherent(100.0), det);
    const auto rows = parse_click_table(slurp(tmp.file("t.csv")));
    REQUIRE(rows.size() == 101);
    for (const auto& [k, p] : rows)
      CHECK_THAT(p, WithinAbs(expected.probs[(std::size_t)k], 1e-12));
    const json j = load_json(tmp.file("t.json"));
    CHECK(j["q_binomial"].get<double>() > 0.0);
  }
  SECTION("fock report carries Q_B = -1") {
    const auto r = run_cli("model --state fock --n 1 --pixels 100 --eta 1 --csv - --json -");
    REQUIRE(r.exit_code == 0);
    const auto brace = r.out.find('{');
    REQUIRE(brace != std::string::npos);
    const json j = json::parse(r.out.substr(brace));
    CHECK_THAT(j["q_binomial"].get<double>(), WithinAbs(-1.0, 1e-12));
  }
  SECTION("invalid parameters exit 2 with one diagnostic line") {
    const auto r = run_cli("model --state coherent --mean-photons -3 --pixels 100");
    CHECK(r.exit_code == 2);
    CHECK(r.out.find("clickstat:") != std::string::npos);
  }
}

TEST_CASE("simulate subcommand") {
  TempDir tmp;
  const std::string flags =
      "simulate --state coherent --mean-photons 20 --pixels 32 --chi 0.01 "
      "--trials 20000 --seed 42 --aup-delta-x 100 --aup-sigma0 18 --aup-sigma1 0.37 ";
  SECTION("fixed seed gives byte-identical outputs") {
    const auto r1 = run_cli(flags + "--hist-csv " + tmp.file("h1.csv") +
                            " --summary-json " + tmp.file("s1.json") +
                            " --areas-csv " + tmp.file("a1.csv"));
    const auto r2 = run_cli(flags + "--hist-csv " + tmp.file("h2.csv") +
                            " --summary-json " + tmp.file("s2.json") +
                            " --areas-csv " + tmp.file("a2.csv"));
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(tmp.file("h1.csv")) == slurp(tmp.file("h2.csv")));
    CHECK(slurp(tmp.file("s1.json")) == slurp(tmp.file("s2.json")));
    CHECK(slurp(tmp.file("a1.csv")) == slurp(tmp.file("a2.csv")));
  }
  SECTION("summary validates against its schema") {
    const auto r = run_cli(flags + "--summary-json " + tmp.file("s.json"));
    REQUIRE(r.exit_code == 0);
    const json j = load_json(tmp.file("s.json"));
    const json schema = load_json(std::string(CLICKSTAT_SCHEMA_DIR) +
                                  "/sim_summary.v1.schema.json");
    CHECK(schema_validate(j, schema).empty());
  }
  SECTION("zero trials is a validation error") {
    const auto r = run_cli(
        "simulate --state coherent --mean-photons 1 --pixels 4 --trials 0");
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("fit subcommand") {
  TempDir tmp;
  SECTION("areas from a zero-click distribution recover c_0 = 1") {
    ClickDistribution delta0;
    delta0.n_pixels = 10;
    delta0.probs.assign(11, 0.0);
    delta0.probs[0] = 1.0;
    write_areas_csv(tmp.file("areas.csv"),
                    sample_aup(delta0, AupParams{100.0, 0.0, 18.0, 0.37}, 5000, 3));
    const auto r = run_cli("fit --areas " + tmp.file("areas.csv") +
                           " --pixels 10 --clicks-csv " + tmp.file("c.csv") +
                           " --fit-json " + tmp.file("f.json") + " --q-json " +
                           tmp.file("q.json") + " --resamples 200 --seed 1");
    REQUIRE(r.exit_code == 0);
    const auto rows = parse_click_table(slurp(tmp.file("c.csv")));
    CHECK_THAT(rows[0].second, WithinAbs(1.0, 1e-6));
    const json fit = load_json(tmp.file("f.json"));
    const json schema = load_json(std::string(CLICKSTAT_SCHEMA_DIR) +
                                  "/mixture_fit.v1.schema.json");
    CHECK(schema_validate(fit, schema).empty());
  }
  SECTION("empty file is an ingestion error") {
    std::ofstream(tmp.file("empty.csv")) << "";
    const auto r = run_cli("fit --areas " + tmp.file("empty.csv") + " --pixels 10");
    CHECK(r.exit_code == 4);
  }
  SECTION("missing file is an I/O error") {
    const auto r = run_cli("fit --areas " + tmp.file("nope.csv") + " --pixels 10");
    CHECK(r.exit_code == 4);
  }
}

TEST_CASE("calibrate-crosstalk subcommand") {
  TempDir tmp;
  SECTION("--q 0 maps to chi = 0") {
    const auto r = run_cli("calibrate-crosstalk --q 0 --pixels 100 --json -");
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK(j["chi"].get<double>() == 0.0);
  }
  SECTION("a Q beyond the chi bracket fails for a small detector") {
    const auto r = run_cli("calibrate-crosstalk --q 10 --pixels 8");
    CHECK(r.exit_code == 3);
    CHECK((r.out.find("bracket") != std::string::npos ||
           r.out.find("above") != std::string::npos));
  }
  SECTION("negative Q warns and reports chi = 0") {
    const auto r = run_cli("calibrate-crosstalk --q -0.4 --pixels 100 --json " +
                           tmp.file("chi.json"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("warning") != std::string::npos);
    const json j = load_json(tmp.file("chi.json"));
    CHECK(j["chi"].get<double>() == 0.0);
    CHECK(j["nonclassical_or_noise"].get<bool>());
  }
  SECTION("round trip from a known Q value") {
    const double q = crosstalk_q_limit(0.0025, 100);
    std::ostringstream cmd;
    cmd << "calibrate-crosstalk --q " << q << " --pixels 100 --json -";
    const auto r = run_cli(cmd.str());
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.out);
    CHECK_THAT(j["chi"].get<double>(), WithinAbs(0.0025, 1e-8));
    const json schema = load_json(std::string(CLICKSTAT_SCHEMA_DIR) +
                                  "/chi_estimate.v1.schema.json");
    CHECK(schema_validate(j, schema).empty());
  }
}

TEST_CASE("qscan subcommand") {
  const auto r = run_cli(
      "qscan --pixels 50 --chi 0 --mu-over-n-min 0.01 --mu-over-n-max 1.5 --points 12");
  REQUIRE(r.exit_code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "mu_over_n,q_binomial,q_mandel,q_mandel_reference");
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    const double mu_over_n = std::stod(cell);
    std::getline(ls, cell, ',');
    CHECK_THAT(std::stod(cell), WithinAbs(0.0, 1e-12)); // Q_B of pure coherent
    std::getline(ls, cell, ',');
    const double qm = std::stod(cell);
    std::getline(ls, cell, ',');
    const double ref = std::stod(cell);
    CHECK_THAT(qm, WithinAbs(std::expm1(-mu_over_n), 1e-12));
    CHECK_THAT(ref, WithinAbs(std::expm1(-mu_over_n), 1e-15));
  }
  CHECK(rows == 12);
}

TEST_CASE("invert subcommand") {
  TempDir tmp;
  write_click_distribution_csv(tmp.file("clicks.csv"),
                               coherent_click_distribution(5.0, 100));
  const auto r = run_cli("invert --clicks " + tmp.file("clicks.csv") +
                         " --pixels 100 --json -");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["min_prob"].get<double>() >= -1e-6);
  CHECK_THAT(j["total_mass"].get<double>(), WithinAbs(1.0, 1e-6));
  const json schema =
      load_json(std::string(CLICKSTAT_SCHEMA_DIR) + "/inversion.v1.schema.json");
  CHECK(schema_validate(j, schema).empty());
}

TEST_CASE("config file sets flags and the command line overrides it") {
  TempDir tmp;
  std::ofstream(tmp.file("cfg.ini")) << "state = coherent\n"
                                     << "mean-photons = 0\n"
                                     << "pixels = 10\n";
  const auto from_config =
      run_cli("model --config " + tmp.file("cfg.ini"));
  REQUIRE(from_config.exit_code == 0);
  CHECK(parse_click_table(from_config.out).size() == 11);
  const auto overridden =
      run_cli("model --config " + tmp.file("cfg.ini") + " --pixels 5");
  REQUIRE(overridden.exit_code == 0);
  CHECK(parse_click_table(overridden.out).size() == 6);
}

TEST_CASE("environment seed is honored") {
  TempDir tmp;
  const std::string base =
      " simulate --state coherent --mean-photons 5 --pixels 8 --trials 1000 --hist-csv ";
  const std::string env_cmd = "CLICKSTAT_SEED=777 " + std::string(CLICKSTAT_CLI_PATH) +
                              base + tmp.file("env.csv") + " > /dev/null 2>&1";
  REQUIRE(std::system(env_cmd.c_str()) == 0);
  const auto r = run_cli(base.substr(1) + tmp.file("flag.csv") + " --seed 777");
  REQUIRE(r.exit_code == 0);
  CHECK(slurp(tmp.file("env.csv")) == slurp(tmp.file("flag.csv")));
}
