// Tests for the I/O primitives, config parsing, report builders, checkpoint
// machinery, and two cheap experiments driven end to end through run().
#include <catch2/catch_amalgamated.hpp>

#include <bandwig/harness.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

using namespace bandwig;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory under the system temp root, wiped on entry so the
// test is idempotent across runs.
fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "bandwig_harness_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::vector<std::string>> parse_csv(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

} // namespace

TEST_CASE("config map parsing") {
  const std::string text =
      "# leading comment\n"
      "d = 3\n"
      "sides = 8, 8, 8   # trailing comment\n"
      "eps = 0.05\n"
      "label = run one\n"
      "flag_on = yes\n"
      "flag_off = 0\n"
      "\n"
      "seed = 42\n"
      "E_list = 0.5, 1.0, 1.5\n";
  const ConfigMap m = ConfigMap::parse(text);

  CHECK(m.get_int("d") == 3);
  CHECK(m.get_int_list("sides") == std::vector<std::int64_t>{8, 8, 8});
  CHECK(m.get_double("eps") == Catch::Approx(0.05));
  CHECK(m.get_string("label") == "run one");
  CHECK(m.get_u64("seed") == 42);
  CHECK(m.get_double_list("E_list") == std::vector<double>{0.5, 1.0, 1.5});
  CHECK(m.get_bool("flag_on", false));
  CHECK_FALSE(m.get_bool("flag_off", true));
  CHECK(m.get_bool("absent", true));

  // Defaults only apply to missing keys.
  CHECK(m.get_int("d", 99) == 3);
  CHECK(m.get_int("missing", 99) == 99);
  CHECK(m.get_double("missing", 2.5) == Catch::Approx(2.5));
  CHECK(m.get_string("missing", "dflt") == "dflt");
  CHECK(m.has("d"));
  CHECK_FALSE(m.has("missing"));

  CHECK_THROWS_AS(m.get_string("missing"), ConfigError);
  CHECK_THROWS_AS(m.get_int("label"), ConfigError);
  CHECK_THROWS_AS(m.get_double("label"), ConfigError);
  CHECK_THROWS_AS(m.get_u64("label"), ConfigError);
  CHECK_THROWS_AS(m.get_bool("label", false), ConfigError);

  CHECK_THROWS_AS(ConfigMap::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(ConfigMap::parse("just words\n"), ConfigError);
  CHECK_THROWS_AS(ConfigMap::parse("= 3\n"), ConfigError);
  CHECK_THROWS_AS(ConfigMap::parse("empty =\n").get_int_list("empty"), ConfigError);

  CHECK_NOTHROW(m.require_known_keys(
      {"d", "sides", "eps", "label", "flag_on", "flag_off", "seed", "E_list"}));
  CHECK_THROWS_AS(m.require_known_keys({"d", "sides"}), ConfigError);

  const json j = m.to_json();
  CHECK(j.at("d") == "3");
  CHECK(j.at("label") == "run one");
}

TEST_CASE("io primitives") {
  // FNV-1a 64-bit known answers.
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(to_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
  CHECK(to_hex(0) == "0000000000000000");

  // %.17g formatting survives a strtod round trip exactly.
  for (double x : {1.0 / 3.0, -2.718281828459045e-7, 6.02214076e23, 0.0, -0.25}) {
    const std::string s = format_g17(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
  }

  const fs::path dir = scratch_dir("io");
  const fs::path file = dir / "nested" / "blob.txt";
  const std::string payload = "line one\nline two\n";
  atomic_write(file, payload);
  CHECK(read_file(file) == payload);
  CHECK(fnv1a64_file(file) == fnv1a64(payload));
  CHECK_FALSE(fs::exists(file.string() + ".tmp"));
  atomic_write(file, "replaced");
  CHECK(read_file(file) == "replaced");
  CHECK_THROWS_AS(read_file(dir / "does_not_exist"), ConfigError);

  CsvWriter csv({"a", "b"});
  csv.add_row({CsvWriter::cell(1.5), CsvWriter::cell(std::int64_t{7})});
  csv.add_row({"x y", CsvWriter::cell(-3)});
  CHECK(csv.content() == "a,b\n1.5,7\nx y,-3\n");
  CHECK(csv.content().find('\r') == std::string::npos);
  CHECK_THROWS_AS(csv.add_row({"only one"}), ConfigError);

  const fs::path jf = dir / "obj.json";
  json obj;
  obj["k"] = 3;
  write_json_atomic(jf, obj);
  const json back = json::parse(read_file(jf));
  CHECK(back.at("k") == 3);
  CHECK(read_file(jf).back() == '\n');
}

TEST_CASE("semicircle deviation over a synthetic spectrum") {
  SpectralResult r;
  r.eps = 0.05;
  r.volume = 64;
  // Grid over [0, 2]; the DOS matches the semicircle except for a bump of
  // 0.02 at E = 1.0 and larger junk outside the bulk window.
  for (double E = 0.0; E <= 2.0 + 1e-12; E += 0.1) {
    r.energies.push_back(E);
    double v = semicircle(E);
    if (std::abs(E - 1.0) < 1e-9) v += 0.02;
    if (E < 0.15 || E > 1.85) v += 0.5; // must be ignored by the window
    r.dos.push_back(v);
    r.dos_se.push_back(0.001);
  }
  const DeviationRow row = semicircle_deviation(r, 3);
  CHECK(row.W == 3);
  CHECK(row.volume == 64);
  CHECK(row.eps == Catch::Approx(0.05));
  CHECK(row.E_at_sup == Catch::Approx(1.0));
  CHECK(row.sup_dev == Catch::Approx(0.02).margin(1e-12));
  CHECK(row.se_at_sup == Catch::Approx(0.001));

  // A window that excludes every grid point is an error.
  CHECK_THROWS_AS(semicircle_deviation(r, 3, 0.101, 0.102), ConfigError);
}

TEST_CASE("deviation table monotonicity and slope") {
  auto make_row = [](int W, double dev, double se) {
    DeviationRow r;
    r.W = W;
    r.sup_dev = dev;
    r.se_at_sup = se;
    return r;
  };

  // Exact power law dev = 0.8 W^-2 with negligible errors: slope -2.
  std::vector<DeviationRow> rows;
  for (int W : {2, 4, 8}) rows.push_back(make_row(W, 0.8 / (W * W), 1e-6));
  const DeviationTable t = build_deviation_table(rows);
  CHECK(t.strictly_decreasing);
  CHECK(t.loglog_slope == Catch::Approx(-2.0).epsilon(1e-10));

  // Overlapping error bars break strict decrease even if the means decrease.
  std::vector<DeviationRow> noisy{make_row(2, 0.10, 0.03), make_row(4, 0.09, 0.03)};
  CHECK_FALSE(build_deviation_table(noisy).strictly_decreasing);

  // An increase certainly breaks it.
  std::vector<DeviationRow> upward{make_row(2, 0.05, 1e-6), make_row(4, 0.06, 1e-6)};
  CHECK_FALSE(build_deviation_table(upward).strictly_decreasing);

  CHECK_THROWS_AS(build_deviation_table({make_row(2, 0.1, 0.0)}), ConfigError);
}

TEST_CASE("decay rows and report") {
  TwoPointProfile p;
  p.volume = 1728;
  p.fit_rate = 0.5;
  p.fit_amplitude = 1.25;
  p.fit_rms = 0.01;
  p.fit_points = 6;
  p.sum_rule_residual = 3e-14;
  // r = 0 carries a huge mean-G value that must not enter the z-score.
  p.radius = {0.0, 1.0, 2.0};
  p.g0x = {cdouble(5.0, -5.0), cdouble(0.002, 0.0), cdouble(0.0, -0.003)};
  p.g0x_se_re = {0.001, 0.001, 0.001};
  p.g0x_se_im = {0.001, 0.001, 0.0}; // zero se contributes zero, not inf
  const DecayRow row = decay_row_from_profile(p, 3);
  CHECK(row.W == 3);
  CHECK(row.volume == 1728);
  CHECK(row.rate == Catch::Approx(0.5));
  CHECK(row.rate_times_W == Catch::Approx(1.5));
  CHECK(row.amplitude == Catch::Approx(1.25));
  CHECK(row.fit_points == 6);
  CHECK(row.max_g0x_sigma == Catch::Approx(2.0)); // 0.002 / 0.001 at r = 1

  DecayRow r2 = row;
  r2.W = 4;
  r2.rate = 0.45;
  r2.rate_times_W = 1.8;
  const DecayReport rep = build_decay_report({row, r2});
  CHECK(rep.rates_positive);
  CHECK(rep.rate_w_ratio == Catch::Approx(1.2));

  DecayRow bad = row;
  bad.rate = 0.0;
  const DecayReport rep2 = build_decay_report({row, bad});
  CHECK_FALSE(rep2.rates_positive);
  CHECK(rep2.rate_w_ratio == 0.0);

  CHECK_THROWS_AS(build_decay_report({}), ConfigError);
}

TEST_CASE("run config loading") {
  const fs::path dir = scratch_dir("runcfg");
  const fs::path cfg = dir / "exp.cfg";
  atomic_write(cfg,
               "experiment = saddle-table\n"
               "out_dir = results\n"
               "seed = 11\n"
               "workers = 2\n"
               "points = 5\n");

  const RunConfig rc = load_run_config("saddle-table", cfg);
  CHECK(rc.experiment == "saddle-table");
  CHECK(rc.out_dir == fs::path("results"));
  CHECK(rc.base_seed == 11);
  CHECK(rc.workers == 2);
  CHECK(rc.options.get_int("points") == 5);

  // Command-line overrides win over file values.
  const RunConfig over = load_run_config("saddle-table", cfg, "elsewhere", 99, 4);
  CHECK(over.out_dir == fs::path("elsewhere"));
  CHECK(over.base_seed == 99);
  CHECK(over.workers == 4);

  // The experiment key in the file must match the subcommand.
  CHECK_THROWS_AS(load_run_config("dos-sweep", cfg), ConfigError);

  const fs::path bare = dir / "bare.cfg";
  atomic_write(bare, "points = 3\n");
  CHECK_THROWS_AS(load_run_config("no-such-experiment", bare), ConfigError);
  const RunConfig dflt = load_run_config("saddle-table", bare);
  CHECK(dflt.out_dir == fs::path("out"));
  CHECK(dflt.base_seed == 1);
  CHECK(dflt.workers >= 1);

  atomic_write(dir / "badworkers.cfg", "workers = 0\n");
  CHECK_THROWS_AS(load_run_config("saddle-table", dir / "badworkers.cfg"), ConfigError);
  CHECK_THROWS_AS(load_run_config("saddle-table", dir / "missing.cfg"), ConfigError);
}

TEST_CASE("block context checkpointing") {
  const fs::path dir = scratch_dir("ckpt");
  const std::string data_name = "block_a.csv";
  atomic_write(dir / data_name, "x\n1\n");

  harness_detail::BlockContext ctx;
  ctx.out_dir = dir;
  ctx.config_hash = "hash-one";
  ctx.load();
  CHECK_FALSE(ctx.resumed);
  CHECK_FALSE(ctx.is_done("a"));
  ctx.mark_done("a", {data_name});
  CHECK(fs::exists(ctx.checkpoint_path()));

  // Reload with the same hash: the completed block is skippable.
  harness_detail::BlockContext again;
  again.out_dir = dir;
  again.config_hash = "hash-one";
  again.load();
  CHECK(again.resumed);
  CHECK(again.is_done("a"));
  CHECK(again.can_skip("a"));
  CHECK_FALSE(again.is_done("b"));

  // If a recorded output file disappeared, the block must be recomputed.
  fs::remove(dir / data_name);
  CHECK(again.is_done("a"));
  CHECK_FALSE(again.can_skip("a"));

  // A different config hash invalidates the checkpoint entirely.
  harness_detail::BlockContext other;
  other.out_dir = dir;
  other.config_hash = "hash-two";
  other.load();
  CHECK_FALSE(other.resumed);
  CHECK_FALSE(other.is_done("a"));

  again.finish();
  CHECK_FALSE(fs::exists(again.checkpoint_path()));
}

TEST_CASE("saddle-table experiment end to end") {
  const fs::path dir = scratch_dir("saddle_run");
  RunConfig rc;
  rc.experiment = "saddle-table";
  rc.out_dir = dir;
  rc.base_seed = 1;
  rc.options = ConfigMap::parse("E_min = 0.3\nE_max = 1.5\npoints = 13\n");
  REQUIRE(run(rc) == 0);

  CHECK(fs::exists(dir / "saddle_table.csv"));
  CHECK(fs::exists(dir / "saddle_summary.json"));
  CHECK_FALSE(fs::exists(dir / "checkpoint.json"));

  const json summary = json::parse(read_file(dir / "saddle_summary.json"));
  CHECK(std::abs(summary.at("semicircle_integral").get<double>() - 1.0) < 1e-8);
  CHECK(summary.at("max_stationarity_residual").get<double>() < 1e-10);

  const json manifest = json::parse(read_file(dir / "manifest.json"));
  CHECK(manifest.at("tool") == "bandwig");
  CHECK(manifest.at("experiment") == "saddle-table");
  CHECK(manifest.at("status") == "complete");
  CHECK(manifest.at("seed") == "1");
  REQUIRE(manifest.at("outputs").size() == 2);
  for (const auto& f : manifest.at("outputs")) {
    const fs::path p = dir / f.at("file").get<std::string>();
    REQUIRE(fs::exists(p));
    CHECK(f.at("fnv1a64").get<std::string>() == to_hex(fnv1a64_file(p)));
  }

  const auto rows = parse_csv(dir / "saddle_table.csv");
  REQUIRE(rows.size() > 2);
  CHECK(rows[0][0] == "E");
  // Every emitted grid point sits inside the admissible window.
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double E = std::strtod(rows[k][0].c_str(), nullptr);
    CHECK(std::abs(E) > 0.1);
    CHECK(std::abs(E) <= 1.8);
  }

  // Unknown keys are rejected before any work happens.
  RunConfig bad = rc;
  bad.options = ConfigMap::parse("points = 5\nbogus_key = 1\n");
  CHECK_THROWS_AS(run(bad), ConfigError);
}

TEST_CASE("grassmann-check experiment determinism") {
  RunConfig rc;
  rc.experiment = "grassmann-check";
  rc.base_seed = 5;
  rc.options = ConfigMap::parse("trials = 3\nsizes = 1, 2\n");

  const fs::path dir_a = scratch_dir("grass_a");
  rc.out_dir = dir_a;
  REQUIRE(run(rc) == 0);
  const fs::path dir_b = scratch_dir("grass_b");
  rc.out_dir = dir_b;
  REQUIRE(run(rc) == 0);

  const auto rows = parse_csv(dir_a / "grassmann_report.csv");
  REQUIRE(rows.size() == 1 + 3 * 2 + 3 * 2); // header + det rows + sdet rows
  CHECK(rows[0][4] == "pass");
  for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k][4] == "1");

  // Identical seeds produce byte-identical outputs; only the manifest
  // timestamps may differ, and its hash list must still agree.
  CHECK(read_file(dir_a / "grassmann_report.csv") == read_file(dir_b / "grassmann_report.csv"));
  const json ma = json::parse(read_file(dir_a / "manifest.json"));
  const json mb = json::parse(read_file(dir_b / "manifest.json"));
  CHECK(ma.at("outputs") == mb.at("outputs"));
  CHECK(ma.at("config_hash") == mb.at("config_hash"));

  // A different seed changes the sampled matrices and therefore the report.
  RunConfig rc2 = rc;
  rc2.base_seed = 6;
  const fs::path dir_c = scratch_dir("grass_c");
  rc2.out_dir = dir_c;
  REQUIRE(run(rc2) == 0);
  CHECK(read_file(dir_a / "grassmann_report.csv") != read_file(dir_c / "grassmann_report.csv"));
}
