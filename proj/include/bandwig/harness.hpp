#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "bandwig/analytics.hpp"
#include "bandwig/ensemble.hpp"
#include "bandwig/grassmann.hpp"
#include "bandwig/io.hpp"
#include "bandwig/kernel.hpp"
#include "bandwig/lattice.hpp"
#include "bandwig/spectral.hpp"
#include "bandwig/susy.hpp"
#include "bandwig/threads.hpp"
#include "bandwig/version.hpp"

namespace bandwig {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"dos-sweep",  "rx-decay",     "susy-check",
                                                 "grassmann-check", "kernel-audit", "saddle-table"};
  return names;
}

struct RunConfig {
  std::string experiment;
  std::filesystem::path out_dir;
  std::uint64_t base_seed = 1;
  int workers = 1;
  ConfigMap options;
};

inline std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

// Broadening policy when none is configured: wide enough that a volume-V
// sample holds ~20 eigenvalues per width, floored at 0.01.
inline double default_broadening(std::int64_t volume) {
  return std::max(20.0 / static_cast<double>(volume), 0.01);
}

inline RunConfig load_run_config(const std::string& experiment,
                                 const std::filesystem::path& config_path,
                                 const std::string& out_override = "",
                                 std::int64_t seed_override = -1, int workers_override = 0) {
  RunConfig rc;
  rc.options = ConfigMap::parse_file(config_path);
  rc.experiment = experiment;
  if (rc.options.has("experiment") && rc.options.get_string("experiment") != experiment)
    throw ConfigError("config: experiment '" + rc.options.get_string("experiment") +
                      "' does not match the requested subcommand '" + experiment + "'");
  if (std::find(experiment_names().begin(), experiment_names().end(), experiment) ==
      experiment_names().end())
    throw ConfigError("unknown experiment: " + experiment);
  rc.out_dir = out_override.empty() ? std::filesystem::path(rc.options.get_string("out_dir", "out"))
                                    : std::filesystem::path(out_override);
  rc.base_seed = seed_override >= 0 ? static_cast<std::uint64_t>(seed_override)
                                    : rc.options.get_u64("seed", 1);
  rc.workers = workers_override > 0
                   ? workers_override
                   : static_cast<int>(rc.options.get_int("workers", default_worker_count()));
  if (rc.workers < 1) throw ConfigError("config: workers must be >= 1");
  return rc;
}

// ---------------------------------------------------------------------------
// Report structures shared by the harness and the test suites.

struct DeviationRow {
  int W = 0;
  std::int64_t volume = 0;
  double eps = 0;
  double sup_dev = 0;    // sup over the bulk window of |dos - rho_sc|
  double se_at_sup = 0;
  double E_at_sup = 0;
};

struct DeviationTable {
  std::vector<DeviationRow> rows;
  bool strictly_decreasing = false; // beyond 2-sigma separation
  double loglog_slope = 0;          // d ln(sup_dev) / d ln W
};

inline DeviationRow semicircle_deviation(const SpectralResult& r, int W, double emin = 0.2,
                                         double emax = 1.8) {
  DeviationRow row;
  row.W = W;
  row.volume = r.volume;
  row.eps = r.eps;
  bool any = false;
  for (std::size_t k = 0; k < r.energies.size(); ++k) {
    const double E = r.energies[k];
    if (std::abs(E) < emin || std::abs(E) > emax) continue;
    const double dev = std::abs(r.dos[k] - semicircle(E));
    if (!any || dev > row.sup_dev) {
      row.sup_dev = dev;
      row.se_at_sup = r.dos_se[k];
      row.E_at_sup = E;
      any = true;
    }
  }
  if (!any) throw ConfigError("semicircle_deviation: no grid points in the bulk window");
  return row;
}

inline DeviationTable build_deviation_table(std::vector<DeviationRow> rows) {
  if (rows.size() < 2) throw ConfigError("build_deviation_table: need at least two band widths");
  DeviationTable t;
  t.rows = std::move(rows);
  t.strictly_decreasing = true;
  for (std::size_t k = 1; k < t.rows.size(); ++k) {
    const DeviationRow& a = t.rows[k - 1];
    const DeviationRow& b = t.rows[k];
    if (!(b.sup_dev + 2.0 * b.se_at_sup < a.sup_dev - 2.0 * a.se_at_sup))
      t.strictly_decreasing = false;
  }
  std::vector<double> lx, ly;
  for (const DeviationRow& r : t.rows) {
    lx.push_back(std::log(static_cast<double>(r.W)));
    ly.push_back(std::log(std::max(1e-300, r.sup_dev)));
  }
  t.loglog_slope = linear_fit(lx, ly).slope;
  return t;
}

struct DecayRow {
  int W = 0;
  std::int64_t volume = 0;
  double rate = 0;
  double rate_times_W = 0;
  double amplitude = 0;
  double fit_rms = 0;
  int fit_points = 0;
  double sum_rule_residual = 0;
  double max_g0x_sigma = 0; // largest |<G(0,x)>| z-score over shells r > 0
};

struct DecayReport {
  std::vector<DecayRow> rows;
  bool rates_positive = false;
  double rate_w_ratio = 0; // max/min of rate * W across rows
};

inline DecayRow decay_row_from_profile(const TwoPointProfile& p, int W) {
  DecayRow row;
  row.W = W;
  row.volume = p.volume;
  row.rate = p.fit_rate;
  row.rate_times_W = p.fit_rate * static_cast<double>(W);
  row.amplitude = p.fit_amplitude;
  row.fit_rms = p.fit_rms;
  row.fit_points = p.fit_points;
  row.sum_rule_residual = p.sum_rule_residual;
  for (std::size_t k = 0; k < p.radius.size(); ++k) {
    if (p.radius[k] <= 0) continue;
    const double zr = p.g0x_se_re[k] > 0 ? std::abs(p.g0x[k].real()) / p.g0x_se_re[k] : 0.0;
    const double zi = p.g0x_se_im[k] > 0 ? std::abs(p.g0x[k].imag()) / p.g0x_se_im[k] : 0.0;
    row.max_g0x_sigma = std::max(row.max_g0x_sigma, std::max(zr, zi));
  }
  return row;
}

inline DecayReport build_decay_report(std::vector<DecayRow> rows) {
  if (rows.empty()) throw ConfigError("build_decay_report: no rows");
  DecayReport rep;
  rep.rows = std::move(rows);
  rep.rates_positive = true;
  double lo = 1e300, hi = -1e300;
  for (const DecayRow& r : rep.rows) {
    if (!(r.rate > 0)) rep.rates_positive = false;
    lo = std::min(lo, r.rate_times_W);
    hi = std::max(hi, r.rate_times_W);
  }
  rep.rate_w_ratio = rep.rates_positive && lo > 0 ? hi / lo : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Experiment implementation.

namespace harness_detail {

struct BlockContext {
  std::filesystem::path out_dir;
  std::string config_hash;
  json checkpoint;
  bool resumed = false;

  std::filesystem::path checkpoint_path() const { return out_dir / "checkpoint.json"; }

  void load() {
    checkpoint = json::object();
    checkpoint["config_hash"] = config_hash;
    checkpoint["completed"] = json::array();
    const std::filesystem::path p = checkpoint_path();
    if (!std::filesystem::exists(p)) return;
    try {
      const json j = json::parse(read_file(p));
      if (j.value("config_hash", "") == config_hash) {
        checkpoint = j;
        resumed = !checkpoint["completed"].empty();
      }
    } catch (const std::exception&) {
      // Unreadable checkpoint: start over.
    }
  }
  bool is_done(const std::string& block) const {
    for (const auto& b : checkpoint.at("completed"))
      if (b.get<std::string>() == block) return true;
    return false;
  }
  // A block counts as done only if all its recorded files still exist.
  bool can_skip(const std::string& block) const {
    if (!is_done(block)) return false;
    if (!checkpoint.contains("files") || !checkpoint["files"].contains(block)) return false;
    for (const auto& f : checkpoint["files"][block])
      if (!std::filesystem::exists(out_dir / f.get<std::string>())) return false;
    return true;
  }
  void mark_done(const std::string& block, const std::vector<std::string>& files) {
    checkpoint["completed"].push_back(block);
    checkpoint["files"][block] = files;
    write_json_atomic(checkpoint_path(), checkpoint);
  }
  void finish() {
    std::error_code ec;
    std::filesystem::remove(checkpoint_path(), ec);
  }
};

inline std::vector<int> sides_for(const ConfigMap& opt, int d, int W) {
  if (opt.has("sides") && opt.has("sides_scale"))
    throw ConfigError("config: provide either 'sides' or 'sides_scale', not both");
  if (opt.has("sides_scale")) {
    const int scale = static_cast<int>(opt.get_int("sides_scale"));
    if (scale < 1) throw ConfigError("config: sides_scale must be >= 1");
    return std::vector<int>(static_cast<std::size_t>(d), scale * W);
  }
  const std::vector<std::int64_t> s = opt.get_int_list("sides");
  if (static_cast<int>(s.size()) != d)
    throw ConfigError("config: 'sides' must list exactly d entries");
  std::vector<int> out;
  for (std::int64_t v : s) {
    if (v < 1 || v > 1 << 20) throw ConfigError("config: side length out of range");
    if (W > 0 && v % W != 0)
      std::cerr << "warning: side " << v << " is not a multiple of W=" << W
                << "; decay windows may straddle the wrap-around\n";
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline std::vector<std::int64_t> samples_for(const ConfigMap& opt, std::size_t nW) {
  std::vector<std::int64_t> s = opt.get_int_list("samples");
  if (s.size() == 1) s.assign(nW, s[0]);
  if (s.size() != nW)
    throw ConfigError("config: 'samples' must have one entry or one per band width");
  for (std::int64_t v : s)
    if (v < 1) throw ConfigError("config: samples must be >= 1");
  return s;
}

inline std::vector<double> energy_grid(const ConfigMap& opt) {
  const double emin = opt.get_double("E_min");
  const double emax = opt.get_double("E_max");
  const double step = opt.get_double("E_step");
  if (!(step > 0) || !(emax > emin)) throw ConfigError("config: bad energy grid");
  std::vector<double> grid;
  for (double e = emin; e <= emax + 1e-12; e += step) grid.push_back(e);
  return grid;
}

inline const std::set<std::string>& common_keys() {
  static const std::set<std::string> keys = {"experiment", "seed", "out_dir", "workers"};
  return keys;
}

inline std::set<std::string> with_common(std::set<std::string> extra) {
  extra.insert(common_keys().begin(), common_keys().end());
  return extra;
}

// --- dos-sweep -------------------------------------------------------------

inline void run_dos_sweep(const RunConfig& rc, BlockContext& ctx,
                          std::vector<std::string>& outputs) {
  const ConfigMap& opt = rc.options;
  opt.require_known_keys(with_common({"d", "sides", "sides_scale", "W_list", "E_min", "E_max",
                                      "E_step", "eps", "samples", "mode", "bin_width", "dev_emin",
                                      "dev_emax", "want_g00"}));
  const int d = static_cast<int>(opt.get_int("d"));
  const std::vector<std::int64_t> W_list = opt.get_int_list("W_list");
  const std::vector<std::int64_t> samples = samples_for(opt, W_list.size());
  const std::vector<double> grid = energy_grid(opt);
  const std::string mode_s = opt.get_string("mode", "resolvent");
  if (mode_s != "resolvent" && mode_s != "histogram")
    throw ConfigError("config: mode must be 'resolvent' or 'histogram'");
  const double dev_emin = opt.get_double("dev_emin", 0.2);
  const double dev_emax = opt.get_double("dev_emax", 1.8);

  std::vector<DeviationRow> dev_rows;
  for (std::size_t k = 0; k < W_list.size(); ++k) {
    const int W = static_cast<int>(W_list[k]);
    const std::string block = "W=" + std::to_string(W);
    const std::string csv_name = "dos_W" + std::to_string(W) + ".csv";
    const LatticeTorus torus = build_torus(d, sides_for(opt, d, W));
    const double eps = opt.get_double("eps", default_broadening(torus.volume));
    if (ctx.can_skip(block)) {
      // Rebuild the deviation row from the stored CSV so the summary matches.
      outputs.push_back(csv_name);
      const std::string text = read_file(ctx.out_dir / csv_name);
      SpectralResult r;
      r.volume = torus.volume;
      r.eps = eps;
      std::istringstream in(text);
      std::string line;
      std::getline(in, line); // header
      while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
        r.energies.push_back(vals[0]);
        r.dos.push_back(vals[1]);
        r.dos_se.push_back(vals[2]);
      }
      dev_rows.push_back(semicircle_deviation(r, W, dev_emin, dev_emax));
      continue;
    }
    const auto kernel = std::make_shared<const KernelMatrix>(build_J(torus, W));
    const EnsembleSpec ens = make_ensemble(kernel, samples[k], rc.base_seed);
    DosOptions dopts;
    dopts.mode = mode_s == "histogram" ? DosMode::Histogram : DosMode::Resolvent;
    dopts.bin_width = opt.get_double("bin_width", 0.0);
    dopts.want_g00 = opt.get_bool("want_g00", mode_s == "resolvent");
    dopts.workers = rc.workers;
    const SpectralResult r = estimate_dos(ens, grid, eps, dopts);
    CsvWriter csv({"E", "dos", "dos_se", "rho_sc", "g00_re", "g00_im", "g00_se_re", "g00_se_im"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const bool has_g = i < r.g00.size();
      csv.add_row({CsvWriter::cell(grid[i]), CsvWriter::cell(r.dos[i]), CsvWriter::cell(r.dos_se[i]),
                   CsvWriter::cell(semicircle(grid[i])),
                   CsvWriter::cell(has_g ? r.g00[i].real() : 0.0),
                   CsvWriter::cell(has_g ? r.g00[i].imag() : 0.0),
                   CsvWriter::cell(has_g ? r.g00_se_re[i] : 0.0),
                   CsvWriter::cell(has_g ? r.g00_se_im[i] : 0.0)});
    }
    csv.write(ctx.out_dir / csv_name);
    outputs.push_back(csv_name);
    dev_rows.push_back(semicircle_deviation(r, W, dev_emin, dev_emax));
    ctx.mark_done(block, {csv_name});
  }
  const DeviationTable table = build_deviation_table(dev_rows);
  CsvWriter csv({"W", "volume", "eps", "sup_dev", "se_at_sup", "E_at_sup"});
  for (const DeviationRow& r : table.rows)
    csv.add_row({CsvWriter::cell(r.W), CsvWriter::cell(r.volume), CsvWriter::cell(r.eps),
                 CsvWriter::cell(r.sup_dev), CsvWriter::cell(r.se_at_sup),
                 CsvWriter::cell(r.E_at_sup)});
  csv.write(ctx.out_dir / "deviation_table.csv");
  outputs.push_back("deviation_table.csv");
  json summary;
  summary["strictly_decreasing"] = table.strictly_decreasing;
  summary["loglog_slope"] = table.loglog_slope;
  write_json_atomic(ctx.out_dir / "deviation_summary.json", summary);
  outputs.push_back("deviation_summary.json");
}

// --- rx-decay ---------------------------------------------------------------

inline void run_rx_decay(const RunConfig& rc, BlockContext& ctx,
                         std::vector<std::string>& outputs) {
  const ConfigMap& opt = rc.options;
  opt.require_known_keys(with_common(
      {"d", "sides", "sides_scale", "W_list", "E", "eps", "samples", "origins"}));
  const int d = static_cast<int>(opt.get_int("d"));
  const std::vector<std::int64_t> W_list = opt.get_int_list("W_list");
  const std::vector<std::int64_t> samples = samples_for(opt, W_list.size());
  const double E = opt.get_double("E", 1.0);
  const double eps = opt.get_double("eps", 0.1);
  const int origins = static_cast<int>(opt.get_int("origins", 0));

  std::vector<DecayRow> rows;
  for (std::size_t k = 0; k < W_list.size(); ++k) {
    const int W = static_cast<int>(W_list[k]);
    const std::string block = "W=" + std::to_string(W);
    const std::string csv_name = "rx_W" + std::to_string(W) + ".csv";
    const LatticeTorus torus = build_torus(d, sides_for(opt, d, W));
    if (ctx.can_skip(block)) {
      outputs.push_back(csv_name);
      const json row = ctx.checkpoint["rows"][block];
      DecayRow r;
      r.W = W;
      r.volume = row["volume"].get<std::int64_t>();
      r.rate = row["rate"].get<double>();
      r.rate_times_W = row["rate_times_W"].get<double>();
      r.amplitude = row["amplitude"].get<double>();
      r.fit_rms = row["fit_rms"].get<double>();
      r.fit_points = row["fit_points"].get<int>();
      r.sum_rule_residual = row["sum_rule_residual"].get<double>();
      r.max_g0x_sigma = row["max_g0x_sigma"].get<double>();
      rows.push_back(r);
      continue;
    }
    const auto kernel = std::make_shared<const KernelMatrix>(build_J(torus, W));
    const EnsembleSpec ens = make_ensemble(kernel, samples[k], rc.base_seed);
    ROptions ropts;
    ropts.origins = origins;
    ropts.workers = rc.workers;
    const TwoPointProfile p = estimate_R(ens, E, eps, ropts);
    CsvWriter csv({"radius", "count", "R_re", "R_im", "R_se_re", "R_se_im", "g0x_re", "g0x_im",
                   "g0x_se_re", "g0x_se_im"});
    for (std::size_t i = 0; i < p.radius.size(); ++i)
      csv.add_row({CsvWriter::cell(p.radius[i]), CsvWriter::cell(p.shell_count[i]),
                   CsvWriter::cell(p.R[i].real()), CsvWriter::cell(p.R[i].imag()),
                   CsvWriter::cell(p.R_se_re[i]), CsvWriter::cell(p.R_se_im[i]),
                   CsvWriter::cell(p.g0x[i].real()), CsvWriter::cell(p.g0x[i].imag()),
                   CsvWriter::cell(p.g0x_se_re[i]), CsvWriter::cell(p.g0x_se_im[i])});
    csv.write(ctx.out_dir / csv_name);
    outputs.push_back(csv_name);
    const DecayRow row = decay_row_from_profile(p, W);
    rows.push_back(row);
    json jr;
    jr["volume"] = row.volume;
    jr["rate"] = row.rate;
    jr["rate_times_W"] = row.rate_times_W;
    jr["amplitude"] = row.amplitude;
    jr["fit_rms"] = row.fit_rms;
    jr["fit_points"] = row.fit_points;
    jr["sum_rule_residual"] = row.sum_rule_residual;
    jr["max_g0x_sigma"] = row.max_g0x_sigma;
    ctx.checkpoint["rows"][block] = jr;
    ctx.mark_done(block, {csv_name});
  }
  const DecayReport rep = build_decay_report(rows);
  CsvWriter csv({"W", "volume", "rate", "rate_times_W", "amplitude", "fit_rms", "fit_points",
                 "sum_rule_residual", "max_g0x_sigma"});
  for (const DecayRow& r : rep.rows)
    csv.add_row({CsvWriter::cell(r.W), CsvWriter::cell(r.volume), CsvWriter::cell(r.rate),
                 CsvWriter::cell(r.rate_times_W), CsvWriter::cell(r.amplitude),
                 CsvWriter::cell(r.fit_rms), CsvWriter::cell(r.fit_points),
                 CsvWriter::cell(r.sum_rule_residual), CsvWriter::cell(r.max_g0x_sigma)});
  csv.write(ctx.out_dir / "decay_report.csv");
  outputs.push_back("decay_report.csv");
  json summary;
  summary["rates_positive"] = rep.rates_positive;
  summary["rate_w_ratio"] = rep.rate_w_ratio;
  write_json_atomic(ctx.out_dir / "decay_summary.json", summary);
  outputs.push_back("decay_summary.json");
}

// --- susy-check ---------------------------------------------------------------

inline void run_susy_check(const RunConfig& rc, BlockContext& ctx,
                           std::vector<std::string>& outputs) {
  const ConfigMap& opt = rc.options;
  opt.require_known_keys(with_common({"d", "sides", "W", "E_list", "eps_list", "forms", "nodes",
                                      "tol", "trunc_radius", "contour_shift", "max_refinements",
                                      "mc_samples", "obs_site"}));
  const std::string block = "susy";
  const std::string csv_name = "susy_table.csv";
  if (ctx.can_skip(block)) {
    outputs.push_back(csv_name);
    return;
  }
  const int d = static_cast<int>(opt.get_int("d"));
  const int W = static_cast<int>(opt.get_int("W", 1));
  const LatticeTorus torus = build_torus(d, sides_for(opt, d, 0));
  const auto kernel = std::make_shared<const KernelMatrix>(build_J(torus, W));
  const std::vector<double> E_list = opt.get_double_list("E_list");
  const std::vector<double> eps_list = opt.get_double_list("eps_list");
  std::vector<std::string> forms;
  {
    const std::string fs = opt.get_string("forms", "raw,shifted");
    std::istringstream in(fs);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      if (tok != "raw" && tok != "shifted")
        throw ConfigError("config: forms must be a comma list of raw|shifted");
      forms.push_back(tok);
    }
  }
  QuadratureScheme scheme;
  scheme.nodes = static_cast<int>(opt.get_int("nodes", 64));
  scheme.tol = opt.get_double("tol", 1e-6);
  scheme.trunc_radius = opt.get_double("trunc_radius", 12.0);
  scheme.contour_shift = opt.get_double("contour_shift", 0.75);
  scheme.max_refinements = static_cast<int>(opt.get_int("max_refinements", 2));
  const std::int64_t mc_samples = opt.get_int("mc_samples", 0);
  const int obs_site = static_cast<int>(opt.get_int("obs_site", 0));

  CsvWriter csv({"form", "E", "eps", "volume", "nodes_used", "value_re", "value_im", "error_est",
                 "inorm_re", "inorm_im", "inorm_dev", "second_well_fraction", "mc_re", "mc_im",
                 "mc_se_re", "mc_se_im", "mc_sigma"});
  for (const std::string& form_s : forms) {
    const DualForm form = form_s == "raw" ? DualForm::Raw : DualForm::Shifted;
    for (double E : E_list)
      for (double eps : eps_list) {
        if (form == DualForm::Raw && !(eps > 0)) continue; // raw needs eps > 0
        const DualIntegrandSpec spec = make_dual_spec(kernel, E, eps, form, obs_site);
        const QuadratureResult q = quadrature(spec, scheme);
        double mc_re = 0, mc_im = 0, mc_se_re = 0, mc_se_im = 0, mc_sigma = 0;
        if (mc_samples > 0 && eps > 0) {
          const McReport mc = mc_crosscheck(spec, q.value, mc_samples, rc.base_seed);
          mc_re = mc.mc.real();
          mc_im = mc.mc.imag();
          mc_se_re = mc.se_re;
          mc_se_im = mc.se_im;
          mc_sigma = mc.sigma;
        }
        csv.add_row({form_s, CsvWriter::cell(E), CsvWriter::cell(eps),
                     CsvWriter::cell(torus.volume), CsvWriter::cell(q.nodes_used),
                     CsvWriter::cell(q.value.real()), CsvWriter::cell(q.value.imag()),
                     CsvWriter::cell(q.error), CsvWriter::cell(q.i_norm.real()),
                     CsvWriter::cell(q.i_norm.imag()),
                     CsvWriter::cell(std::abs(q.i_norm - cdouble(1.0))),
                     CsvWriter::cell(q.second_well_fraction), CsvWriter::cell(mc_re),
                     CsvWriter::cell(mc_im), CsvWriter::cell(mc_se_re), CsvWriter::cell(mc_se_im),
                     CsvWriter::cell(mc_sigma)});
      }
  }
  csv.write(ctx.out_dir / csv_name);
  outputs.push_back(csv_name);
  ctx.mark_done(block, {csv_name});
}

// --- grassmann-check ----------------------------------------------------------

inline void run_grassmann_check(const RunConfig& rc, BlockContext& ctx,
                                std::vector<std::string>& outputs) {
  const ConfigMap& opt = rc.options;
  opt.require_known_keys(with_common({"trials", "sizes"}));
  const std::string block = "grassmann";
  const std::string csv_name = "grassmann_report.csv";
  if (ctx.can_skip(block)) {
    outputs.push_back(csv_name);
    return;
  }
  const std::int64_t trials = opt.get_int("trials", 20);
  std::vector<std::int64_t> sizes = opt.has("sizes") ? opt.get_int_list("sizes")
                                                     : std::vector<std::int64_t>{1, 2, 3};
  CsvWriter csv({"test", "N", "trial", "abs_err", "pass"});
  const GaussianStream gs(rc.base_seed, 0, 7);
  std::uint64_t ctr = 0;
  auto draw = [&]() { return gs.normal(ctr++); };
  for (std::int64_t N : sizes) {
    for (std::int64_t t = 0; t < trials; ++t) {
      Eigen::MatrixXcd M(N, N);
      for (std::int64_t i = 0; i < N; ++i)
        for (std::int64_t j = 0; j < N; ++j) M(i, j) = cdouble(draw(), draw());
      const DetIdentityReport r = verify_det_identity(M);
      csv.add_row({"gaussian_det", CsvWriter::cell(static_cast<std::int64_t>(N)),
                   CsvWriter::cell(t), CsvWriter::cell(r.rel_err),
                   r.pass ? "1" : "0"});
    }
  }
  // Supermatrix identity battery on 1|1 and 2|2 blocks over a 2-pair algebra.
  for (int nb : {1, 2}) {
    for (std::int64_t t = 0; t < trials; ++t) {
      const int ngen = 4;
      auto rand_super = [&]() {
        Eigen::MatrixXcd a(nb, nb), b(nb, nb);
        for (int i = 0; i < nb; ++i)
          for (int j = 0; j < nb; ++j) {
            a(i, j) = cdouble(draw(), draw()) + (i == j ? cdouble(3.0) : cdouble(0));
            b(i, j) = cdouble(draw(), draw()) + (i == j ? cdouble(3.0) : cdouble(0));
          }
        GMat sigma(nb, nb, ngen), rho(nb, nb, ngen);
        for (int i = 0; i < nb; ++i)
          for (int j = 0; j < nb; ++j) {
            GrassmannElement so(ngen), ro(ngen);
            for (int g = 0; g < ngen; ++g) {
              so += cdouble(draw(), draw()) * GrassmannElement::generator(ngen, g);
              ro += cdouble(draw(), draw()) * GrassmannElement::generator(ngen, g);
            }
            sigma.at(i, j) = so;
            rho.at(i, j) = ro;
          }
        return SuperMatrix::from_blocks(a, b, sigma, rho);
      };
      const SuperMatrix M1 = rand_super();
      const SuperMatrix M2 = rand_super();
      const SdetIdentityReport rep = sdet_and_identities(M1, M2, cdouble(draw(), draw()));
      const double err = std::max(std::max(rep.product_err, rep.inverse_err),
                                  std::max(rep.scale_err, rep.strln_err));
      csv.add_row({"sdet_identities", CsvWriter::cell(nb), CsvWriter::cell(t),
                   CsvWriter::cell(err), rep.pass ? "1" : "0"});
    }
  }
  csv.write(ctx.out_dir / csv_name);
  outputs.push_back(csv_name);
  ctx.mark_done(block, {csv_name});
}

// --- kernel-audit ---------------------------------------------------------------

inline void run_kernel_audit(const RunConfig& rc, BlockContext& ctx,
                             std::vector<std::string>& outputs) {
  const ConfigMap& opt = rc.options;
  opt.require_known_keys(with_common({"d", "sides", "sides_scale", "W_list", "kinds", "E"}));
  const int d = static_cast<int>(opt.get_int("d"));
  const std::vector<std::int64_t> W_list = opt.get_int_list("W_list");
  const double E = opt.get_double("E", 1.0);
  std::vector<std::string> kinds;
  {
    const std::string ks = opt.get_string("kinds", "J,C,B");
    std::istringstream in(ks);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      if (tok != "J" && tok != "C" && tok != "B")
        throw ConfigError("config: kinds must be a comma list of J|C|B");
      kinds.push_back(tok);
    }
  }
  // Kernel construction is cheap, so the audit runs as a single block.
  const std::string block = "kernel";
  if (ctx.can_skip(block)) {
    for (const auto& f : ctx.checkpoint["files"][block])
      outputs.push_back(f.get<std::string>());
    return;
  }
  CsvWriter report({"kind", "W", "volume", "mass_re", "mass_im", "profile_residual",
                    "dense_residual", "row_sum_dev", "fit_rate", "fit_intercept",
                    "rate_bound", "rate_bound_ok", "envelope_monotone", "axis_monotone"});
  for (std::int64_t W64 : W_list) {
    const int W = static_cast<int>(W64);
    const LatticeTorus torus = build_torus(d, sides_for(opt, d, W));
    for (const std::string& kind : kinds) {
      const std::string csv_name = "kernel_" + kind + "_W" + std::to_string(W) + ".csv";
      outputs.push_back(csv_name);
      KernelMatrix K = kind == "J"   ? build_J(torus, W)
                       : kind == "C" ? build_C(torus, W, E)
                                     : build_B(torus, W, E);
      const double prof_res = kernel_profile_residual(torus, W, K.mass, K.profile);
      const double dense_res = torus.volume <= 2048 ? kernel_dense_residual(K) : -1.0;
      // Row sums must equal the zero-mode 1/mass (= 1 for J).
      const cdouble row_sum = K.profile_sum();
      const double row_dev = std::abs(row_sum - 1.0 / K.mass);
      const DecayProfile dp = decay_profile(K);
      const std::vector<double> env = binned_envelope(K);
      bool env_mono = true;
      int min_side = torus.sides[0];
      for (int s : torus.sides) min_side = std::min(min_side, s);
      for (std::size_t b = static_cast<std::size_t>(K.W) + 1;
           b < env.size() && b <= static_cast<std::size_t>(min_side / 2); ++b)
        if (env[b] > env[b - 1] * (1.0 + 1e-12)) env_mono = false;
      const std::vector<double> ax = axis_profile(K, 0);
      bool ax_mono = true;
      for (int xx = 1; xx <= torus.sides[0] / 2; ++xx)
        if (ax[static_cast<std::size_t>(xx)] >
            ax[static_cast<std::size_t>(xx - 1)] * (1.0 + 1e-12))
          ax_mono = false;
      CsvWriter shells({"radius", "count", "max_abs"});
      for (const ShellPoint& sp : dp.shells)
        shells.add_row({CsvWriter::cell(sp.radius), CsvWriter::cell(sp.count),
                        CsvWriter::cell(sp.max_abs)});
      shells.write(ctx.out_dir / csv_name);
      report.add_row({kind, CsvWriter::cell(W), CsvWriter::cell(torus.volume),
                      CsvWriter::cell(K.mass.real()), CsvWriter::cell(K.mass.imag()),
                      CsvWriter::cell(prof_res), CsvWriter::cell(dense_res),
                      CsvWriter::cell(row_dev), CsvWriter::cell(dp.fit_rate),
                      CsvWriter::cell(dp.fit_intercept), CsvWriter::cell(dp.rate_bound),
                      dp.rate_bound_ok ? "1" : "0", env_mono ? "1" : "0", ax_mono ? "1" : "0"});
    }
  }
  report.write(ctx.out_dir / "kernel_report.csv");
  outputs.push_back("kernel_report.csv");
  ctx.mark_done(block, outputs);
}

// --- saddle-table ---------------------------------------------------------------

inline void run_saddle_table(const RunConfig& rc, BlockContext& ctx,
                             std::vector<std::string>& outputs) {
  const ConfigMap& opt = rc.options;
  opt.require_known_keys(with_common({"E_min", "E_max", "points", "eta"}));
  const std::string block = "saddle";
  const std::string csv_name = "saddle_table.csv";
  if (ctx.can_skip(block)) {
    outputs.push_back(csv_name);
    outputs.push_back("saddle_summary.json");
    return;
  }
  const double eta = opt.get_double("eta", kDefaultEnergyWindowEta);
  const double emin = opt.get_double("E_min", -1.8);
  const double emax = opt.get_double("E_max", 1.8);
  const std::int64_t points = opt.get_int("points", 73);
  if (points < 2) throw ConfigError("config: points must be >= 2");
  CsvWriter csv({"E", "escr_re", "escr_im", "rho_sc", "mr2", "mi2", "hessian_re", "hessian_im",
                 "f1_stationarity", "f2_stationarity", "unit_product_dev", "second_well_offset"});
  double max_stat = 0;
  for (std::int64_t k = 0; k < points; ++k) {
    const double E = emin + (emax - emin) * static_cast<double>(k) / static_cast<double>(points - 1);
    if (!(std::abs(E) > eta) || std::abs(E) > kEnergyWindowMax) continue;
    const SaddleData s = saddle_data(E, eta);
    const double f1s = std::abs(f1_prime(s.escr, E));
    const double f2s = std::abs(f2_prime(s.saddle_b[0], E));
    const double unit = std::abs(s.escr * s.estar - 1.0);
    max_stat = std::max(max_stat, std::max(f1s, f2s));
    csv.add_row({CsvWriter::cell(E), CsvWriter::cell(s.escr.real()), CsvWriter::cell(s.escr.imag()),
                 CsvWriter::cell(s.rho_sc), CsvWriter::cell(s.mr2), CsvWriter::cell(s.mi2),
                 CsvWriter::cell(s.hessian.real()), CsvWriter::cell(s.hessian.imag()),
                 CsvWriter::cell(f1s), CsvWriter::cell(f2s), CsvWriter::cell(unit),
                 CsvWriter::cell(s.second_well_offset)});
  }
  csv.write(ctx.out_dir / csv_name);
  outputs.push_back(csv_name);
  // Semicircle normalization, integrated adaptively.
  const double total = adaptive_integrate<double>([](double E) { return semicircle(E); },
                                                  -2.0, 2.0, 1e-10);
  json summary;
  summary["semicircle_integral"] = total;
  summary["max_stationarity_residual"] = max_stat;
  write_json_atomic(ctx.out_dir / "saddle_summary.json", summary);
  outputs.push_back("saddle_summary.json");
  ctx.mark_done(block, {csv_name, "saddle_summary.json"});
}

} // namespace harness_detail

// Run one experiment end to end: validate config, execute per-W blocks with
// checkpoint/resume, emit CSV outputs plus a manifest with content hashes.
inline int run(const RunConfig& rc) {
  const std::string started = now_iso8601();
  std::filesystem::create_directories(rc.out_dir);
  harness_detail::BlockContext ctx;
  ctx.out_dir = rc.out_dir;
  {
    json cfg = rc.options.to_json();
    cfg["experiment"] = rc.experiment;
    cfg["seed"] = std::to_string(rc.base_seed);
    ctx.config_hash = to_hex(fnv1a64(cfg.dump()));
  }
  ctx.load();
  std::vector<std::string> outputs;
  if (rc.experiment == "dos-sweep")
    harness_detail::run_dos_sweep(rc, ctx, outputs);
  else if (rc.experiment == "rx-decay")
    harness_detail::run_rx_decay(rc, ctx, outputs);
  else if (rc.experiment == "susy-check")
    harness_detail::run_susy_check(rc, ctx, outputs);
  else if (rc.experiment == "grassmann-check")
    harness_detail::run_grassmann_check(rc, ctx, outputs);
  else if (rc.experiment == "kernel-audit")
    harness_detail::run_kernel_audit(rc, ctx, outputs);
  else if (rc.experiment == "saddle-table")
    harness_detail::run_saddle_table(rc, ctx, outputs);
  else
    throw ConfigError("unknown experiment: " + rc.experiment);

  std::sort(outputs.begin(), outputs.end());
  outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());
  json manifest;
  manifest["tool"] = "bandwig";
  manifest["version"] = kVersion;
  manifest["experiment"] = rc.experiment;
  manifest["config"] = rc.options.to_json();
  manifest["config_hash"] = ctx.config_hash;
  manifest["seed"] = std::to_string(rc.base_seed);
  manifest["workers"] = rc.workers;
  manifest["resumed"] = ctx.resumed;
  manifest["started_at"] = started;
  manifest["finished_at"] = now_iso8601();
  json files = json::array();
  for (const std::string& name : outputs) {
    json f;
    f["file"] = name;
    f["fnv1a64"] = to_hex(fnv1a64_file(rc.out_dir / name));
    files.push_back(f);
  }
  manifest["outputs"] = files;
  manifest["status"] = "complete";
  write_json_atomic(rc.out_dir / "manifest.json", manifest);
  ctx.finish();
  return 0;
}

} // namespace bandwig
