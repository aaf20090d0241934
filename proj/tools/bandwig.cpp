// bandwig: band-matrix spectral laboratory command line.
//
// Exit codes: 0 success, 1 internal failure, 2 configuration error,
// 3 numerical failure (non-convergence or lost precision).

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "bandwig/analytics.hpp"
#include "bandwig/harness.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  int workers = 0;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config, "path to a key=value config file")->required();
  cmd->add_option("-o,--out", args.out, "output directory (overrides config out_dir)");
  cmd->add_option("-s,--seed", args.seed, "base RNG seed (overrides config seed)");
  cmd->add_option("-w,--workers", args.workers, "worker thread count (overrides config)");
}

int run_experiment(const std::string& name, const CommonArgs& args) {
  const bandwig::RunConfig rc =
      bandwig::load_run_config(name, args.config, args.out, args.seed, args.workers);
  const int rv = bandwig::run(rc);
  std::cout << "wrote " << (rc.out_dir / "manifest.json").string() << "\n";
  return rv;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"bandwig: spectral statistics of random band matrices"};
  app.set_version_flag("--version", std::string(bandwig::kVersion));
  app.require_subcommand(1);

  CommonArgs args;
  for (const std::string& name : bandwig::experiment_names()) {
    CLI::App* cmd = app.add_subcommand(name, "run the " + name + " experiment");
    attach_common(cmd, args);
    cmd->callback([name, &args]() {
      const int rv = run_experiment(name, args);
      if (rv != 0) throw CLI::RuntimeError(rv);
    });
  }

  double saddle_E = 1.0;
  double saddle_eta = bandwig::kDefaultEnergyWindowEta;
  CLI::App* saddle = app.add_subcommand("saddle", "print saddle-point data for one energy");
  saddle->add_option("-E,--energy", saddle_E, "energy in the bulk window")->required();
  saddle->add_option("--eta", saddle_eta, "bulk window inner edge");
  saddle->callback([&]() {
    const bandwig::SaddleData s = bandwig::saddle_data(saddle_E, saddle_eta);
    bandwig::json j;
    j["E"] = s.E;
    j["saddle_re"] = s.escr.real();
    j["saddle_im"] = s.escr.imag();
    j["rho_sc"] = s.rho_sc;
    j["mr2"] = s.mr2;
    j["mi2"] = s.mi2;
    j["hessian_re"] = s.hessian.real();
    j["hessian_im"] = s.hessian.imag();
    j["second_well_offset"] = s.second_well_offset;
    std::cout << j.dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const bandwig::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bandwig::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
