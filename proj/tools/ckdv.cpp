// ckdv: command-line front end for the coupled KdV lab.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ckdv/app.hpp"

namespace app = ckdv::app;

namespace {

template <class F>
int guarded(const char* name, F&& f) {
  try {
    return f();
  } catch (const ckdv::ConfigError& e) {
    std::cerr << name << ": configuration error: " << e.what() << '\n';
    return app::kConfigError;
  } catch (const ckdv::PreconditionError& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return app::kConfigError;
  } catch (const ckdv::NumericalError& e) {
    std::cerr << name << ": numerical failure: " << e.what() << '\n';
    return app::kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << '\n';
    return app::kNumericalError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Coupled KdV system lab"};
  cli.require_subcommand(1);

  std::string config_path;
  std::string out = "results";
  std::size_t threads = 0;

  auto* simulate = cli.add_subcommand("simulate", "Evolve an initial condition and record invariants");
  simulate->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out, "Output directory");

  std::vector<double> cs{0.25, 0.5, 1.0, 2.0, 4.0};
  double t_end = 10.0;
  std::size_t n = 512;
  auto* soliton = cli.add_subcommand("soliton-check", "Travelling-wave residual and propagation error per C");
  soliton->add_option("--c", cs, "Comma-separated speeds")->delimiter(',');
  soliton->add_option("--n", n, "Grid points");
  soliton->add_option("--t-end", t_end, "Propagation time");
  soliton->add_option("--out", out, "Output directory");
  soliton->add_option("--threads", threads, "Worker threads (0: CKDV_THREADS or all cores)");

  std::size_t n_random = 10;
  auto* bracket = cli.add_subcommand("bracket-check", "Compare the bracket flow of H/2 with the equations of motion");
  bracket->add_option("--random", n_random, "Number of random states");
  bracket->add_option("--out", out, "Output directory");

  std::string experiment = "soliton";
  double c = 1.0;
  double delta = 1e-2;
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1;
  std::string mode = "mixed";
  double stab_t_end = 20.0;
  bool no_v_rescale = false;
  bool translate_xi = false;
  auto* stability = cli.add_subcommand("stability", "Perturbed soliton or ground-state stability experiment");
  stability->add_option("--config", config_path, "JSON run configuration (flags below override it)")
      ->check(CLI::ExistingFile);
  auto* o_exp = stability->add_option("--experiment", experiment, "soliton or ground")
                    ->check(CLI::IsMember({"soliton", "ground"}));
  auto* o_c = stability->add_option("--c", c, "Soliton speed");
  auto* o_delta = stability->add_option("--delta", delta, "Perturbation size");
  auto* o_seeds = stability->add_option("--seeds", seeds, "Number of seeds");
  auto* o_first = stability->add_option("--first-seed", first_seed, "First seed");
  auto* o_mode = stability->add_option("--mode", mode, "u-only, xi-only or mixed");
  auto* o_t = stability->add_option("--t-end", stab_t_end, "Final time");
  stability->add_flag("--no-v-rescale", no_v_rescale, "Do not rescale perturbations onto the soliton's V");
  stability->add_flag("--translate-xi", translate_xi, "Let the quotient distance translate xi as well");
  stability->add_option("--threads", threads, "Worker threads (0: CKDV_THREADS or all cores)");
  stability->add_option("--out", out, "Output directory");

  auto* convergence = cli.add_subcommand("convergence", "dt-halving and N-doubling studies on the soliton");
  convergence->add_option("--out", out, "Output directory");
  convergence->add_option("--threads", threads, "Worker threads (0: CKDV_THREADS or all cores)");

  CLI11_PARSE(cli, argc, argv);

  if (*simulate) {
    return guarded("simulate", [&] { return app::cmd_simulate(app::load_config(config_path), out); });
  }
  if (*soliton) {
    return guarded("soliton-check", [&] {
      return app::cmd_soliton_check(cs, out, app::kDefaultLength, n, t_end, 1e-3, threads);
    });
  }
  if (*bracket) {
    return guarded("bracket-check", [&] { return app::cmd_bracket_check(out, n_random); });
  }
  if (*stability) {
    return guarded("stability", [&] {
      app::RunConfig cfg;
      cfg.t_end = 20.0;
      if (!config_path.empty()) cfg = app::load_config(config_path);
      auto& e = cfg.experiment;
      if (*o_exp) e.tag = experiment;
      if (*o_c) e.C = c;
      if (*o_delta) e.delta = delta;
      if (*o_seeds) e.seeds = seeds;
      if (*o_first) cfg.seed = first_seed;
      if (*o_mode) e.mode = ckdv::parse_perturbation_mode(mode);
      if (*o_t) cfg.t_end = stab_t_end;
      if (no_v_rescale) e.v_rescale = false;
      if (translate_xi) e.translate_xi = true;
      if (threads) cfg.threads = threads;
      // Re-run validation on the merged configuration.
      cfg = app::parse_config(app::to_json(cfg));
      return app::cmd_stability(cfg, out);
    });
  }
  if (*convergence) {
    return guarded("convergence", [&] { return app::cmd_convergence(out, threads); });
  }
  return EXIT_FAILURE;
}
