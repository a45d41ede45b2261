#include "peal/cdw.hpp"
#include "peal/experiments.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> g;
  std::optional<int> L;
  std::optional<double> dt;
  std::optional<long> steps;
  std::optional<int> stride;
  std::optional<std::string> model;
};

void add_flags(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "configuration file");
  sub->add_option("--seed", f.seed, "global seed");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--g", f.g, "coupling g");
  sub->add_option("--L", f.L, "chain length");
  sub->add_option("--dt", f.dt, "time step");
  sub->add_option("--steps", f.steps, "number of steps");
  sub->add_option("--stride", f.stride, "record stride");
  sub->add_option("--model", f.model, "model JSON, or 'exact'");
}

std::string str(double x) { return peal::format_double(x); }

peal::RunConfig merged(const Flags& f, const std::string& command) {
  peal::RunConfig cfg = f.config.empty() ? peal::RunConfig{} : peal::RunConfig::load(f.config);
  if (f.seed) cfg.set("run", "seed", std::to_string(*f.seed));
  if (f.out) cfg.set("run", "out", *f.out);
  if (f.g) {
    cfg.set("model", "g", str(*f.g));
    if (command == "simulate") cfg.set("simulate", "g_list", str(*f.g));
  }
  if (f.L) cfg.set("model", "L", std::to_string(*f.L));
  if (f.dt) cfg.set("model", "dt", str(*f.dt));
  if (f.steps) cfg.set("run", "steps", std::to_string(*f.steps));
  if (f.stride) cfg.set("run", "stride", std::to_string(*f.stride));
  if (f.model) cfg.set("run", "model", *f.model);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using Command = std::function<int(const peal::RunConfig&, std::ostream&)>;
  const std::map<std::string, std::pair<Command, std::string>> commands = {
      {"simulate", {peal::cmd_simulate, "exact adiabatic trajectories"}},
      {"train", {peal::cmd_train, "build a dataset and fit a surrogate model"}},
      {"predict", {peal::cmd_predict, "PEAL trajectory from a model"}},
      {"compare", {peal::cmd_compare, "PEAL against exact dynamics"}},
      {"scaling", {peal::cmd_scaling, "test error against training sample count"}},
      {"ensemble", {peal::cmd_ensemble, "ensemble Q_i Q_j statistics"}},
      {"analyze-cdw", {peal::cmd_analyze_cdw, "CDW response curves and size table"}},
      {"check-bounds", {peal::cmd_check_bounds, "error stiffness and relaxation bound"}},
      {"relax", {peal::cmd_relax, "relaxation simulation of a worst-case spec"}},
  };

  CLI::App app{"Adiabatic Holstein dynamics with learned electron observables"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& [name, entry] : commands) add_flags(app.add_subcommand(name, entry.second), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return commands.at(name).first(merged(flags, name), std::cout);
  } catch (const peal::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const peal::ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return 1;
  } catch (const peal::DomainError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return 1;
  } catch (const peal::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
