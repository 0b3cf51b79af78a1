// SPDX-License-Identifier: Apache-2.0
// Command-line driver: simulate, limit, estimate, compare, pipeline, validate.
#include "zext/cli/config.hpp"
#include "zext/cli/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

struct Overrides {
  std::string config;
  std::string pipeline;
  std::string model;
  std::string eps;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::string out;
  bool strict = false;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "JSON config file");
  app->add_option("--pipeline", o.pipeline, "integrable | non-centered | centered | birkhoff");
  app->add_option("--model", o.model, "toy | billiard");
  app->add_option("--eps", o.eps, "comma-separated eps ladder");
  app->add_option("--n", o.n, "ensemble size");
  app->add_option("--seed", o.seed, "master seed");
  app->add_option("--jobs", o.jobs, "worker threads (default: machine parallelism)");
  app->add_option("--out", o.out, "output directory (SLOWFAST_OUT overrides)");
  app->add_flag("--strict", o.strict, "nonzero exit when an acceptance check fails");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw zext::ConfigError("--eps: cannot parse '" + item + "'");
    }
  }
  return out;
}

std::pair<zext::cli::ExperimentConfig, zext::cli::ConfigSource> resolve(const Overrides& o) {
  using namespace zext::cli;
  ExperimentConfig c;
  ConfigSource src;
  if (!o.config.empty()) {
    c = load_config(o.config);
    std::ifstream in(o.config);
    std::stringstream ss;
    ss << in.rdbuf();
    src = ConfigSource(ss.str(), o.config);
  }
  if (!o.pipeline.empty()) {
    c.pipeline = zext::limitproc::limit_kind_from_string(o.pipeline);
    if (!c.spec_given) c.spec = default_spec(c.pipeline);
  }
  if (!o.model.empty()) {
    if (o.model != "toy" && o.model != "billiard") throw zext::ConfigError("--model: unknown model '" + o.model + "'");
    c.model.kind = o.model;
  }
  if (!o.eps.empty()) c.eps = parse_list(o.eps);
  if (o.n) c.n = *o.n;
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (c.jobs == 0) c.jobs = zext::default_jobs();
  if (!o.out.empty()) c.out = o.out;
  if (const char* env = std::getenv("SLOWFAST_OUT"); env && *env) c.out = env;
  return {c, src};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slow-fast systems over Z-extensions: simulation, limit laws, comparison"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const char* name : {"simulate", "limit", "estimate", "compare", "pipeline", "validate"}) {
    auto* sub = app.add_subcommand(name);
    add_common(sub, o);
    subs.emplace_back(name, sub);
  }
  CLI11_PARSE(app, argc, argv);

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  try {
    auto [c, src] = resolve(o);
    using namespace zext::cli;
    if (command == "validate") {
      const auto rep = validate(c, src);
      std::cout << rep.to_json().dump(2) << "\n";
      return rep.ok() || !o.strict ? 0 : 1;
    }
    if (const auto rep = validate(c, src); !rep.ok()) {
      std::cerr << "invalid config: " << rep.first_failure() << "\n";
      return 2;
    }
    if (command == "simulate") {
      run_simulate(c);
    } else if (command == "estimate") {
      run_estimate(c);
    } else if (command == "limit") {
      run_limit(c);
    } else {
      const auto r = command == "compare" ? run_compare(c) : run_pipeline(c);
      std::cout << r.checks.dump(2) << "\n";
      if (o.strict && !r.ok) {
        std::cerr << "acceptance check failed\n";
        return 1;
      }
    }
    std::cout << "wrote " << c.out << "\n";
  } catch (const zext::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
