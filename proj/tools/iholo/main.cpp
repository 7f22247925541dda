#include "commands.hpp"

#include <iholo/error.hpp>

#include <iostream>

using namespace iholo;
using namespace iholo::cli;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::config: return 2;
  case ErrorKind::io: return 3;
  case ErrorKind::format: return 4;
  case ErrorKind::numeric: return 5;
  case ErrorKind::no_data: return 6;
  }
  return 7;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Intensity-correlation holography: simulate, correlate, retrieve, report"};
  app.set_version_flag("--version", std::string(IHOLO_VERSION));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--seed", global.seed, "Override the config rng_seed");
  app.add_option("--threads", global.threads, "Worker threads (default IHOLO_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--config", global.config, "Experiment config or preset JSON");

  register_simulate(app, global);
  register_correlate(app, global);
  register_retrieve(app, global);
  register_theory(app, global);
  register_events(app, global);
  register_report(app, global);
  register_pipeline(app, global);
  register_manifest(app, global);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const Error &e) {
    std::cerr << "iholo: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "iholo: internal error: " << e.what() << '\n';
    return 7;
  }
  return 0;
}
