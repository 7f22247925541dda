#include "commands.hpp"

#include <iholo/error.hpp>
#include <iholo/theory.hpp>

#include <fmt/format.h>

namespace iholo::cli {

void register_theory(CLI::App &app, const GlobalOptions &global) {
  struct Args {
    std::optional<double> g2_s;
    std::optional<double> g2_r;
    std::optional<double> epsilon;
    std::optional<double> M;
    std::optional<std::string> curve;
    double eps_min{0.01};
    double eps_max{3.0};
    std::size_t points{300};
  };
  auto args = std::make_shared<Args>();
  auto *cmd = app.add_subcommand("theory", "Closed-form background, visibility and optimal imbalance");
  cmd->add_option("--g2-s", args->g2_s, "Signal g2 (default: from --config, else 1)");
  cmd->add_option("--g2-r", args->g2_r, "Reference g2 (default: from --config, else 1)");
  cmd->add_option("--epsilon", args->epsilon, "Intensity ratio <I_r>/<I_s> (default: optimal)");
  cmd->add_option("--M", args->M, "Mode-match factor (default: from --config, else 1)");
  cmd->add_option("--curve", args->curve, "Write the visibility-vs-epsilon curve as CSV");
  cmd->add_option("--eps-min", args->eps_min, "Curve start")->capture_default_str();
  cmd->add_option("--eps-max", args->eps_max, "Curve end")->capture_default_str();
  cmd->add_option("--points", args->points, "Curve samples")->capture_default_str();
  cmd->callback([args, &global] {
    double g2s = 1.0, g2r = 1.0, M = 1.0;
    std::optional<double> eps;
    if (global.config) {
      const ExperimentConfig cfg = load_experiment(*global.config, global).config;
      g2s = cfg.signal.g2();
      g2r = cfg.reference.g2();
      M = cfg.mode_overlap;
      eps = cfg.epsilon;
    }
    g2s = args->g2_s.value_or(g2s);
    g2r = args->g2_r.value_or(g2r);
    M = args->M.value_or(M);
    if (args->epsilon) eps = args->epsilon;

    auto opt = theory::optimal_epsilon(g2s, g2r);
    json out = {{"g2_s", g2s},
                {"g2_r", g2r},
                {"M", M},
                {"epsilon_opt", opt.epsilon},
                {"epsilon_opt_is_supremum", opt.at_supremum}};
    if (!eps && opt.at_supremum) {
      // g2_s = 0: V rises towards M as epsilon -> 0 without reaching it.
      out["epsilon"] = nullptr;
      out["A"] = nullptr;
      out["V0"] = 1.0;
      out["V"] = M;
    } else {
      double e = eps.value_or(opt.epsilon);
      out["epsilon"] = e;
      out["A"] = theory::background_A(g2s, g2r, e);
      out["V0"] = theory::visibility({g2s, g2r, e, 1.0});
      out["V"] = theory::visibility({g2s, g2r, e, M});
    }
    if (args->curve) {
      if (args->points < 2) throw config_error("--points must be at least 2");
      std::string csv = "epsilon,V\n";
      for (const auto &p : theory::visibility_curve(g2s, g2r, M, args->eps_min, args->eps_max, args->points))
        csv += fmt::format("{},{}\n", csv_number(p.epsilon), csv_number(p.V));
      write_text(*args->curve, csv);
      out["curve"] = *args->curve;
    }
    print_json(out);
  });
}

} // namespace iholo::cli
