#pragma once

#include <iholo/config.hpp>
#include <iholo/simulate.hpp>

namespace bench {

/// Coherent run on a small grid; roughly two camera events per trial.
inline iholo::events::EventStream coherent_stream(std::uint64_t trials, int width = 32) {
  nlohmann::json doc = {{"grid", {{"width", width}, {"height", width}}},
                        {"beam", {{"waist_px", width / 3.0}}},
                        {"shear", {{"k0", 0.62}}},
                        {"signal", {{"kind", "coherent"}, {"mean_photons", 1.0}}},
                        {"detector", "ideal"},
                        {"trials", trials},
                        {"rng_seed", 11}};
  return iholo::sim::run_simulation(iholo::parse_config(doc), {1});
}

} // namespace bench
