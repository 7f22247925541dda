#pragma once

#include <iholo/grid.hpp>
#include <iholo/phase_mask.hpp>

#include <filesystem>
#include <iosfwd>
#include <span>

namespace iholo {

// Phase masks travel as 16-bit PGM (phase in [0, 2 pi) mapped linearly onto
// [0, 65535]) or as CSV rows "x,y,radians".

void write_mask_pgm(const PhaseMask &mask, std::ostream &out);
PhaseMask read_mask_pgm(std::istream &in);
void write_mask_csv(const PhaseMask &mask, std::ostream &out);
PhaseMask read_mask_csv(std::istream &in);

/// Dispatches on the extension (.pgm or .csv).
void save_mask(const PhaseMask &mask, const std::filesystem::path &path);
PhaseMask load_mask(const std::filesystem::path &path);

/// Grayscale 16-bit PGM of an arbitrary map, linearly scaled from
/// [min, max] of the finite values onto [0, 65535]. Non-finite values map to 0.
void write_image_pgm(const PixelGrid &grid, std::span<const double> values,
                     std::ostream &out);

} // namespace iholo
