#pragma once

#include <string>
#include <vector>

#include "vsnn/detector.hpp"
#include "vsnn/harness.hpp"

namespace vsnn {

// Raster map: one row per data point, one column per virtual node, green
// marks where the node spiked, with a class-colored sidebar when labels are
// supplied (pass an empty vector to omit it). Labels align with raster rows.
void write_raster_svg(const std::string& path, const SpikeRaster& raster,
                      const std::vector<int>& labels);

// Error-versus-training-size curve: one faint line per run and a bold mean
// line, linear axes.
void write_error_curve_svg(const std::string& path, const ErrorCurve& curve);

}  // namespace vsnn
