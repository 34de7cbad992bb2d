#pragma once

#include <filesystem>
#include <vector>

namespace hydrocube {

/// Minimal line chart written as an RGB PNG: axes, gridlines, numeric tick
/// labels and one polyline. x is typically a day serial, y a measured value.
void write_line_plot_png(const std::filesystem::path& file, const std::vector<double>& x,
                         const std::vector<double>& y, int width = 720, int height = 360);

}  // namespace hydrocube
