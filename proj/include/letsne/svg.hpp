#pragma once

#include <string>
#include <vector>

#include "letsne/common.hpp"
#include "letsne/segmentation.hpp"

namespace letsne {

enum class ColorMode { categorical, continuous };

/// Scatter plot of the first two embedding columns: one circle per sample,
/// linear viewport mapping with 5% margins. Categorical values cycle a
/// 12-color palette; continuous values map onto a blue-to-red ramp.
/// `color_values` may be empty (single color).
std::string scatter_svg(const Matrix& points, const std::vector<double>& color_values,
                        ColorMode mode, double point_size);

/// Region map rendered as flat-colored cells, palette cycling by region id.
std::string region_svg(const RegionMap& map);

}  // namespace letsne
