#pragma once

#include <string>
#include <vector>

#include "blsacd/diagnostics.hpp"

namespace blsacd {

/// Static SVG figures for offline viewing.
std::string svg_qq(const std::vector<QqPoint>& points, const std::string& title);
std::string svg_correlogram(const Correlogram& c, const std::string& title);
/// Margin 0 or 1 of a prediction band against the observed values.
std::string svg_band(const PredictionBand& band, int margin, const std::string& title);

}  // namespace blsacd
