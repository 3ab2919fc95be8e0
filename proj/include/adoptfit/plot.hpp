#pragma once

// Static SVG renderings of the analytics outputs.

#include "adoptfit/analytics.hpp"

#include <span>
#include <string>

namespace adoptfit {

std::string histograms_svg(const ParameterHistograms& h);

//! Axes switch to log10 for any coordinate that is positive across all points.
std::string pairwise_svg(const PairwisePanels& panels);

//! One panel per horizon, one line per organization.
std::string org_density_svg(std::span<const OrgDensityReport> reports);

} // namespace adoptfit
