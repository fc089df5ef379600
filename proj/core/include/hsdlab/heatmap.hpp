#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hsdlab/types.hpp"

namespace hsd {

/// Deterministic SVG heatmap: fixed white-to-navy ramp over the matrix range,
/// one annotated cell per entry (3 decimals). Identical inputs give identical bytes.
std::string heatmap_svg(const Mat& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title = {});

void render_heatmap(const Mat& values, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::filesystem::path& path,
                    const std::string& title = {});

}  // namespace hsd
