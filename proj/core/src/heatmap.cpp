#include "hsdlab/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hsdlab/errors.hpp"

namespace hsd {

namespace {

constexpr int kCell = 56;
constexpr int kMarginLeft = 110;
constexpr int kMarginTop = 60;

// Ramp endpoints: white (low) to navy (high).
constexpr int kLow[3] = {255, 255, 255};
constexpr int kHigh[3] = {8, 48, 107};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string color(double t) {
  char buf[16];
  int rgb[3];
  for (int k = 0; k < 3; ++k) rgb[k] = static_cast<int>(std::lround(kLow[k] + t * (kHigh[k] - kLow[k])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace

std::string heatmap_svg(const Mat& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title) {
  const auto rows = values.rows();
  const auto cols = values.cols();
  if (rows < 1 || cols < 1) throw DomainError("heatmap needs a non-empty matrix");
  if (static_cast<Eigen::Index>(row_labels.size()) != rows || static_cast<Eigen::Index>(col_labels.size()) != cols)
    throw DomainError("heatmap label counts do not match the matrix shape");
  if (!values.allFinite()) throw NumericError("heatmap values must be finite");

  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  const int width = kMarginLeft + static_cast<int>(cols) * kCell + 20;
  const int height = kMarginTop + static_cast<int>(rows) * kCell + 20;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  if (!title.empty()) svg << "<text x=\"" << kMarginLeft << "\" y=\"18\" font-size=\"13\">" << escape(title) << "</text>\n";
  for (Eigen::Index j = 0; j < cols; ++j)
    svg << "<text x=\"" << kMarginLeft + j * kCell + kCell / 2 << "\" y=\"" << kMarginTop - 8
        << "\" text-anchor=\"middle\">" << escape(col_labels[static_cast<std::size_t>(j)]) << "</text>\n";
  char buf[32];
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int y = kMarginTop + static_cast<int>(i) * kCell;
    svg << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << y + kCell / 2 + 4 << "\" text-anchor=\"end\">"
        << escape(row_labels[static_cast<std::size_t>(i)]) << "</text>\n";
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = values(i, j);
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      const int x = kMarginLeft + static_cast<int>(j) * kCell;
      std::snprintf(buf, sizeof buf, "%.3f", v);
      svg << "<rect class=\"cell\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\"" << kCell << "\" fill=\""
          << color(t) << "\" stroke=\"#cccccc\"/>";
      svg << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
          << (t > 0.55 ? "#ffffff" : "#000000") << "\">" << buf << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_heatmap(const Mat& values, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::filesystem::path& path,
                    const std::string& title) {
  const std::string svg = heatmap_svg(values, row_labels, col_labels, title);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write heatmap " + path.string());
  out << svg;
  if (!out) throw Error("failed writing heatmap " + path.string());
}

}  // namespace hsd
