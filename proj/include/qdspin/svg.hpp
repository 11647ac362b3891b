#pragma once

#include <string>
#include <vector>

namespace qdspin::svg {

struct LineSeries {
  std::string label;
  std::vector<double> x, y;
};

// meta (e.g. the run manifest) is embedded as an XML comment
std::string line_plot(const std::string& title, const std::string& x_label,
                      const std::string& y_label, const std::vector<LineSeries>& series,
                      const std::string& meta = "");

// values row-major (ny rows of nx)
std::string heatmap(const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<double>& x,
                    const std::vector<double>& y, const std::vector<double>& values,
                    const std::string& meta = "");

}  // namespace qdspin::svg
