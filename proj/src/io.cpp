#include "qdspin/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "qdspin/errors.hpp"

namespace qdspin::io {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string sweep_to_csv(const experiments::SweepResult& result) {
  std::string out;
  out += "# qdspin sweep\n";
  out += "# manifest: " + result.manifest.dump() + "\n";

  std::string header;
  for (const auto& ax : result.axes) header += ax.name + ",";
  header += "direction,mean_counts,shots,std_err\n";
  out += header;

  // row-major over the axis grid
  const std::size_t n_points = result.points();
  for (const auto& series : result.series) {
    for (std::size_t i = 0; i < n_points; ++i) {
      std::size_t rem = i;
      std::string row;
      if (result.axes.size() == 1) {
        row += format_double(result.axes[0].values[i]) + ",";
      } else {
        std::size_t stride = n_points;
        for (const auto& ax : result.axes) {
          stride /= ax.values.size();
          row += format_double(ax.values[rem / stride]) + ",";
          rem %= stride;
        }
      }
      row += series.direction + ",";
      row += format_double(series.mean_counts[i]) + ",";
      row += std::to_string(series.shots[i]) + ",";
      row += format_double(series.std_err[i]) + "\n";
      out += row;
    }
  }
  return out;
}

std::string trajectory_to_csv(const dynamics::Trajectory& traj) {
  std::string out = "t_s";
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      out += ",rho_re_" + std::to_string(i) + std::to_string(j);
      out += ",rho_im_" + std::to_string(i) + std::to_string(j);
    }
  out += "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out += format_double(traj.times[k]);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const auto v = traj.states[k].rho(i, j);
        out += "," + format_double(v.real());
        out += "," + format_double(v.imag());
      }
    out += "\n";
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write file: " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

std::string artifact_stem(const experiments::SweepResult& result) {
  const std::uint64_t seed = result.manifest.at("seed").get<std::uint64_t>();
  return experiments::to_string(result.kind) + "_" + std::to_string(seed);
}

nlohmann::json report_skeleton(const experiments::SweepResult& result) {
  return {{"schema", 1},
          {"kind", experiments::to_string(result.kind)},
          {"manifest", result.manifest},
          {"fits", nlohmann::json::object()},
          {"flags", nlohmann::json::object()},
          {"derived", nlohmann::json::object()}};
}

nlohmann::json fit_to_json(const fitting::FitResult& fit) {
  nlohmann::json p = nlohmann::json::object(), u = nlohmann::json::object();
  for (const auto& [k, v] : fit.parameters) p[k] = v;
  for (const auto& [k, v] : fit.uncertainties) u[k] = v;
  return {{"model", fit.model},
          {"parameters", p},
          {"uncertainties", u},
          {"rss", fit.rss},
          {"converged", fit.converged},
          {"iterations", fit.iterations}};
}

}  // namespace qdspin::io
