#pragma once

#include <string>

#include "json.hpp"
#include "qdspin/dynamics.hpp"
#include "qdspin/experiments.hpp"

namespace qdspin::io {

// CSV layout: '#'-prefixed manifest block (compact JSON), then a header of
// axis columns plus direction, mean_counts, shots, std_err.
std::string sweep_to_csv(const experiments::SweepResult& result);
void write_text(const std::string& path, const std::string& text);

// debug dump: t_s, then re/im of every density-matrix element
std::string trajectory_to_csv(const dynamics::Trajectory& traj);

// <kind>_<seed> naming from the sweep manifest
std::string artifact_stem(const experiments::SweepResult& result);

nlohmann::json report_skeleton(const experiments::SweepResult& result);
nlohmann::json fit_to_json(const fitting::FitResult& fit);

}  // namespace qdspin::io
