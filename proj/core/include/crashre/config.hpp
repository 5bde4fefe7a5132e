#ifndef CRASHRE_CONFIG_HPP_
#define CRASHRE_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "crashre/data_model.hpp"
#include "crashre/design.hpp"
#include "crashre/model.hpp"
#include "crashre/sampler.hpp"

namespace crashre {

// Everything a fit needs besides the data. Read from key = value text:
//
//   crash_type = rear_end
//   covariates = lanes_right, coordinated, left_turn_control
//   iterations = 20000
//   burnin = 2000
//
// Omitted keys keep their defaults; covariates default to the crash
// type's default_covariates(). Unknown keys are an error.
struct RunSpec {
  ModelSpec model;
  PriorSpec priors;
  SamplerConfig sampler;
  TrafficSide traffic_side = TrafficSide::kRight;
  std::int64_t threshold = 0;      // hotspot exceedance threshold
  std::size_t max_draws = 4000;    // posterior draws kept for prediction

  void validate() const;

  // Canonical key = value text; parse_run_spec(to_text()) reproduces the spec.
  std::string to_text() const;
  std::string to_json() const;
};

RunSpec parse_run_spec(std::string_view text, std::string_view origin = "<run spec>");
RunSpec load_run_spec(const std::filesystem::path& path);

}  // namespace crashre

#endif  // CRASHRE_CONFIG_HPP_
