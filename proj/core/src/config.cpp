#include "crashre/config.hpp"

#include <charconv>
#include <sstream>

#include <json.hpp>

#include "crashre/errors.hpp"
#include "crashre/kv_file.hpp"
#include "crashre/trace_io.hpp"

namespace crashre {

namespace {

[[noreturn]] void bad_value(std::string_view origin, std::string_view key,
                            std::string_view value, std::string_view expected) {
  throw SpecError(std::string(origin) + ": `" + std::string(key) + " = " + std::string(value) +
                      "`: expected " + std::string(expected),
                  "config");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = value.find(',');
    const auto item = trim(value.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  return out;
}

template <class T>
T parse_number(std::string_view origin, std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(origin, key, value, "a number");
  return out;
}

bool parse_bool(std::string_view origin, std::string_view key, std::string_view value) {
  if (value == "true" || value == "yes" || value == "1") return true;
  if (value == "false" || value == "no" || value == "0") return false;
  bad_value(origin, key, value, "true or false");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace

void RunSpec::validate() const {
  expand_covariates(model.covariates);
  priors.validate();
  sampler.validate();
  if (threshold < 0) throw SpecError("threshold must be nonnegative", "config");
  if (max_draws == 0) throw SpecError("max_draws must be positive", "config");
}

RunSpec parse_run_spec(std::string_view text, std::string_view origin) {
  const KeyValues kv = parse_key_values(text, origin);
  RunSpec spec;
  bool covariates_given = false;
  for (const auto& [key, raw] : kv) {
    const std::string_view v = raw;
    if (key == "crash_type") {
      spec.model.crash_type = parse_crash_type(v);
    } else if (key == "covariates") {
      spec.model.covariates = split_list(v);
      covariates_given = true;
    } else if (key == "center_covariates") {
      spec.model.center_covariates = parse_bool(origin, key, v);
    } else if (key == "traffic_side") {
      if (v == "right") {
        spec.traffic_side = TrafficSide::kRight;
      } else if (v == "left") {
        spec.traffic_side = TrafficSide::kLeft;
      } else {
        bad_value(origin, key, v, "right or left");
      }
    } else if (key == "beta_variance") {
      spec.priors.beta_variance = parse_number<double>(origin, key, v);
    } else if (key == "r_shape") {
      spec.priors.r.shape = parse_number<double>(origin, key, v);
    } else if (key == "r_scale") {
      spec.priors.r.scale = parse_number<double>(origin, key, v);
    } else if (key == "sigma2_shape") {
      spec.priors.sigma2_phi.shape = parse_number<double>(origin, key, v);
    } else if (key == "sigma2_scale") {
      spec.priors.sigma2_phi.scale = parse_number<double>(origin, key, v);
    } else if (key == "chains") {
      spec.sampler.n_chains = parse_number<std::size_t>(origin, key, v);
    } else if (key == "iterations") {
      spec.sampler.n_iterations = parse_number<std::size_t>(origin, key, v);
    } else if (key == "burnin") {
      spec.sampler.n_burnin = parse_number<std::size_t>(origin, key, v);
    } else if (key == "thinning") {
      spec.sampler.thinning = parse_number<std::size_t>(origin, key, v);
    } else if (key == "adapt_window") {
      spec.sampler.adapt_window = parse_number<std::size_t>(origin, key, v);
    } else if (key == "target_acceptance") {
      spec.sampler.target_acceptance = parse_number<double>(origin, key, v);
    } else if (key == "seed") {
      spec.sampler.seed = parse_number<std::uint64_t>(origin, key, v);
    } else if (key == "chain_seeds") {
      spec.sampler.chain_seeds.clear();
      for (const auto& s : split_list(v)) {
        spec.sampler.chain_seeds.push_back(parse_number<std::uint64_t>(origin, key, s));
      }
    } else if (key == "random_effects") {
      spec.sampler.random_effects = parse_bool(origin, key, v);
    } else if (key == "fixed_r") {
      if (v == "none" || v.empty()) {
        spec.sampler.fixed_r.reset();
      } else {
        spec.sampler.fixed_r = parse_number<double>(origin, key, v);
      }
    } else if (key == "store_phi") {
      spec.sampler.store_phi = parse_bool(origin, key, v);
    } else if (key == "centered_proposals") {
      spec.sampler.centered_proposals = parse_bool(origin, key, v);
    } else if (key == "scale_move") {
      spec.sampler.scale_move = parse_bool(origin, key, v);
    } else if (key == "parallel_chains") {
      spec.sampler.parallel_chains = parse_bool(origin, key, v);
    } else if (key == "threshold") {
      spec.threshold = parse_number<std::int64_t>(origin, key, v);
    } else if (key == "max_draws") {
      spec.max_draws = parse_number<std::size_t>(origin, key, v);
    } else {
      throw SpecError(std::string(origin) + ": unknown key `" + key + "`", "config");
    }
  }
  if (!covariates_given) spec.model.covariates = default_covariates(spec.model.crash_type);
  spec.validate();
  return spec;
}

RunSpec load_run_spec(const std::filesystem::path& path) {
  return parse_run_spec(read_text_file(path), path.string());
}

std::string RunSpec::to_text() const {
  std::ostringstream out;
  out << "crash_type = " << to_string(model.crash_type) << '\n'
      << "covariates = " << join(model.covariates) << '\n'
      << "center_covariates = " << (model.center_covariates ? "true" : "false") << '\n'
      << "traffic_side = " << (traffic_side == TrafficSide::kRight ? "right" : "left") << '\n'
      << "beta_variance = " << format_double(priors.beta_variance) << '\n'
      << "r_shape = " << format_double(priors.r.shape) << '\n'
      << "r_scale = " << format_double(priors.r.scale) << '\n'
      << "sigma2_shape = " << format_double(priors.sigma2_phi.shape) << '\n'
      << "sigma2_scale = " << format_double(priors.sigma2_phi.scale) << '\n'
      << "chains = " << sampler.n_chains << '\n'
      << "iterations = " << sampler.n_iterations << '\n'
      << "burnin = " << sampler.n_burnin << '\n'
      << "thinning = " << sampler.thinning << '\n'
      << "adapt_window = " << sampler.adapt_window << '\n'
      << "target_acceptance = " << format_double(sampler.target_acceptance) << '\n'
      << "seed = " << sampler.seed << '\n';
  if (!sampler.chain_seeds.empty()) {
    out << "chain_seeds = ";
    for (std::size_t c = 0; c < sampler.chain_seeds.size(); ++c) {
      out << (c ? ", " : "") << sampler.chain_seeds[c];
    }
    out << '\n';
  }
  out << "random_effects = " << (sampler.random_effects ? "true" : "false") << '\n'
      << "fixed_r = " << (sampler.fixed_r ? format_double(*sampler.fixed_r) : "none") << '\n'
      << "store_phi = " << (sampler.store_phi ? "true" : "false") << '\n'
      << "centered_proposals = " << (sampler.centered_proposals ? "true" : "false") << '\n'
      << "scale_move = " << (sampler.scale_move ? "true" : "false") << '\n'
      << "parallel_chains = " << (sampler.parallel_chains ? "true" : "false") << '\n'
      << "threshold = " << threshold << '\n'
      << "max_draws = " << max_draws << '\n';
  return out.str();
}

std::string RunSpec::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = {{"crash_type", to_string(model.crash_type)},
                {"covariates", model.covariates},
                {"expanded_columns", expand_covariates(model.covariates)},
                {"center_covariates", model.center_covariates}};
  j["priors"] = {{"beta_variance", priors.beta_variance},
                 {"r", {{"shape", priors.r.shape}, {"scale", priors.r.scale}}},
                 {"sigma2_phi",
                  {{"shape", priors.sigma2_phi.shape}, {"scale", priors.sigma2_phi.scale}}}};
  nlohmann::ordered_json s = {{"chains", sampler.n_chains},
                              {"iterations", sampler.n_iterations},
                              {"burnin", sampler.n_burnin},
                              {"thinning", sampler.thinning},
                              {"adapt_window", sampler.adapt_window},
                              {"target_acceptance", sampler.target_acceptance},
                              {"seed", sampler.seed},
                              {"chain_seeds", sampler.resolved_seeds()},
                              {"random_effects", sampler.random_effects},
                              {"store_phi", sampler.store_phi},
                              {"centered_proposals", sampler.centered_proposals},
                              {"scale_move", sampler.scale_move},
                              {"parallel_chains", sampler.parallel_chains}};
  s["fixed_r"] = sampler.fixed_r ? nlohmann::ordered_json(*sampler.fixed_r) : nullptr;
  j["sampler"] = std::move(s);
  j["traffic_side"] = traffic_side == TrafficSide::kRight ? "right" : "left";
  j["threshold"] = threshold;
  j["max_draws"] = max_draws;
  return j.dump(2);
}

}  // namespace crashre
