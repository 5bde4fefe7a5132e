#include "cli.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "crashre/config.hpp"
#include "crashre/data_model.hpp"
#include "crashre/design.hpp"
#include "crashre/diagnostics.hpp"
#include "crashre/errors.hpp"
#include "crashre/kv_file.hpp"
#include "crashre/posterior_report.hpp"
#include "crashre/sampler.hpp"
#include "crashre/simulate.hpp"
#include "crashre/trace_io.hpp"

#ifndef CRASHRE_VERSION
#define CRASHRE_VERSION "unknown"
#endif

namespace crashre::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kRunSpecFile = "run_spec.txt";
constexpr const char* kPhiMeansFile = "phi_means.csv";

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write `" + path.string() + "`");
  f << text;
  if (!f) throw IoError("write failed for `" + path.string() + "`");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory `" + dir.string() + "`: " + ec.message());
}

TrafficSide parse_side(const std::string& s) {
  if (s == "right") return TrafficSide::kRight;
  if (s == "left") return TrafficSide::kLeft;
  throw UsageError("traffic side must be `right` or `left`, got `" + s + "`");
}

std::string side_name(TrafficSide s) { return s == TrafficSide::kRight ? "right" : "left"; }

json file_entry(const fs::path& path) {
  return {{"path", fs::absolute(path).lexically_normal().string()},
          {"bytes", fs::file_size(path)},
          {"sha256", sha256_file(path)}};
}

json read_json(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError("`" + path.string() + "` is not valid JSON: " + e.what());
  }
}

struct FittedRun {
  json manifest;
  RunSpec spec;
  std::vector<Trace> traces;
};

FittedRun load_run(const fs::path& run_dir) {
  const fs::path manifest_path = run_dir / kManifestFile;
  if (!fs::exists(manifest_path)) {
    throw IoError("no fit manifest at `" + manifest_path.string() + "`");
  }
  FittedRun run;
  run.manifest = read_json(manifest_path);
  run.spec = load_run_spec(run_dir / kRunSpecFile);
  for (const auto& name : run.manifest.at("traces")) {
    run.traces.push_back(load_trace_csv(run_dir / name.get<std::string>()));
  }
  if (run.traces.empty()) throw IoError("manifest lists no traces");
  return run;
}

std::vector<CoordinateAcceptance> acceptance_of(const std::vector<ChainResult>& chains) {
  std::vector<CoordinateAcceptance> out;
  if (chains.empty()) return out;
  for (std::size_t s = 0; s < chains.front().coordinate_names.size(); ++s) {
    CoordinateAcceptance a{chains.front().coordinate_names[s], {}};
    for (const auto& c : chains) a.per_chain.push_back(c.acceptance_rate[s]);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<CoordinateAcceptance> acceptance_from_manifest(const json& manifest) {
  std::vector<CoordinateAcceptance> out;
  if (!manifest.contains("acceptance")) return out;
  for (const auto& [name, rates] : manifest.at("acceptance").items()) {
    out.push_back({name, rates.get<std::vector<double>>()});
  }
  return out;
}

Dataset load_for_model(const fs::path& data, const std::optional<fs::path>& schema,
                       TrafficSide side, std::ostream& err) {
  const SchemaMap map = schema ? SchemaMap::from_file(*schema) : SchemaMap{};
  auto loaded = load_dataset(data, map);
  for (const auto& w : loaded.report.warnings) {
    err << "warning: row " << w.row << " `" << w.field << "`: " << w.message << '\n';
  }
  Dataset ds = derive_partner_volumes(loaded.dataset, side);
  if (ds.partner_missing_count() > 0) {
    err << "warning: " << ds.partner_missing_count()
        << " records lack a partner approach; their cross-approach fields stay as loaded\n";
  }
  return ds;
}

std::string predictions_csv(const HotspotRanking& ranking,
                            std::span<const RowPrediction> predictions, const DesignMatrix& dm,
                            const Dataset& ds) {
  std::ostringstream out;
  out << "rank,intersection_id,approach,observed,predicted_mean,q2.5,q97.5,"
         "exceedance,out_of_sample\n";
  for (const auto& e : ranking.entries) {
    const auto& rec = ds.record(e.record_index);
    const auto& p = predictions[e.row];
    out << e.rank << ',' << rec.intersection_id << ',' << approach_letter(rec.approach) << ','
        << dm.row(e.row).response << ',' << format_double(p.mean_theta) << ',' << p.q025 << ','
        << p.q975 << ',' << format_double(p.exceedance) << ','
        << (p.out_of_sample ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read `" + path.string() + "`");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 unavailable");
  }
  std::array<char, 1 << 16> buf;
  while (f) {
    f.read(buf.data(), buf.size());
    if (f.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<size_t>(f.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[md[i] >> 4];
    hex += kHex[md[i] & 0xf];
  }
  return hex;
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream&) {
  GeneratorSpec spec = GeneratorSpec::published(opt.intersections, opt.seed);
  spec.approaches_per_intersection = opt.approaches;
  spec.traffic_side = parse_side(opt.traffic_side);
  if (opt.crash_type) {
    spec.truths = {published_estimates(parse_crash_type(*opt.crash_type))};
  }
  const SyntheticData data = generate(spec);

  ensure_dir(opt.out_dir);
  save_dataset(opt.out_dir / "data.csv", data.dataset);

  json truth;
  truth["seed"] = spec.seed;
  truth["intersections"] = spec.intersections;
  truth["approaches_per_intersection"] = spec.approaches_per_intersection;
  truth["traffic_side"] = side_name(spec.traffic_side);
  truth["truths"] = json::array();
  for (std::size_t t = 0; t < spec.truths.size(); ++t) {
    const auto& tr = spec.truths[t];
    json beta = json::object();
    for (const auto& [name, coef] : tr.beta) beta[name] = coef;
    truth["truths"].push_back({{"crash_type", to_string(tr.crash_type)},
                               {"covariates", tr.design_covariates()},
                               {"beta", beta},
                               {"r", tr.r},
                               {"sigma2_phi", tr.sigma2_phi},
                               {"phi", data.phi[t]}});
  }
  write_file(opt.out_dir / "truth.json", truth.dump(2) + "\n");
  out << "wrote " << data.dataset.size() << " approach records for " << spec.intersections
      << " intersections to " << (opt.out_dir / "data.csv").string() << '\n';
  return kExitOk;
}

int cmd_fit(const FitOptions& opt, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  if (!fs::exists(opt.data)) throw IoError("data file `" + opt.data.string() + "` not found");

  RunSpec spec;
  if (opt.spec) {
    if (opt.crash_type) {
      throw UsageError("--crash-type conflicts with --spec; set crash_type in the spec file");
    }
    spec = load_run_spec(*opt.spec);
  } else {
    spec.model.crash_type = opt.crash_type ? parse_crash_type(*opt.crash_type)
                                           : CrashType::kRearEnd;
    spec.model.covariates = default_covariates(spec.model.crash_type);
  }
  if (opt.seed) spec.sampler.seed = *opt.seed;
  if (opt.chains) spec.sampler.n_chains = *opt.chains;
  if (opt.iterations) spec.sampler.n_iterations = *opt.iterations;
  if (opt.burnin) spec.sampler.n_burnin = *opt.burnin;
  if (opt.threshold) spec.threshold = *opt.threshold;
  spec.validate();

  const Dataset ds = load_for_model(opt.data, opt.schema, spec.traffic_side, err);
  const DesignMatrix dm = build_design(ds, spec.model);
  if (dm.excluded_records > 0) {
    err << "note: " << dm.excluded_records << " records excluded for missing values\n";
  }

  const auto chains = run_chains(dm, spec.priors, spec.sampler);

  ensure_dir(opt.out_dir);
  json trace_files = json::array();
  std::vector<Trace> traces;
  std::vector<std::vector<double>> phi_means;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const std::string name = "chain_" + std::to_string(c + 1) + ".csv";
    save_trace_csv(opt.out_dir / name, chains[c].trace);
    trace_files.push_back(name);
    traces.push_back(chains[c].trace);
    phi_means.push_back(chains[c].phi_mean);
  }
  write_file(opt.out_dir / kRunSpecFile, spec.to_text());

  if (spec.sampler.random_effects) {
    std::ostringstream phi;
    phi << "group,intersection_id,phi_mean\n";
    for (std::size_t g = 0; g < dm.group_count(); ++g) {
      double sum = 0;
      for (const auto& c : chains) sum += c.phi_posterior_mean[g];
      phi << g << ',' << ds.intersection_ids()[g] << ','
          << format_double(sum / static_cast<double>(chains.size())) << '\n';
    }
    write_file(opt.out_dir / kPhiMeansFile, phi.str());
  }

  const auto acceptance = acceptance_of(chains);
  const auto diag = diagnose(traces, acceptance, phi_means);
  write_file(opt.out_dir / "diagnostics.json", diag.to_json() + "\n");
  write_file(opt.out_dir / "diagnostics.txt", diag.to_text());

  const auto summaries = summarize(traces);
  write_file(opt.out_dir / "summary.txt", render_report(summaries, ReportFormat::kText));
  write_file(opt.out_dir / "summary.csv", render_report(summaries, ReportFormat::kCsv));
  write_file(opt.out_dir / "summary.json", render_report(summaries, ReportFormat::kJson));

  json manifest;
  manifest["software"] = {{"name", "crashre"}, {"version", CRASHRE_VERSION}};
  manifest["config"] = json::parse(spec.to_json());
  manifest["seeds"] = {{"master", spec.sampler.seed},
                       {"chains", spec.sampler.resolved_seeds()}};
  json inputs = {{"data", file_entry(opt.data)}};
  if (opt.spec) inputs["spec"] = file_entry(*opt.spec);
  if (opt.schema) inputs["schema"] = file_entry(*opt.schema);
  manifest["inputs"] = inputs;
  manifest["design"] = {{"rows", dm.rows()},
                        {"groups", dm.group_count()},
                        {"excluded_records", dm.excluded_records},
                        {"columns", std::vector<std::string>(dm.columns().begin(),
                                                             dm.columns().end())}};
  manifest["traces"] = trace_files;
  json acc = json::object();
  for (const auto& a : acceptance) acc[a.name] = a.per_chain;
  manifest["acceptance"] = acc;
  manifest["rhat_high"] = diag.any_rhat_high();
  manifest["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_file(opt.out_dir / kManifestFile, manifest.dump(2) + "\n");

  out << render_report(summaries, ReportFormat::kText);
  if (diag.any_rhat_high()) {
    err << "warning: R-hat above " << kRhatThreshold
        << " for some parameters; see diagnostics.txt\n";
    return kExitWarnings;
  }
  return kExitOk;
}

int cmd_diagnose(const DiagnoseOptions& opt, std::ostream& out, std::ostream&) {
  RhatVariant variant = RhatVariant::kClassic;
  if (opt.rhat_variant == "split") {
    variant = RhatVariant::kSplit;
  } else if (opt.rhat_variant != "classic") {
    throw UsageError("R-hat variant must be `classic` or `split`");
  }
  if (opt.format != "text" && opt.format != "json") {
    throw UsageError("diagnose format must be `text` or `json`");
  }
  const auto run = load_run(opt.run_dir);
  const auto acceptance = acceptance_from_manifest(run.manifest);
  const auto diag = diagnose(run.traces, acceptance, {}, variant);
  out << (opt.format == "json" ? diag.to_json() + "\n" : diag.to_text());
  return diag.any_rhat_high() ? kExitWarnings : kExitOk;
}

int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream&) {
  const auto format = parse_report_format(opt.format);
  const auto run = load_run(opt.run_dir);
  const std::string text = render_report(summarize(run.traces), format);
  if (opt.out) {
    write_file(*opt.out, text);
  } else {
    out << text;
  }
  return kExitOk;
}

int cmd_predict(const PredictOptionsCli& opt, std::ostream& out, std::ostream& err) {
  const auto run = load_run(opt.run_dir);
  const auto& inputs = run.manifest.at("inputs");
  const fs::path fitted_data = inputs.at("data").at("path").get<std::string>();
  std::optional<fs::path> schema;
  if (inputs.contains("schema")) schema = inputs.at("schema").at("path").get<std::string>();

  fs::path data_path = fitted_data;
  if (opt.data) {
    if (run.spec.model.center_covariates) {
      throw UsageError("a fit with centered covariates predicts only on its own data");
    }
    data_path = *opt.data;
  } else if (sha256_file(fitted_data) != inputs.at("data").at("sha256").get<std::string>()) {
    throw IoError("`" + fitted_data.string() + "` changed since the fit");
  }

  const Dataset ds = load_for_model(data_path, schema, run.spec.traffic_side, err);
  const DesignMatrix dm = build_design(ds, run.spec.model);
  PosteriorDraws draws =
      extract_draws(run.traces, dm, run.spec.max_draws, run.spec.sampler.fixed_r);

  if (draws.has_random_effects() && draws.phi.empty()) {
    // Map fitted intersections onto this design's groups by id.
    std::map<std::string, double> fitted_phi;
    const fs::path phi_path = opt.run_dir / kPhiMeansFile;
    if (fs::exists(phi_path)) {
      std::istringstream in(read_text_file(phi_path));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        const auto a = line.find(',');
        const auto b = line.rfind(',');
        if (a == std::string::npos || a == b) throw IoError("malformed " + phi_path.string());
        fitted_phi[line.substr(a + 1, b - a - 1)] = std::stod(line.substr(b + 1));
      }
    }
    draws.phi_point.assign(dm.group_count(), std::nan(""));
    for (std::size_t g = 0; g < dm.group_count(); ++g) {
      const auto it = fitted_phi.find(ds.intersection_ids()[g]);
      if (it != fitted_phi.end()) draws.phi_point[g] = it->second;
    }
  }

  PredictOptions popt;
  popt.threshold = opt.threshold.value_or(run.spec.threshold);
  popt.seed = opt.seed.value_or(run.spec.sampler.seed);
  if (popt.threshold < 0) throw UsageError("threshold must be nonnegative");
  const auto predictions = posterior_predict(draws, dm, popt);
  const auto ranking = rank_hotspots(predictions, popt.threshold);

  const fs::path target = opt.out.value_or(opt.run_dir / "predictions.csv");
  write_file(target, predictions_csv(ranking, predictions, dm, ds));
  std::size_t fresh = 0;
  for (const auto& p : predictions) fresh += p.out_of_sample ? 1 : 0;
  out << "ranked " << predictions.size() << " approaches by P(y > " << popt.threshold << ")";
  if (fresh > 0) out << "; " << fresh << " out of sample";
  out << "\nwrote " << target.string() << '\n';
  return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian random-effect negative binomial crash-type models", "crashre"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CRASHRE_VERSION);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic approach dataset");
  simulate->add_option("--out", sim.out_dir, "output directory")->required();
  simulate->add_option("--seed", sim.seed, "master seed");
  simulate->add_option("--intersections", sim.intersections, "number of intersections");
  simulate->add_option("--approaches", sim.approaches, "approaches per intersection (1-4)");
  simulate->add_option("--crash-type", sim.crash_type, "only this crash type (default: all)");
  simulate->add_option("--traffic-side", sim.traffic_side, "right or left");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "sample the posterior of one crash-type model");
  fit_cmd->add_option("--data", fit.data, "approach CSV")->required();
  fit_cmd->add_option("--spec", fit.spec, "run spec (key = value)");
  fit_cmd->add_option("--schema", fit.schema, "schema map (field = column)");
  fit_cmd->add_option("--out", fit.out_dir, "output directory")->required();
  fit_cmd->add_option("--crash-type", fit.crash_type, "crash type when no --spec is given");
  fit_cmd->add_option("--seed", fit.seed, "master seed");
  fit_cmd->add_option("--chains", fit.chains, "number of chains");
  fit_cmd->add_option("--iters", fit.iterations, "iterations per chain, burn-in included");
  fit_cmd->add_option("--burnin", fit.burnin, "burn-in iterations");
  fit_cmd->add_option("--threshold", fit.threshold, "hotspot exceedance threshold");

  DiagnoseOptions dgn;
  auto* diag_cmd = app.add_subcommand("diagnose", "convergence diagnostics of a fit");
  diag_cmd->add_option("--run", dgn.run_dir, "fit output directory")->required();
  diag_cmd->add_option("--format", dgn.format, "text or json");
  diag_cmd->add_option("--rhat", dgn.rhat_variant, "classic or split");

  ReportOptions rep;
  auto* report = app.add_subcommand("report", "posterior summary table of a fit");
  report->add_option("--run", rep.run_dir, "fit output directory")->required();
  report->add_option("--format", rep.format, "text, csv or json");
  report->add_option("--out", rep.out, "write to file instead of stdout");

  PredictOptionsCli pred;
  auto* predict = app.add_subcommand("predict", "posterior predictive counts and hotspot ranks");
  predict->add_option("--run", pred.run_dir, "fit output directory")->required();
  predict->add_option("--data", pred.data, "approach CSV (default: the fitted data)");
  predict->add_option("--threshold", pred.threshold, "exceedance threshold");
  predict->add_option("--seed", pred.seed, "prediction seed");
  predict->add_option("--out", pred.out, "predictions CSV");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out, err);
    if (fit_cmd->parsed()) return cmd_fit(fit, out, err);
    if (diag_cmd->parsed()) return cmd_diagnose(dgn, out, err);
    if (report->parsed()) return cmd_report(rep, out, err);
    if (predict->parsed()) return cmd_predict(pred, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.category()) {
      case ErrorCategory::kUsage:
        return kExitUsage;
      case ErrorCategory::kValidation:
        return kExitInvalid;
      case ErrorCategory::kRuntime:
        return kExitRuntime;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace crashre::cli
