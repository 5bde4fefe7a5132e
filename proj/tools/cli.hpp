#ifndef CRASHRE_TOOLS_CLI_HPP_
#define CRASHRE_TOOLS_CLI_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace crashre::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,    // numeric failure, I/O, divergence
  kExitUsage = 2,      // bad flags or unknown subcommand
  kExitInvalid = 3,    // data or spec rejected by validation
  kExitWarnings = 4,   // fit finished but some R-hat exceeds 1.1
};

struct SimulateOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 1;
  std::size_t intersections = 177;
  std::size_t approaches = 4;
  std::optional<std::string> crash_type;  // default: all five
  std::string traffic_side = "right";
};

struct FitOptions {
  std::filesystem::path data;
  std::optional<std::filesystem::path> spec;
  std::optional<std::filesystem::path> schema;
  std::filesystem::path out_dir;
  std::optional<std::string> crash_type;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> burnin;
  std::optional<std::int64_t> threshold;
};

struct DiagnoseOptions {
  std::filesystem::path run_dir;
  std::string format = "text";        // text | json
  std::string rhat_variant = "classic";  // classic | split
};

struct ReportOptions {
  std::filesystem::path run_dir;
  std::string format = "text";  // text | csv | json
  std::optional<std::filesystem::path> out;
};

struct PredictOptionsCli {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> data;  // default: the fitted data
  std::optional<std::int64_t> threshold;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;   // default: <run>/predictions.csv
};

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_fit(const FitOptions& opt, std::ostream& out, std::ostream& err);
int cmd_diagnose(const DiagnoseOptions& opt, std::ostream& out, std::ostream& err);
int cmd_report(const ReportOptions& opt, std::ostream& out, std::ostream& err);
int cmd_predict(const PredictOptionsCli& opt, std::ostream& out, std::ostream& err);

// Parses argv-style arguments (without the program name), runs the
// subcommand and maps errors onto ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace crashre::cli

#endif  // CRASHRE_TOOLS_CLI_HPP_
