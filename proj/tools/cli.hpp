#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace energetext::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMissingInput = 3,
  kNumeric = 4,
};

/// A fully resolved invocation: every parameter of the command has a value,
/// taken from the flag, else the --config file, else the default.
struct RunConfig {
  std::string command;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> config_file;
  std::uint64_t seed = 42;
  std::map<std::string, std::string> params;

  const std::string& text(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
};

struct ParseResult {
  int exit_code = kOk;
  std::optional<RunConfig> config;  // set only when a command should run
  std::string message;              // usage, help or error text
};

/// argv without the program name.
ParseResult parse_invocation(const std::vector<std::string>& args);

/// Runs the command, writing artifacts, config.txt and manifest.json under
/// out_dir. Diagnostics go to `log`.
int execute(const RunConfig& config, std::ostream& log);

/// parse_invocation + execute.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Names of all commands in usage order.
std::vector<std::string> command_names();

}  // namespace energetext::cli
