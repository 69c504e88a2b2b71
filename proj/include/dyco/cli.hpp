#pragma once

#include "dyco/trainer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace dyco {

/// Training configuration plus dataset and output paths.
struct Config {
  TrainConfig train;
  std::string data;
  std::string out;
  bool operator==(const Config&) const = default;
};

std::string config_to_text(const Config& c);
/// Unknown keys throw ParseError.
Config config_from_text(const std::string& text);

enum class LogLevel { Quiet, Info, Debug };
/// From DYCO_LOG (quiet, info, debug); info when unset.
LogLevel log_level_from_env();

/// Runs one subcommand. Returns 0 on success, 1 on failure (message on `err`),
/// 2 for usage errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace dyco
