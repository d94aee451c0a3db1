#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "blsacd/estimate.hpp"

namespace blsacd {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumeric = 4 };

/// Runs `blsacd <subcommand> ...`; args exclude the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One fit per family with the given orders. Families with a shape parameter
/// profile it over the default grid.
std::vector<FitResult> fit_all_families(const ModelSpec& orders, const BiSeries& series,
                                        const FitOptions& options = {});

/// "2/3" or "0.6667"; throws DomainError unless in (0, 1).
double parse_fraction(const std::string& text);

}  // namespace blsacd
