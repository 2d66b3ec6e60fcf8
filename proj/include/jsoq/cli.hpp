#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jsoq::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,         // any other library error
    kBadFlags = 2,        // unparsable flags, config or parameter values
    kUnstable = 3,        // rho >= 1 where a stationary law is needed
    kNoConvergence = 4,   // series tail bound or oracle residual not reached
    kComparisonFailed = 5 // engines disagree, or a verified property fails
};

/// Runs one command. args excludes the program name. Reports go to out (or
/// to --output), diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// printf "%.10g"; non-finite values print as nan / inf / -inf.
std::string format_number(double x);

/// x rounded to 10 significant digits, so JSON and CSV carry the same value.
double round10(double x);

}  // namespace jsoq::cli
