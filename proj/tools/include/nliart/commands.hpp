#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nliart::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Parses `args` (args[0] is the program name) and runs one subcommand:
// profile, evaluate, train, predict or synth. Every command writes its
// outputs plus a manifest.json into --out. Never throws; errors are
// reported on `err` and mapped to the exit codes above.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Lowercase hex SHA-256 of a file's bytes. Throws IoError.
std::string Sha256File(const std::string& path);

}  // namespace nliart::cli
