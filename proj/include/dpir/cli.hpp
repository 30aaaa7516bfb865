#pragma once

namespace dpir::cli {

// Experiment runner entry point. Exit codes: 0 success, 1 verification
// failure, 2 usage or configuration error.
int dispatch(int argc, const char* const* argv);

}  // namespace dpir::cli
