#pragma once

#include <stdexcept>
#include <string>

namespace nsp {

// Input data failed schema or invariant checks (bad row, bad field, bad bound).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A scorer response whose first line carries none of the three verdict tokens.
struct ResponseParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scorer backend could not produce a response (transport failure after retries,
// missing replay entry, bad endpoint reply).
struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical estimation cannot proceed (rank deficiency, degenerate sample,
// non-convergence).
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage was invoked before the stage that produces its inputs.
struct DependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Worker-count resolution shared by the OpenMP kernels. 0 means "let the
// runtime decide"; anything else caps the team size.
int resolve_jobs(int jobs);

}  // namespace nsp
