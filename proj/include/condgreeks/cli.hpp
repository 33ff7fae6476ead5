#pragma once

namespace cg {

/// Entry point behind the condgreeks binary.  Exit codes: 0 success,
/// 2 configuration error, 3 ill-conditioned denominator guard, 4 property
/// failure, 1 anything else.
int cli_main(int argc, const char* const* argv);

} // namespace cg
