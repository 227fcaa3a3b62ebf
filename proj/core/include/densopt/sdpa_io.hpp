#pragma once

#include "densopt/sdp.hpp"

#include <string>

namespace densopt {

/// SDPA sparse text form of the problem. Header: number of constraint rows,
/// number of blocks, block sizes (free variables appear as one trailing
/// negative block of unconstrained diagonal entries), then the rhs vector.
/// Entries follow as `cons block i j value`, 1-indexed, upper triangle only;
/// matrix 0 holds the objective. Values print with 17 significant digits so
/// parse(export(p)) reproduces the problem bit-exactly.
std::string export_sdpa(const SdpProblem& problem);

SdpProblem parse_sdpa(const std::string& text);

/// Names of Gram blocks and free columns, one per line, for cross-checking
/// exported problems against the in-process compilation.
std::string sdpa_sidecar(const SdpProblem& problem);

}  // namespace densopt
