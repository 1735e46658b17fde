#pragma once

#include <string>

#include "paforge/design_space.hpp"

namespace fixture {

// 3 x 5 x 3 x 13 x 3 x 1 = 1755 grid points across 6 parameters. The
// level counts are an arbitrary factorization; the synthetic oracle's
// behavior over these ranges is dominated by Temp and Vcc.
inline const char* kPaSpace =
    "# RF power amplifier operating-condition grid\n"
    "param Vcc continuous grid 3.0 3.3 3.6\n"
    "unit Vcc V\n"
    "param Temp continuous grid -40 -5 25 55 85\n"
    "unit Temp degC\n"
    "param VSWR continuous grid 1.0 1.25 1.5\n"
    "param Freq continuous grid 5.0e9 5.1e9 5.2e9 5.3e9 5.4e9 5.5e9 5.6e9 5.7e9 5.8e9 5.9e9 "
    "6.0e9 6.1e9 6.2e9\n"
    "unit Freq Hz\n"
    "param Phase discrete grid 0 45 90\n"
    "unit Phase deg\n"
    "param Mode categorical values nominal\n";

inline paforge::DesignSpace pa_space() { return paforge::parse_space(kPaSpace); }

// Two grid parameters, four levels each: 16 points. Small enough for
// exhaustive oracles.
inline const char* kTinySpace =
    "param A continuous grid 0 1 2 3\n"
    "param B continuous grid 0 1 2 3\n";

inline paforge::DesignSpace tiny_space() { return paforge::parse_space(kTinySpace); }

}  // namespace fixture
