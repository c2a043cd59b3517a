#pragma once

namespace styleforge {

// The training library is built in single precision. A second build with
// STYLEFORGE_DOUBLE defined is used by the finite-difference gradient tests.
#ifdef STYLEFORGE_DOUBLE
using real = double;
#else
using real = float;
#endif

}  // namespace styleforge
