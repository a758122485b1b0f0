#pragma once

#include <cstdint>

namespace cwm {

// Working precision of the numerical core. Oracle tests link the 64-bit
// build; the shared library and CLI use 32-bit for throughput.
#ifdef CWM_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using index_t = std::int64_t;

}  // namespace cwm
