#pragma once

namespace adafuse {

// Storage scalar. Parameters, activations and embeddings are stored at this
// precision; reductions always accumulate in double regardless of it.
// ADAFUSE_REAL64 switches storage to double and exists solely so that
// finite-difference gradient checks can run at full precision.
#ifdef ADAFUSE_REAL64
using real = double;
#else
using real = float;
#endif

// Norms below this are treated as directionless; normalization and cosine
// refuse to divide by them.
inline constexpr double kDegenerateNorm = 1e-12;

} // namespace adafuse
