#pragma once

namespace cprnn {

/// Execution path for kernels that have an OpenMP implementation. The
/// serial path is the reference the parallel one is tested against; both
/// produce bit-identical results.
enum class Exec { serial, parallel };

}  // namespace cprnn
