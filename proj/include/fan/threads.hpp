#pragma once

namespace fan {

// Caps the OpenMP worker count for all parallel kernels. 0 keeps the
// runtime default. All kernels produce bit-identical results for any
// thread count; this only trades wall-clock time.
void set_num_threads(int n);

int max_threads();

}  // namespace fan
