#pragma once

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cashbo::parallel {

// Process-wide thread cap for the OpenMP kernels. 0 means "use the OpenMP
// default". Set to 1 to force every kernel down its serial path.
int max_threads();
void set_max_threads(int n);

inline int effective_threads() {
#ifdef _OPENMP
  const int cap = max_threads();
  const int hw = omp_get_max_threads();
  return cap > 0 ? (cap < hw ? cap : hw) : hw;
#else
  return 1;
#endif
}

inline bool enabled() { return effective_threads() > 1; }

}  // namespace cashbo::parallel
