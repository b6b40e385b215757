#include "ddcbf/util/alloc.hpp"

#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ddcbf::util {

void keep_heap_resident() {
#if defined(__GLIBC__)
  // Setting either threshold also freezes glibc's adaptive mmap threshold,
  // so both are set.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);  // glibc rejects anything larger
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace ddcbf::util
