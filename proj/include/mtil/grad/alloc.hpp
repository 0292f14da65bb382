#pragma once

#if defined(__GLIBC__) || defined(__linux__)
#include <malloc.h>
#endif

namespace mtil::grad {

// Training allocates and frees multi-megabyte activation buffers every
// step. With glibc defaults those go through mmap/munmap and every step
// pays the page-fault cost again; raising the thresholds keeps the arenas
// alive so buffers get reused. Call once at process start.
inline void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace mtil::grad
