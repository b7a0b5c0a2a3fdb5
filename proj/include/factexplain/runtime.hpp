#pragma once

namespace fx {

/// Keeps freed heap memory mapped between training steps. Tapes allocate and release
/// megabytes per step; without this, glibc returns the memory to the kernel each time
/// and the page faults dominate run time. No-op on other C libraries.
void configure_allocator();

}  // namespace fx
