#pragma once

namespace ddcbf::util {

/// Stops glibc from returning freed heap pages to the kernel. Training
/// allocates and frees the same minibatch-sized buffers every slot, and
/// without this most of the wall time goes to page faults. No-op elsewhere.
void keep_heap_resident();

}  // namespace ddcbf::util
