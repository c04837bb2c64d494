#pragma once

namespace pcqa {

/// Keeps large tensor buffers on the heap instead of fresh mmap pages, which
/// otherwise dominate small-batch training time with page faults. No-op
/// outside glibc. Call once at the start of main.
void tune_allocator() noexcept;

}  // namespace pcqa
