#pragma once

#include <cstddef>
#include <new>
#include <vector>

// Process-wide accounting of engine buffers (tensor data, gradients, optimizer
// state, convolution workspaces). Anything allocated through TrackingAllocator
// shows up here; plain std::vector storage (datasets, volumes) does not.
namespace ipseg::mem {

void on_alloc(std::size_t bytes) noexcept;
void on_free(std::size_t bytes) noexcept;

std::size_t current_bytes() noexcept;
std::size_t peak_bytes() noexcept;
std::size_t largest_allocation() noexcept;

// Restart high-water tracking from the current live byte count.
void reset_peak() noexcept;

template <class T>
struct TrackingAllocator {
    using value_type = T;

    TrackingAllocator() noexcept = default;
    template <class U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n)
    {
        T* p = static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{64}));
        on_alloc(n * sizeof(T));
        return p;
    }

    void deallocate(T* p, std::size_t n) noexcept
    {
        ::operator delete(p, std::align_val_t{64});
        on_free(n * sizeof(T));
    }

    template <class U>
    bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

template <class T>
using TrackedVector = std::vector<T, TrackingAllocator<T>>;

}  // namespace ipseg::mem
