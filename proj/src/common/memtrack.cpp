#include "common/memtrack.hpp"

#include <atomic>

namespace ipseg::mem {
namespace {

std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};
std::atomic<std::size_t> g_largest{0};

void raise_to(std::atomic<std::size_t>& slot, std::size_t value) noexcept
{
    std::size_t seen = slot.load(std::memory_order_relaxed);
    while (value > seen && !slot.compare_exchange_weak(seen, value, std::memory_order_relaxed)) {
    }
}

}  // namespace

void on_alloc(std::size_t bytes) noexcept
{
    const std::size_t now = g_current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    raise_to(g_peak, now);
    raise_to(g_largest, bytes);
}

void on_free(std::size_t bytes) noexcept { g_current.fetch_sub(bytes, std::memory_order_relaxed); }

std::size_t current_bytes() noexcept { return g_current.load(std::memory_order_relaxed); }
std::size_t peak_bytes() noexcept { return g_peak.load(std::memory_order_relaxed); }
std::size_t largest_allocation() noexcept { return g_largest.load(std::memory_order_relaxed); }

void reset_peak() noexcept
{
    g_peak.store(g_current.load(std::memory_order_relaxed), std::memory_order_relaxed);
    g_largest.store(0, std::memory_order_relaxed);
}

}  // namespace ipseg::mem
