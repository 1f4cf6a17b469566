#include "common/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace ipseg {
namespace {

std::size_t from_env()
{
    std::size_t n = 0;
    if (const char* v = std::getenv("IPSEG_THREADS")) {
        try {
            n = static_cast<std::size_t>(std::stoul(v));
        } catch (...) {
            n = 0;
        }
    }
    if (n == 0)
        n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

std::atomic<std::size_t>& slot()
{
    static std::atomic<std::size_t> value{from_env()};
    return value;
}

}  // namespace

std::size_t thread_count() { return slot().load(std::memory_order_relaxed); }

void set_thread_count(std::size_t n)
{
    if (n == 0)
        n = std::max(1u, std::thread::hardware_concurrency());
    slot().store(n, std::memory_order_relaxed);
}

}  // namespace ipseg
