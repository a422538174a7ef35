#ifndef BNC_THREAD_POOL_HPP
#define BNC_THREAD_POOL_HPP

/*
 * Index-based fan-out for parameter sweeps.  Workers pull indices from an
 * atomic counter and write into caller-owned slots, so results are
 * deterministic regardless of scheduling.  BURGERS_NULLCTL_THREADS caps the
 * pool; unset it falls back to the hardware count (at most 8).
 */

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bnc {
namespace pool {

inline std::size_t worker_count()
{
    if (const char* env = std::getenv("BURGERS_NULLCTL_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1)
            return static_cast<std::size_t>(v > 256 ? 256 : v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : (hc > 8 ? 8 : hc);
}

/* Run fn(i) for i in [0, n).  The first exception wins and is rethrown on
 * the calling thread after everyone stops. */
template <class Fn>
inline void parallel_for(std::size_t n, Fn&& fn, std::size_t workers = 0)
{
    if (workers == 0)
        workers = worker_count();
    if (n > 0 && workers > n)
        workers = n;
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mx;
    std::exception_ptr err;

    auto body = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            {
                std::lock_guard<std::mutex> lk(err_mx);
                if (err)
                    return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mx);
                if (!err)
                    err = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    for (std::size_t w = 0; w + 1 < workers; ++w)
        threads.emplace_back(body);
    body();
    for (auto& t : threads)
        t.join();
    if (err)
        std::rethrow_exception(err);
}

}   // namespace pool
}   // namespace bnc

#endif
