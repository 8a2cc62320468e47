#include "posecgame/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace posecgame {

unsigned worker_count() {
    unsigned n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("POSECGAME_THREADS")) {
        char* end = nullptr;
        unsigned long cap = std::strtoul(env, &end, 10);
        if (end != env && cap >= 1 && cap < n) n = static_cast<unsigned>(cap);
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  std::size_t serial_threshold) {
    unsigned workers = worker_count();
    if (workers <= 1 || n < serial_threshold) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::atomic<std::size_t> next{0};
    const std::size_t grain = std::max<std::size_t>(1, n / (workers * 8));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t begin = next.fetch_add(grain);
                if (begin >= n) return;
                std::size_t end = std::min(n, begin + grain);
                try {
                    for (std::size_t i = begin; i < end; ++i) body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace posecgame
