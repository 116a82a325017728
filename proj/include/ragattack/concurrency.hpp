#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <semaphore>
#include <thread>
#include <vector>

namespace ragattack {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Every index runs
/// even if some throw; the exception from the lowest failing index is
/// rethrown after all workers join, so failures are reported deterministically.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (n == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    if (workers == 1) {
        std::exception_ptr first;
        for (std::size_t i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t first_index = n;
    std::exception_ptr first;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (i < first_index) {
                            first_index = i;
                            first = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (first) std::rethrow_exception(first);
}

/// Caps the number of concurrent holders; RAII permits via acquire().
class InFlightLimit {
public:
    explicit InFlightLimit(std::ptrdiff_t limit) : sem_(std::max<std::ptrdiff_t>(limit, 1)) {}

    class Permit {
    public:
        explicit Permit(std::counting_semaphore<>& s) : sem_(&s) { sem_->acquire(); }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        ~Permit() { sem_->release(); }

    private:
        std::counting_semaphore<>* sem_;
    };

    Permit acquire() { return Permit(sem_); }

private:
    std::counting_semaphore<> sem_;
};

}  // namespace ragattack
