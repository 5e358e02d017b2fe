#ifndef ACTRACK_PARALLEL_HPP
#define ACTRACK_PARALLEL_HPP

#include <atomic>
#include <thread>
#include <vector>

namespace actrack {

/// Run fn(i) for i in [0, count) on `threads` workers. Work items write to
/// disjoint output slots indexed by i, so scheduling order cannot affect
/// results. threads <= 1 runs inline.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min(threads, count);
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace actrack

#endif  // ACTRACK_PARALLEL_HPP
