#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace hamlearn {

/// Static-stride parallel loop: worker w handles indices w, w+jobs, ...
/// Results must be written to per-index slots by the body; callers reduce in
/// index order afterwards, so the outcome is independent of `jobs`.
inline void parallel_for(int n, int jobs, const std::function<void(int worker, int index)>& body) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) body(0, i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
        threads.emplace_back([&, w] {
            for (int i = w; i < n; i += jobs) body(w, i);
        });
    for (auto& t : threads) t.join();
}

} // namespace hamlearn
