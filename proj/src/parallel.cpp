#include "vvord/parallel.hpp"

#include <cstdlib>
#include <string>

namespace vvord {

namespace {

std::atomic<int> g_threads{-1};

int threads_from_env() {
    if (const char* env = std::getenv("VVORD_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return 0;
}

}  // namespace

void set_thread_count(int threads) { g_threads = std::max(threads, 0); }

int thread_count() {
    int n = g_threads.load();
    if (n < 0) n = threads_from_env();
    if (n == 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return n;
}

double pairwise_sum(std::span<const double> values) {
    if (values.empty()) return 0.0;
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Vector pairwise_sum(std::span<const Vector> values) {
    if (values.empty()) return {};
    if (values.size() == 1) return values.front();
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

const char* version() { return VVORD_VERSION_STRING; }

}  // namespace vvord
