#include "hiercore/error.hpp"
#include "hiercore/matrix.hpp"
#include "hiercore/parallel.hpp"

#include <atomic>
#include <string>

namespace hiercore {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::data: return "data";
        case ErrorKind::version: return "version";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

void require_finite(const Matrix& m, const char* what) {
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        if (!std::isfinite(m.data[i])) {
            fail(ErrorKind::data, std::string(what) + ": non-finite value at row " +
                                      std::to_string(m.cols ? i / m.cols : 0));
        }
    }
}

namespace {
std::atomic<std::size_t> g_threads{0};
}

void set_thread_count(std::size_t n) noexcept { g_threads.store(n); }

std::size_t thread_count() noexcept {
    const std::size_t n = g_threads.load();
    if (n != 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace hiercore
