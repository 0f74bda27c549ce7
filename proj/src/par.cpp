#include "utvi/par.hpp"

#include <cstdlib>

namespace utvi {

std::size_t thread_count() {
    static const std::size_t n = [] {
        const char* s = std::getenv("UTVI_THREADS");
        if (s == nullptr || *s == '\0') return std::size_t{1};
        char* end = nullptr;
        const long v = std::strtol(s, &end, 10);
        if (end == s || *end != '\0' || v < 1) return std::size_t{1};
        return v > 64 ? std::size_t{64} : static_cast<std::size_t>(v);
    }();
    return n;
}

}  // namespace utvi
