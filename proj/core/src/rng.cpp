#include "faac/rng.hpp"

#include <cmath>

namespace faac {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a, uint64_t b) {
    uint64_t s = root ^ 0x8f5e1c6b3a9d02f7ull;
    for (unsigned char c : tag) {
        s ^= c;
        splitmix64(s);
    }
    s ^= a * 0xd1342543de82ef95ull;
    splitmix64(s);
    s ^= b * 0x2545f4914f6cdd1dull;
    splitmix64(s);
    return s;
}

uint64_t Rng::uniform_index(uint64_t n) {
    // rejection sampling to avoid modulo bias
    if (n == 0) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

}  // namespace faac
