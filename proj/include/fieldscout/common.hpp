#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fieldscout {

// Error taxonomy, mapped to CLI exit codes (usage=2, data=3, numerical=4).
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct io_error : std::runtime_error {
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct usage_error : std::runtime_error {
    explicit usage_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double dist(const Vec2& a, const Vec2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

inline double clamp01(double v) {
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

/// Square scalar grid in [0,1]; the shared currency between the GP render,
/// the partition builders and the fidelity metrics. Row-major, y-down.
struct Field {
    int resolution = 0;
    std::vector<double> values;

    Field() = default;
    Field(int res, double fill = 0.0) : resolution(res), values(size_t(res) * res, fill) {}

    double& at(int x, int y) { return values[size_t(y) * resolution + x]; }
    double at(int x, int y) const { return values[size_t(y) * resolution + x]; }

    // Nearest pixel for a unit-square coordinate.
    int pixel_index(double x, double y) const {
        int px = int(x * resolution);
        int py = int(y * resolution);
        if (px < 0) px = 0;
        if (py < 0) py = 0;
        if (px >= resolution) px = resolution - 1;
        if (py >= resolution) py = resolution - 1;
        return py * resolution + px;
    }
    double sample(double x, double y) const { return values[pixel_index(x, y)]; }
};

/// Binary grid marking map cells already sensed by a camera footprint.
/// Bits only ever get set; coverage is monotone over a mission.
struct CoverageMask {
    int resolution = 0;
    std::vector<uint8_t> covered;

    CoverageMask() = default;
    explicit CoverageMask(int res) : resolution(res), covered(size_t(res) * res, 0) {}

    uint8_t at(int x, int y) const { return covered[size_t(y) * resolution + x]; }
    uint8_t& at(int x, int y) { return covered[size_t(y) * resolution + x]; }

    uint8_t sample(double x, double y) const {
        int px = int(x * resolution);
        int py = int(y * resolution);
        px = px < 0 ? 0 : (px >= resolution ? resolution - 1 : px);
        py = py < 0 ? 0 : (py >= resolution ? resolution - 1 : py);
        return at(px, py);
    }
    long count() const {
        long n = 0;
        for (uint8_t b : covered) n += b != 0;
        return n;
    }
};

/// Deterministic RNG (xoshiro256**, seeded via splitmix64). The standard
/// <random> distributions are not bit-stable across library versions, so the
/// few transforms we need are written out here.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) {
        uint64_t z = seed;
        for (auto& word : s_) {
            z += 0x9e3779b97f4a7c15ULL;
            uint64_t x = z;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            word = x ^ (x >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0,n).
    uint64_t uniform_int(uint64_t n) {
        return uint64_t((__uint128_t(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller (spare cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// FNV-1a, used for manifest content hashes.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Locale-independent float formatting so CSV bytes are reproducible.
inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace fieldscout
