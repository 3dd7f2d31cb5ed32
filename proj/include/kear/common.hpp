#pragma once
// Shared infrastructure: errors, deterministic RNG, logging, number formatting.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kear {

// All deliberate failures surface as std::runtime_error / std::invalid_argument
// with a message that names the offending file/line/field.

// Deterministic RNG (splitmix64). std:: distributions are implementation-defined,
// so every sampling primitive the pipeline needs is spelled out here; identical
// seeds give identical streams on any platform.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform in [0, n); n > 0
    size_t index(size_t n) { return static_cast<size_t>(next_u64() % n); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

  private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("KEAR_LOG");
        if (!env) return LogLevel::kInfo;
        std::string v(env);
        if (v == "error" || v == "quiet" || v == "0") return LogLevel::kError;
        if (v == "debug" || v == "2") return LogLevel::kDebug;
        return LogLevel::kInfo;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::kInfo) std::cerr << "[kear] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::kDebug) std::cerr << "[kear:debug] " << msg << "\n";
}

// Shortest round-trip decimal form; parsing it back recovers the exact double.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

}  // namespace kear
