#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomlab {

// Error taxonomy. Each failure mode in the library throws one of these so
// callers (and the CLI exit-code mapping) can tell them apart.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct LengthError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct TemplateError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct SizeError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };
struct SolverError : Error { using Error::Error; };
struct DegeneracyError : Error { using Error::Error; };
struct PatchError : Error { using Error::Error; };
struct SteeringError : Error { using Error::Error; };
struct UndefinedError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct DependencyError : Error { using Error::Error; };

// Deterministic RNG. Wraps mt19937_64 but derives all draws from raw engine
// output so results do not depend on the standard library's distribution
// implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) throw RangeError("uniform_int: hi < lo");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(eng_() % span);
    }

    double uniform_range(double a, double b) { return a + (b - a) * uniform(); }

    // Standard normal via Box-Muller; caches the second deviate.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.empty()) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i)));
            std::swap(v[i], v[j]);
        }
    }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        if (v.empty()) throw RangeError("pick: empty vector");
        return v[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
    }

private:
    std::mt19937_64 eng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

// Runs fn(i) for i in [0, n) across `workers` threads in contiguous chunks.
// Callers own any synchronization of shared state; writes to per-index slots
// are race-free by construction.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

std::string shape_str(const std::vector<std::int64_t>& shape);

// Lowercase + trim helpers used across text handling.
std::string lower(std::string s);
std::string trim(const std::string& s);

}  // namespace tomlab
