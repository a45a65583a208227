#ifndef IPKP_RNG_HPP
#define IPKP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace ipkp {

// Seedable splitmix64 stream (Steele/Lea/Flood 2014). Pure 64-bit integer
// arithmetic, so the raw stream is identical on every platform for a given
// seed; the float transforms below are plain IEEE expressions on top of it.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 mantissa bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1], safe as a log() argument.
    double next_unit_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    float uniform(float lo, float hi) {
        return lo + (hi - lo) * static_cast<float>(next_unit());
    }

    // Standard normal via Box-Muller; the second sample of each pair is cached.
    float normal() {
        if (has_spare_) {
            has_spare_ = false;
            return static_cast<float>(spare_);
        }
        double u1 = next_unit_open();
        double u2 = next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return static_cast<float>(r * std::cos(theta));
    }

    // Uniform in [0, n). Plain modulo; the bias is < 2^-40 for any n < 2^24,
    // far below anything these experiments can resolve.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Fisher-Yates, iterating from the back.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Derives a child seed from a parent seed and a list of stream labels.
// hash_combine-style mixing followed by one splitmix64 scramble, so nearby
// labels give unrelated streams.
inline uint64_t seed_mix(uint64_t base, std::initializer_list<uint64_t> labels) {
    uint64_t h = base;
    for (uint64_t x : labels) {
        h ^= x + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    }
    Rng r(h);
    return r.next_u64();
}

}  // namespace ipkp

#endif
