#include "coco/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace coco {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

} // namespace

std::uint64_t Rng::next_u64() {
    state_ += kGamma;
    return mix64(state_);
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1]: log stays finite.
    double u1 = 1.0 - next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double Rng::normal(double mean, double variance) {
    return mean + std::sqrt(variance) * normal();
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    return next_u64() % n;
}

std::size_t Rng::categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("Rng::categorical: negative weight");
        total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("Rng::categorical: zero total weight");
    double u = next_double() * total;
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) return k;
    }
    return weights.size() - 1;
}

Rng Rng::child(std::uint64_t index) const {
    // Double mix decorrelates consecutive indices; the child state lands far
    // from the parent's additive orbit.
    return Rng(mix64(mix64(state_ ^ kGamma) + index));
}

} // namespace coco
