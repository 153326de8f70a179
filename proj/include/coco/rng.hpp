#pragma once

#include <cstdint>
#include <vector>

namespace coco {

// Counter-free splittable generator built on the splitmix64 mixer.
// Every environment derives its own stream via child(), so generation
// order (or thread scheduling) cannot change the data.  std::normal_
// distribution is implementation-defined; Box-Muller keeps the streams
// bit-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // Uniform on [0,1) with 53 random bits.
    double next_double();

    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; second deviate of each pair is cached.
    double normal();
    double normal(double mean, double variance);

    // Integer in [0, n), n >= 1; rejection-free modulo is fine at our scales.
    std::uint64_t below(std::uint64_t n);

    // Index sampled from unnormalized nonnegative weights.
    std::size_t categorical(const std::vector<double>& weights);

    // Independent stream for a sub-task; child(i) streams do not overlap
    // with the parent or with child(j), i != j, for any practical draw count.
    Rng child(std::uint64_t index) const;

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace coco
