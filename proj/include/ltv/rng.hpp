#pragma once

#include <cstdint>

namespace ltv {

// xoshiro256** seeded through splitmix64. The standard library engines and
// distributions are implementation-defined, so every stochastic component in
// the project draws from this generator to keep runs bit-reproducible across
// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed);

    std::uint64_t next_u64();

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0, 1], safe as a log argument
    double uniform_pos() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n);

    double normal();  // standard normal, Box-Muller
    double exponential(double rate);
    double gamma(double shape, double rate);  // Marsaglia-Tsang
    double beta(double a, double b);
    double lognormal(double mu, double sigma) ;
    long poisson(double mean);  // Knuth multiplication

    // Erlang(k, rate): sum of k exponentials
    double erlang(unsigned k, double rate);

private:
    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Stable per-index substream seed so parallel and serial runs agree.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace ltv
