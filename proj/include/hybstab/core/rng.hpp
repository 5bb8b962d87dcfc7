#pragma once

#include <cstdint>
#include <random>

namespace hybstab {

/// SplitMix64 finalizer; used to derive well-separated child seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the stream for path `index` under `master`. Pure function of both.
std::uint64_t child_seed(std::uint64_t master, std::uint64_t index);

/// Per-path random stream. Not shared across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return uniform_(engine_); }
    double normal() { return normal_(engine_); }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hybstab
