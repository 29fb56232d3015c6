#pragma once

#include <cstdint>
#include <random>

namespace floodda {

enum class StreamPurpose : std::uint32_t {
    control_perturbation = 1,
    observation_perturbation = 2,
    synthetic_observation = 3,
};

/// Independent generator for one (member, cycle, purpose) triple. Streams are
/// derived from the master seed only, so results do not depend on the order in
/// which members are processed or on the number of worker threads.
inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t member,
                                   std::uint64_t cycle, StreamPurpose purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(member),
                      static_cast<std::uint32_t>(cycle),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
}

}  // namespace floodda
