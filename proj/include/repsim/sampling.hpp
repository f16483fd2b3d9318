#ifndef REPSIM_SAMPLING_HPP
#define REPSIM_SAMPLING_HPP

// Stimulus and channel subsampling that makes CCA inputs comparable across
// layers of different shapes: pick enough stimuli that n·h·w lands near a
// row budget, and cap the channel count.
//
// Every draw is a pure function of (seed, repeat_id, stream). Streams are
// derived by SplitMix64 mixing and fed to std::mt19937_64, whose output
// sequence is fixed by the standard; bounded integers come from rejection
// sampling rather than std::uniform_int_distribution, whose algorithm is
// implementation-defined.

#include "repsim/activation_store.hpp"
#include "repsim/error.hpp"
#include "repsim/linalg.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace repsim {

struct SamplePlan {
    std::size_t target_rows = 20000;
    std::size_t channel_cap = 64;
    std::size_t repeats = 5;
    std::uint64_t seed = 0;

    void validate() const {
        if (channel_cap < 1) throw DataError("plan", "channel cap must be >= 1");
        if (repeats < 1) throw DataError("plan", "repeats must be >= 1");
        if (target_rows < channel_cap * 10) {
            throw DataError("plan", "target rows (" + std::to_string(target_rows) +
                                        ") must be at least 10x the channel cap (" +
                                        std::to_string(channel_cap) + ")");
        }
    }
};

struct SampledMatrix {
    Matrix matrix;
    std::vector<std::size_t> stimulus_indices; // sorted, unique
    std::vector<std::size_t> channel_indices;  // sorted, unique
    std::size_t repeat_id = 0;
};

/// round_half_even(target_rows / (h·w)) clamped to [1, available_n].
inline std::size_t plan_stimuli(std::size_t available_n, std::size_t h, std::size_t w,
                                const SamplePlan& plan) {
    const std::size_t spatial = h * w;
    std::size_t q = plan.target_rows / spatial;
    const std::size_t r = plan.target_rows % spatial;
    if (2 * r > spatial || (2 * r == spatial && q % 2 == 1)) ++q;
    return std::clamp<std::size_t>(q, 1, std::max<std::size_t>(available_n, 1));
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for one named stream of one repeat.
inline constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t repeat_id,
                                           std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(seed) ^ repeat_id) ^ (stream * 0xd1b54a32d192ed03ULL));
}

inline constexpr std::uint64_t kStimulusStream = 0;
inline constexpr std::uint64_t kChannelStreamBase = 1;

/// Uniform integer in [0, bound) by rejection.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = gen();
    } while (x >= limit);
    return x % bound;
}

/// `count` distinct indices from [0, population), sorted ascending.
inline std::vector<std::size_t> draw_without_replacement(std::size_t population, std::size_t count,
                                                         std::uint64_t seed) {
    std::vector<std::size_t> pool(population);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    if (count >= population) return pool;
    std::mt19937_64 gen(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const auto j = i + static_cast<std::size_t>(bounded(gen, population - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

/// Channel-stream ranks for the two sides of a comparison. Ranking by a
/// side's identity rather than its argument position makes swapping the
/// sides draw the same channels for each model; equal identities share a
/// stream.
struct SideStreams {
    std::uint64_t a = 0;
    std::uint64_t b = 1;

    static SideStreams from_identities(const std::string& id_a, const std::string& id_b) {
        if (id_a == id_b) return {0, 0};
        return id_a < id_b ? SideStreams{0, 1} : SideStreams{1, 0};
    }
};

/// Restrict a tensor to the given stimuli and channels and flatten it.
inline Matrix gather(const ActivationTensor& t, const std::vector<std::size_t>& stimuli,
                     const std::vector<std::size_t>& channels) {
    const TensorShape& s = t.shape();
    const std::size_t spatial = s.spatial();
    Matrix out(stimuli.size() * spatial, channels.size());
    std::visit(
        [&](const auto& v) {
            std::size_t row = 0;
            for (std::size_t stim : stimuli) {
                for (std::size_t p = 0; p < spatial; ++p, ++row) {
                    const std::size_t base = (stim * spatial + p) * s.c;
                    auto dst = out.row(row);
                    for (std::size_t j = 0; j < channels.size(); ++j)
                        dst[j] = static_cast<double>(v[base + channels[j]]);
                }
            }
        },
        t.storage());
    return out;
}

/// Draw one repeat's sample from a pair of same-level layers. Stimuli are
/// shared by both sides; channels are drawn independently per side.
inline std::pair<SampledMatrix, SampledMatrix> sample_pair(const ActivationTensor& a,
                                                           const ActivationTensor& b,
                                                           const SamplePlan& plan,
                                                           std::size_t repeat_id,
                                                           SideStreams sides = {}) {
    const TensorShape& sa = a.shape();
    const TensorShape& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw DataError("shape", "layer pair '" + a.layer_name() + "' vs '" + b.layer_name() +
                                     "' differs in stimuli or spatial shape: " + sa.str() +
                                     " vs " + sb.str());
    }

    const std::size_t n_star = plan_stimuli(sa.n, sa.h, sa.w, plan);
    auto stimuli = draw_without_replacement(sa.n, n_star,
                                            stream_seed(plan.seed, repeat_id, kStimulusStream));
    auto ch_a = draw_without_replacement(
        sa.c, std::min(sa.c, plan.channel_cap),
        stream_seed(plan.seed, repeat_id, kChannelStreamBase + sides.a));
    auto ch_b = draw_without_replacement(
        sb.c, std::min(sb.c, plan.channel_cap),
        stream_seed(plan.seed, repeat_id, kChannelStreamBase + sides.b));

    SampledMatrix xa{gather(a, stimuli, ch_a), stimuli, std::move(ch_a), repeat_id};
    SampledMatrix xb{gather(b, stimuli, ch_b), std::move(stimuli), std::move(ch_b), repeat_id};
    return {std::move(xa), std::move(xb)};
}

} // namespace repsim

#endif // REPSIM_SAMPLING_HPP
