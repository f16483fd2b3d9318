#ifndef REPSIM_SIMILARITY_HPP
#define REPSIM_SIMILARITY_HPP

// Layer-wise CCA similarity between two checkpoints.
//
// For one layer pair, each sampling repeat yields ρ = mean canonical
// correlation over the k = min(rank_x, rank_y) retained directions; the
// layer's score is the mean of ρ over repeats, with the population standard
// deviation across repeats kept alongside.

#include "repsim/activation_store.hpp"
#include "repsim/error.hpp"
#include "repsim/linalg.hpp"
#include "repsim/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

namespace repsim {

struct LayerSimilarity {
    std::string layer_name;
    double rho_mean = 0.0;
    double rho_std = 0.0; // population std over repeats
    std::vector<double> per_repeat;
    double retained_dims = 0.0; // mean k over repeats
};

/// Mean and population standard deviation.
inline std::pair<double, double> mean_and_std(const std::vector<double>& values) {
    const auto n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

inline LayerSimilarity layer_similarity(const ActivationTensor& a, const ActivationTensor& b,
                                        const SamplePlan& plan, double trunc = kDefaultTruncation,
                                        SideStreams sides = {}) {
    LayerSimilarity out;
    out.layer_name = a.layer_name();
    try {
        plan.validate();
        double dims = 0.0;
        for (std::size_t r = 0; r < plan.repeats; ++r) {
            const auto [x, y] = sample_pair(a, b, plan, r, sides);
            const CcaResult res = cca(x.matrix, y.matrix, trunc);
            out.per_repeat.push_back(res.mean_correlation());
            dims += static_cast<double>(res.correlations.size());
        }
        out.retained_dims = dims / static_cast<double>(plan.repeats);
    } catch (const Error& e) {
        throw DataError(e.category(), "layer '" + out.layer_name + "': " + e.what());
    }
    std::tie(out.rho_mean, out.rho_std) = mean_and_std(out.per_repeat);
    return out;
}

struct ComparisonSpec {
    Manifest manifest_a;
    Manifest manifest_b;
    SamplePlan plan;
    double trunc = kDefaultTruncation;

    /// Checks the layer grids without touching any tensor file.
    void validate() const {
        plan.validate();
        if (!(trunc >= 0.0 && trunc < 1.0)) {
            throw DataError("argument", "truncation must lie in [0, 1)");
        }
        const auto& la = manifest_a.layers;
        const auto& lb = manifest_b.layers;
        if (la.size() != lb.size()) {
            throw DataError("grid", "layer grids differ in length: " + std::to_string(la.size()) +
                                        " vs " + std::to_string(lb.size()));
        }
        for (std::size_t i = 0; i < la.size(); ++i) {
            const auto& sa = la[i].shape;
            const auto& sb = lb[i].shape;
            if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
                throw DataError("grid", "layer " + std::to_string(i) + " ('" + la[i].name +
                                            "' vs '" + lb[i].name + "') shapes " + sa.str() +
                                            " and " + sb.str() + " are not comparable");
            }
        }
    }
};

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// One LayerSimilarity per grid entry, in manifest order. Layers are
/// independent jobs spread over `jobs` worker threads; results do not depend
/// on the worker count. A failure stops the remaining work; the failing layer
/// earliest in grid order is rethrown and no partial result is returned.
inline std::vector<LayerSimilarity> compare_models(const ComparisonSpec& spec,
                                                   unsigned jobs = default_jobs()) {
    spec.validate();
    const std::size_t count = spec.manifest_a.layers.size();
    const SideStreams sides =
        SideStreams::from_identities(spec.manifest_a.identity(), spec.manifest_b.identity());

    std::vector<std::optional<LayerSimilarity>> results(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                const auto& ea = spec.manifest_a.layers[i];
                const auto& eb = spec.manifest_b.layers[i];
                const ActivationTensor a = load_layer(ea);
                const ActivationTensor b = load_layer(eb);
                results[i] = layer_similarity(a, b, spec.plan, spec.trunc, sides);
            } catch (...) {
                errors[i] = std::current_exception();
                failed.store(true);
            }
        }
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<LayerSimilarity> out;
    out.reserve(count);
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

} // namespace repsim

#endif // REPSIM_SIMILARITY_HPP
