#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "ditto/common.hpp"
#include "ditto/rng.hpp"
#include "ditto/trace.hpp"

namespace ditto {

// Integer counts proportional to weights, summing to `total` exactly.
inline std::vector<int64_t> largest_remainder(const std::vector<double>& weights, int64_t total) {
    double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (sum <= 0.0)
        throw domain_error("largest_remainder: weights must have positive sum");
    std::vector<int64_t> counts(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> fracs;
    fracs.reserve(weights.size());
    int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double exact = weights[i] / sum * static_cast<double>(total);
        counts[i] = static_cast<int64_t>(std::floor(exact));
        assigned += counts[i];
        fracs.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(fracs.begin(), fracs.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int64_t r = total - assigned, i = 0; r > 0; --r, ++i)
        ++counts[fracs[static_cast<std::size_t>(i)].second];
    return counts;
}

namespace detail {

// Per-bin counts with the requested index of dispersion: a two-level intensity
// mixture (hot/cold bins) rounded to the exact total.
inline std::vector<int64_t> draw_bin_counts(int64_t total, int64_t n_bins, double burstiness,
                                            Rng& rng) {
    std::vector<int64_t> counts(static_cast<std::size_t>(n_bins), 0);
    if (total == 0)
        return counts;
    double mu = static_cast<double>(total) / static_cast<double>(n_bins);

    std::vector<double> intensity(static_cast<std::size_t>(n_bins), mu);
    if (burstiness > 1e-6) {
        double var = burstiness * mu;
        double q = 0.25;
        double lo = mu - std::sqrt(var * q / (1.0 - q));
        if (lo < 0.0) {
            // Hot-bins-only regime: cold bins empty, hot share sized to hit the
            // dispersion target.
            q = mu / (mu + burstiness);
            lo = 0.0;
        }
        int64_t hot = std::max<int64_t>(1, std::llround(q * static_cast<double>(n_bins)));
        hot = std::min(hot, n_bins);
        double q_eff = static_cast<double>(hot) / static_cast<double>(n_bins);
        double hi, lo_eff;
        if (lo <= 0.0 || q_eff >= 1.0) {
            lo_eff = 0.0;
            hi = mu / q_eff;
        } else {
            hi = mu + std::sqrt(var * (1.0 - q_eff) / q_eff);
            lo_eff = mu - std::sqrt(var * q_eff / (1.0 - q_eff));
            if (lo_eff < 0.0) {
                lo_eff = 0.0;
                hi = mu / q_eff;
            }
        }
        std::vector<int> order(static_cast<std::size_t>(n_bins));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.data(), order.size());
        for (std::size_t i = 0; i < order.size(); ++i)
            intensity[static_cast<std::size_t>(order[i])] =
                (static_cast<int64_t>(i) < hot) ? hi : lo_eff;
    } else {
        // Near-uniform target: spread the remainder over distinct random bins.
        int64_t base = total / n_bins;
        int64_t rem = total - base * n_bins;
        std::vector<int> order(static_cast<std::size_t>(n_bins));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order.data(), order.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            counts[i] = base;
        for (int64_t i = 0; i < rem; ++i)
            ++counts[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        return counts;
    }
    return largest_remainder(intensity, total);
}

}  // namespace detail

// Draws a trace realizing `config` with exact composition: read/write split by
// rounding, per-device counts by largest remainder, temporal profile matching
// the burstiness target. Events of one (device,op) group avoid sharing a bin
// whenever capacity allows; forced collisions flag capacity_warning.
inline Trace sample_trace(const WorkloadConfig& config, int device_count, int64_t horizon_us,
                          int64_t bin_width_us, uint64_t seed) {
    if (device_count < 1 || static_cast<int>(config.device_utilization.size()) != device_count)
        throw domain_error("config utilization length must equal device_count");
    if (bin_width_us <= 0 || horizon_us < 2 * bin_width_us)
        throw domain_error("horizon must cover at least two bins");
    if (config.read_ratio < 0.0 || config.read_ratio > 1.0)
        throw domain_error("read_ratio must be in [0,1]");
    if (config.total_requests < 0)
        throw domain_error("total_requests must be >= 0");

    Trace trace;
    trace.device_count = device_count;
    trace.horizon_us = horizon_us;
    int64_t total = config.total_requests;
    if (total == 0)
        return trace;

    Rng rng(seed);
    int64_t reads = std::llround(config.read_ratio * static_cast<double>(total));

    std::vector<int64_t> per_device = largest_remainder(config.device_utilization, total);

    // Device slots in random order; the first `reads` become read ops.
    std::vector<int> slot_device(static_cast<std::size_t>(total));
    std::size_t k = 0;
    for (int d = 0; d < device_count; ++d)
        for (int64_t i = 0; i < per_device[static_cast<std::size_t>(d)]; ++i)
            slot_device[k++] = d;
    rng.shuffle(slot_device.data(), slot_device.size());

    int64_t n_bins = bin_count(horizon_us, bin_width_us);
    std::vector<int64_t> bin_free = detail::draw_bin_counts(total, n_bins, config.burstiness, rng);

    // Group events by (device, op), largest group first, and hand each event a
    // bin with free capacity that the group has not used yet when possible.
    std::vector<std::vector<int64_t>> group_sizes(static_cast<std::size_t>(device_count),
                                                  std::vector<int64_t>(2, 0));
    for (std::size_t i = 0; i < slot_device.size(); ++i) {
        int op = static_cast<int64_t>(i) < reads ? 0 : 1;
        ++group_sizes[static_cast<std::size_t>(slot_device[i])][static_cast<std::size_t>(op)];
    }
    struct Group {
        int device;
        int op;
        int64_t size;
    };
    std::vector<Group> groups;
    for (int d = 0; d < device_count; ++d)
        for (int op = 0; op < 2; ++op)
            if (group_sizes[static_cast<std::size_t>(d)][static_cast<std::size_t>(op)] > 0)
                groups.push_back({d, op, group_sizes[static_cast<std::size_t>(d)][static_cast<std::size_t>(op)]});
    std::stable_sort(groups.begin(), groups.end(),
                     [](const Group& a, const Group& b) { return a.size > b.size; });

    std::vector<char> used(static_cast<std::size_t>(n_bins), 0);
    std::vector<int64_t> candidates;
    candidates.reserve(static_cast<std::size_t>(n_bins));
    int64_t bw = bin_width_us;
    for (const Group& g : groups) {
        std::fill(used.begin(), used.end(), 0);
        for (int64_t e = 0; e < g.size; ++e) {
            candidates.clear();
            for (int64_t b = 0; b < n_bins; ++b)
                if (bin_free[static_cast<std::size_t>(b)] > 0 && !used[static_cast<std::size_t>(b)])
                    candidates.push_back(b);
            bool collided = candidates.empty();
            if (collided) {
                for (int64_t b = 0; b < n_bins; ++b)
                    if (bin_free[static_cast<std::size_t>(b)] > 0)
                        candidates.push_back(b);
                trace.capacity_warning = true;
            }
            if (candidates.empty())
                throw invariant_error("bin capacity bookkeeping underflow");
            int64_t b = candidates[static_cast<std::size_t>(rng.uniform_int(candidates.size()))];
            --bin_free[static_cast<std::size_t>(b)];
            used[static_cast<std::size_t>(b)] = 1;

            int64_t bin_start = b * bw;
            int64_t bin_end = (b == n_bins - 1) ? horizon_us : bin_start + bw;
            TraceEvent ev;
            ev.timestamp_us = bin_start + static_cast<int64_t>(rng.uniform_int(
                                              static_cast<uint64_t>(bin_end - bin_start)));
            ev.device_id = g.device;
            ev.op = static_cast<Op>(g.op);
            trace.events.push_back(ev);
        }
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.timestamp_us < b.timestamp_us; });
    return trace;
}

// Ranges for drawing random workload configs.
struct ConfigSampler {
    double read_ratio_min = 0.05, read_ratio_max = 0.95;
    int64_t total_requests_min = 50, total_requests_max = 400;
    double burstiness_min = 0.0, burstiness_max = 4.0;
    double utilization_concentration = 0.7;  // Dirichlet concentration
};

struct CorpusSpec {
    int64_t n_traces = 2000;
    int device_count = 8;
    int64_t horizon_us = 64000;
    int64_t bin_width_us = 1000;
    ConfigSampler sampler;
    uint64_t seed = 0;
};

inline void validate_corpus_spec(const CorpusSpec& spec) {
    const ConfigSampler& s = spec.sampler;
    if (spec.n_traces < 1)
        throw domain_error("n_traces must be >= 1");
    if (spec.device_count < 1)
        throw domain_error("device_count must be >= 1");
    if (spec.bin_width_us <= 0 || spec.horizon_us < 2 * spec.bin_width_us)
        throw domain_error("horizon_us must cover at least two bins");
    if (s.read_ratio_min < 0.0 || s.read_ratio_max > 1.0 || s.read_ratio_min > s.read_ratio_max)
        throw domain_error("read_ratio range must be a subinterval of [0,1]");
    if (s.total_requests_min < 0 || s.total_requests_min > s.total_requests_max)
        throw domain_error("total_requests range is empty");
    if (s.burstiness_min < 0.0 || s.burstiness_min > s.burstiness_max)
        throw domain_error("burstiness range is empty");
    if (s.utilization_concentration <= 0.0)
        throw domain_error("utilization_concentration must be > 0");
}

inline WorkloadConfig sample_config(const ConfigSampler& sampler, int device_count, Rng& rng) {
    WorkloadConfig cfg;
    cfg.read_ratio = rng.uniform(sampler.read_ratio_min, sampler.read_ratio_max);
    cfg.total_requests =
        sampler.total_requests_min +
        static_cast<int64_t>(rng.uniform_int(
            static_cast<uint64_t>(sampler.total_requests_max - sampler.total_requests_min + 1)));
    cfg.burstiness = rng.uniform(sampler.burstiness_min, sampler.burstiness_max);
    cfg.device_utilization.resize(static_cast<std::size_t>(device_count));
    double sum = 0.0;
    for (double& u : cfg.device_utilization) {
        u = rng.gamma(sampler.utilization_concentration);
        sum += u;
    }
    for (double& u : cfg.device_utilization)
        u /= sum;
    return cfg;
}

// n_traces (trace, config) pairs; the stored config is characterize(trace), so
// labels match the traces exactly on ratio/count/utilization.
inline std::vector<std::pair<Trace, WorkloadConfig>> sample_corpus(const CorpusSpec& spec) {
    validate_corpus_spec(spec);
    std::vector<std::pair<Trace, WorkloadConfig>> out;
    out.reserve(static_cast<std::size_t>(spec.n_traces));
    for (int64_t i = 0; i < spec.n_traces; ++i) {
        Rng cfg_rng(derive_seed(spec.seed, "corpus-config", static_cast<uint64_t>(i)));
        WorkloadConfig target = sample_config(spec.sampler, spec.device_count, cfg_rng);
        Trace trace = sample_trace(target, spec.device_count, spec.horizon_us, spec.bin_width_us,
                                   derive_seed(spec.seed, "corpus-trace", static_cast<uint64_t>(i)));
        WorkloadConfig stored = characterize(trace, spec.bin_width_us);
        out.emplace_back(std::move(trace), std::move(stored));
    }
    return out;
}

}  // namespace ditto
