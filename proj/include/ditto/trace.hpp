#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ditto/common.hpp"

namespace ditto {

enum class Op : uint8_t { read = 0, write = 1 };

inline char op_token(Op op) { return op == Op::read ? 'R' : 'W'; }

struct TraceEvent {
    int64_t timestamp_us = 0;
    int device_id = 0;
    Op op = Op::read;
    std::optional<int64_t> offset_blocks;
    std::optional<int64_t> size_blocks;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Timestamped read/write events over `device_count` devices, sorted by time.
struct Trace {
    std::vector<TraceEvent> events;
    int device_count = 1;
    int64_t horizon_us = 1;
    // Set by synth_corpus when per (op,device,bin) multiplicity exceeded 1 and
    // the raster codec would collapse events. Not serialized, not compared.
    bool capacity_warning = false;

    friend bool operator==(const Trace& a, const Trace& b) {
        return a.events == b.events && a.device_count == b.device_count &&
               a.horizon_us == b.horizon_us;
    }
};

// Numeric, user-controllable conditioning target.
struct WorkloadConfig {
    double read_ratio = 0.0;
    int64_t total_requests = 0;
    std::vector<double> device_utilization;
    double burstiness = 0.0;
};

namespace detail {

inline int64_t parse_int_field(const std::string& field, std::size_t line_no, const char* name) {
    if (field.empty())
        throw parse_error(line_no, std::string("empty ") + name + " field");
    for (char ch : field)
        if (ch < '0' || ch > '9')
            throw parse_error(line_no, std::string("non-integer ") + name + ": '" + field + "'");
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(field.c_str(), &end, 10);
    if (errno != 0 || end != field.c_str() + field.size())
        throw parse_error(line_no, std::string("bad ") + name + ": '" + field + "'");
    return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

// CSV rows `timestamp_us,device_id,op[,offset_blocks,size_blocks]`, op R|W.
// Unsorted input is accepted and sorted stably.
inline Trace parse_trace(std::istream& text, int device_count, int64_t horizon_us) {
    if (device_count < 1)
        throw domain_error("device_count must be >= 1");
    if (horizon_us < 1)
        throw domain_error("horizon_us must be >= 1");

    Trace trace;
    trace.device_count = device_count;
    trace.horizon_us = horizon_us;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(text, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto fields = detail::split_csv(line);
        if (fields.size() != 3 && fields.size() != 5)
            throw parse_error(line_no, "expected 3 or 5 fields, got " + std::to_string(fields.size()));

        TraceEvent ev;
        ev.timestamp_us = detail::parse_int_field(fields[0], line_no, "timestamp_us");
        ev.device_id = static_cast<int>(detail::parse_int_field(fields[1], line_no, "device_id"));
        if (fields[2] == "R")
            ev.op = Op::read;
        else if (fields[2] == "W")
            ev.op = Op::write;
        else
            throw parse_error(line_no, "unknown op token: '" + fields[2] + "'");
        if (fields.size() == 5) {
            ev.offset_blocks = detail::parse_int_field(fields[3], line_no, "offset_blocks");
            ev.size_blocks = detail::parse_int_field(fields[4], line_no, "size_blocks");
            if (*ev.size_blocks < 1)
                throw parse_error(line_no, "size_blocks must be >= 1");
        }

        if (ev.device_id >= device_count)
            throw domain_error("device_id " + std::to_string(ev.device_id) + " out of range [0, " +
                               std::to_string(device_count) + ") at line " + std::to_string(line_no));
        if (ev.timestamp_us >= horizon_us)
            throw domain_error("timestamp " + std::to_string(ev.timestamp_us) + " >= horizon " +
                               std::to_string(horizon_us) + " at line " + std::to_string(line_no));
        trace.events.push_back(ev);
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.timestamp_us < b.timestamp_us; });
    return trace;
}

inline Trace parse_trace(const std::string& text, int device_count, int64_t horizon_us) {
    std::istringstream in(text);
    return parse_trace(in, device_count, horizon_us);
}

inline void serialize_trace(const Trace& trace, std::ostream& out) {
    for (const TraceEvent& ev : trace.events) {
        out << ev.timestamp_us << ',' << ev.device_id << ',' << op_token(ev.op);
        if (ev.offset_blocks && ev.size_blocks)
            out << ',' << *ev.offset_blocks << ',' << *ev.size_blocks;
        out << '\n';
    }
}

inline std::string serialize_trace(const Trace& trace) {
    std::ostringstream out;
    serialize_trace(trace, out);
    return out.str();
}

// Number of analysis bins for a horizon; the tail remainder joins the last bin.
inline int64_t bin_count(int64_t horizon_us, int64_t bin_width_us) {
    int64_t n = horizon_us / bin_width_us;
    return n < 1 ? 1 : n;
}

inline int64_t bin_of(int64_t timestamp_us, int64_t bin_width_us, int64_t n_bins) {
    int64_t b = timestamp_us / bin_width_us;
    return b >= n_bins ? n_bins - 1 : b;
}

// Measures the workload statistics a config controls. Burstiness is the index
// of dispersion (population variance / mean) of per-bin event counts.
inline WorkloadConfig characterize(const Trace& trace, int64_t bin_width_us) {
    if (bin_width_us <= 0)
        throw domain_error("bin_width_us must be > 0");

    WorkloadConfig cfg;
    cfg.total_requests = static_cast<int64_t>(trace.events.size());
    cfg.device_utilization.assign(static_cast<std::size_t>(trace.device_count), 0.0);

    if (cfg.total_requests == 0)
        return cfg;

    int64_t reads = 0;
    std::vector<int64_t> per_device(static_cast<std::size_t>(trace.device_count), 0);
    int64_t n_bins = bin_count(trace.horizon_us, bin_width_us);
    std::vector<int64_t> per_bin(static_cast<std::size_t>(n_bins), 0);
    for (const TraceEvent& ev : trace.events) {
        if (ev.op == Op::read)
            ++reads;
        ++per_device[static_cast<std::size_t>(ev.device_id)];
        ++per_bin[static_cast<std::size_t>(bin_of(ev.timestamp_us, bin_width_us, n_bins))];
    }

    cfg.read_ratio = static_cast<double>(reads) / static_cast<double>(cfg.total_requests);
    for (int d = 0; d < trace.device_count; ++d)
        cfg.device_utilization[static_cast<std::size_t>(d)] =
            static_cast<double>(per_device[static_cast<std::size_t>(d)]) /
            static_cast<double>(cfg.total_requests);

    double mean = static_cast<double>(cfg.total_requests) / static_cast<double>(n_bins);
    double var = 0.0;
    for (int64_t c : per_bin) {
        double d = static_cast<double>(c) - mean;
        var += d * d;
    }
    var /= static_cast<double>(n_bins);
    cfg.burstiness = mean > 0.0 ? var / mean : 0.0;
    return cfg;
}

// Flattens a config to the encoder input layout:
// [read_ratio, total/scale, burstiness/(1+burstiness), utilization...].
inline std::vector<double> config_vector(const WorkloadConfig& cfg, double request_scale) {
    if (request_scale <= 0.0)
        throw domain_error("request_scale must be > 0");
    std::vector<double> v;
    v.reserve(cfg.device_utilization.size() + 3);
    v.push_back(cfg.read_ratio);
    v.push_back(static_cast<double>(cfg.total_requests) / request_scale);
    v.push_back(cfg.burstiness / (1.0 + cfg.burstiness));
    v.insert(v.end(), cfg.device_utilization.begin(), cfg.device_utilization.end());
    return v;
}

}  // namespace ditto
