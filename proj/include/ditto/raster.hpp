#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ditto/common.hpp"
#include "ditto/trace.hpp"

namespace ditto {

// Raster geometry: x-axis = time bins, y-axis = devices, 2 op channels.
struct GridSpec {
    int time_bins = 64;   // W
    int device_rows = 8;  // H = device count
    int64_t horizon_us = 64000;

    static constexpr int channels = 2;  // 0 = read, 1 = write

    int64_t bin_width_us() const { return horizon_us / time_bins; }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void validate_grid(const GridSpec& grid) {
    if (grid.time_bins < 8)
        throw domain_error("time_bins must be >= 8");
    if (grid.device_rows < 1)
        throw domain_error("device_rows must be >= 1");
    if (grid.horizon_us < grid.time_bins)
        throw domain_error("horizon_us too small for time_bins");
}

// C x H x W raster with values in [0,1], C-order (c, d, b).
struct TraceImage {
    std::vector<float> values;
    GridSpec grid;

    TraceImage() = default;
    explicit TraceImage(const GridSpec& g)
        : values(static_cast<std::size_t>(GridSpec::channels) * g.device_rows * g.time_bins, 0.0f),
          grid(g) {}

    float& at(int c, int d, int b) {
        return values[(static_cast<std::size_t>(c) * grid.device_rows + d) * grid.time_bins + b];
    }
    float at(int c, int d, int b) const {
        return values[(static_cast<std::size_t>(c) * grid.device_rows + d) * grid.time_bins + b];
    }

    friend bool operator==(const TraceImage&, const TraceImage&) = default;
};

struct AugmentSpec {
    double sigma_t = 1.0;       // std along time, in bins
    double sigma_d = 0.5;       // std along devices, in rows
    double halo_amplitude = 0.5;
    int kernel_radius = 2;
};

inline void validate_augment(const AugmentSpec& spec) {
    if (spec.sigma_t <= 0.0 || spec.sigma_d <= 0.0)
        throw domain_error("augment sigmas must be > 0");
    if (spec.halo_amplitude <= 0.0 || spec.halo_amplitude >= 1.0)
        throw domain_error("halo_amplitude must be in (0,1)");
    if (spec.kernel_radius < 1)
        throw domain_error("kernel_radius must be >= 1");
}

// Presence raster: pixel (c,d,b) = 1.0 iff at least one op-c event hit device
// d in time bin b. Multiplicity collapses to 1.0.
inline TraceImage encode(const Trace& trace, const GridSpec& grid) {
    validate_grid(grid);
    if (trace.device_count != grid.device_rows)
        throw domain_error("trace device_count does not match grid device_rows");
    if (trace.horizon_us != grid.horizon_us)
        throw domain_error("trace horizon_us does not match grid horizon_us");

    TraceImage img(grid);
    int64_t bw = grid.bin_width_us();
    for (const TraceEvent& ev : trace.events) {
        int b = static_cast<int>(bin_of(ev.timestamp_us, bw, grid.time_bins));
        img.at(static_cast<int>(ev.op), ev.device_id, b) = 1.0f;
    }
    return img;
}

namespace detail {

// Truncated Gaussian bump of the given peak amplitude around every lit pixel,
// max-combined with the input. Shared by augment() and the sparsity weights.
inline TraceImage halo_field(const TraceImage& image, double sigma_t, double sigma_d,
                             double amplitude, int radius) {
    const GridSpec& g = image.grid;
    TraceImage out = image;
    int k = radius;
    std::vector<float> kernel(static_cast<std::size_t>(2 * k + 1) * (2 * k + 1));
    for (int dd = -k; dd <= k; ++dd)
        for (int db = -k; db <= k; ++db)
            kernel[static_cast<std::size_t>(dd + k) * (2 * k + 1) + (db + k)] = static_cast<float>(
                amplitude * std::exp(-(static_cast<double>(db) * db / (2.0 * sigma_t * sigma_t) +
                                       static_cast<double>(dd) * dd / (2.0 * sigma_d * sigma_d))));

    for (int c = 0; c < GridSpec::channels; ++c)
        for (int d = 0; d < g.device_rows; ++d)
            for (int b = 0; b < g.time_bins; ++b) {
                if (image.at(c, d, b) != 1.0f)
                    continue;
                for (int dd = -k; dd <= k; ++dd) {
                    int d2 = d + dd;
                    if (d2 < 0 || d2 >= g.device_rows)
                        continue;
                    for (int db = -k; db <= k; ++db) {
                        int b2 = b + db;
                        if (b2 < 0 || b2 >= g.time_bins)
                            continue;
                        float v = kernel[static_cast<std::size_t>(dd + k) * (2 * k + 1) + (db + k)];
                        float& px = out.at(c, d2, b2);
                        if (v > px)
                            px = v;
                    }
                }
            }
    return out;
}

}  // namespace detail

// Densifies a presence image with Gaussian halos. Event pixels stay exactly
// 1.0; halo-only pixels never exceed the amplitude.
inline TraceImage augment(const TraceImage& image, const AugmentSpec& spec) {
    validate_augment(spec);
    return detail::halo_field(image, spec.sigma_t, spec.sigma_d, spec.halo_amplitude,
                              spec.kernel_radius);
}

// Inverse transform: one event per pixel that clears the threshold and is a
// non-strict local maximum along the time axis. Timestamps land at bin centers.
inline Trace decode(const TraceImage& image, double threshold, const GridSpec& grid) {
    validate_grid(grid);
    if (image.grid != grid)
        throw domain_error("image grid does not match decode grid");
    if (threshold <= 0.0 || threshold > 1.0)
        throw domain_error("decode threshold must be in (0,1]");

    Trace trace;
    trace.device_count = grid.device_rows;
    trace.horizon_us = grid.horizon_us;
    int64_t bw = grid.bin_width_us();
    int W = grid.time_bins;
    for (int b = 0; b < W; ++b) {
        // Last bin absorbs the integer-division remainder of the horizon.
        int64_t bin_start = static_cast<int64_t>(b) * bw;
        int64_t bin_end = (b == W - 1) ? grid.horizon_us : bin_start + bw;
        int64_t center = bin_start + (bin_end - bin_start) / 2;
        for (int c = 0; c < GridSpec::channels; ++c)
            for (int d = 0; d < grid.device_rows; ++d) {
                float v = image.at(c, d, b);
                if (v < threshold)
                    continue;
                if (b > 0 && image.at(c, d, b - 1) > v)
                    continue;
                if (b + 1 < W && image.at(c, d, b + 1) > v)
                    continue;
                TraceEvent ev;
                ev.timestamp_us = center;
                ev.device_id = d;
                ev.op = static_cast<Op>(c);
                trace.events.push_back(ev);
            }
    }
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.timestamp_us < b.timestamp_us; });
    return trace;
}

// Decoding augmented ground truth is only exact while halos stay below the
// threshold; enforced wherever both knobs are configured together.
inline void validate_decode_threshold(double threshold, const AugmentSpec& augment_spec) {
    if (threshold <= augment_spec.halo_amplitude)
        throw domain_error("decode threshold must exceed halo amplitude");
}

/* ------------------------- image container I/O -------------------------- */

// Raw IEEE-754 binary32 little-endian, C-order (c,d,b), plus a JSON sidecar
// `<path>.json` holding {channels, rows, cols, horizon_us}.
inline void save_image(const TraceImage& image, const std::filesystem::path& path) {
    nlohmann::json header = {{"channels", GridSpec::channels},
                             {"rows", image.grid.device_rows},
                             {"cols", image.grid.time_bins},
                             {"horizon_us", image.grid.horizon_us}};
    static_assert(sizeof(float) == 4);
    std::string blob(reinterpret_cast<const char*>(image.values.data()),
                     image.values.size() * sizeof(float));
    atomic_write_file(path, blob);
    std::filesystem::path sidecar = path;
    sidecar += ".json";
    atomic_write_file(sidecar, header.dump(2) + "\n");
}

inline TraceImage load_image(const std::filesystem::path& path) {
    std::filesystem::path sidecar = path;
    sidecar += ".json";
    nlohmann::json header = nlohmann::json::parse(read_file(sidecar));
    if (header.at("channels").get<int>() != GridSpec::channels)
        throw domain_error("unsupported channel count in " + sidecar.string());
    GridSpec grid;
    grid.device_rows = header.at("rows").get<int>();
    grid.time_bins = header.at("cols").get<int>();
    grid.horizon_us = header.at("horizon_us").get<int64_t>();
    TraceImage img(grid);
    std::string blob = read_file(path);
    if (blob.size() != img.values.size() * sizeof(float))
        throw domain_error("image blob size mismatch in " + path.string());
    std::memcpy(img.values.data(), blob.data(), blob.size());
    return img;
}

// Per-channel PGM (P5, maxval 255) for eyeballing rasters.
inline std::string to_pgm(const TraceImage& image, int channel) {
    if (channel < 0 || channel >= GridSpec::channels)
        throw domain_error("bad channel");
    const GridSpec& g = image.grid;
    std::string out = "P5\n" + std::to_string(g.time_bins) + " " + std::to_string(g.device_rows) +
                      "\n255\n";
    out.reserve(out.size() + static_cast<std::size_t>(g.device_rows) * g.time_bins);
    for (int d = 0; d < g.device_rows; ++d)
        for (int b = 0; b < g.time_bins; ++b) {
            float v = image.at(channel, d, b);
            if (v < 0.0f)
                v = 0.0f;
            if (v > 1.0f)
                v = 1.0f;
            out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
        }
    return out;
}

}  // namespace ditto
