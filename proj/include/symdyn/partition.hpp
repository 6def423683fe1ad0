#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "errors.hpp"
#include "series.hpp"

namespace symdyn {

/// Cell boundaries of a quantile partition of the real line.
/// Cell j is (edges[j-1], edges[j]], with the leftmost and rightmost cells
/// open toward -inf / +inf.
struct partition_spec {
    std::vector<double> edges; ///< strictly increasing, size alphabet_size - 1
    std::uint32_t alphabet_size = 0;
};

/// Symbol stream over {0, ..., alphabet_size-1}. segment_ends are cumulative
/// exclusive end offsets into `symbols`, one per segment; windows used for
/// model estimation never cross an end.
struct symbol_sequence {
    std::vector<std::uint8_t> symbols;
    std::uint32_t alphabet_size = 0;
    std::vector<std::size_t> segment_ends;

    [[nodiscard]] std::size_t size() const noexcept { return symbols.size(); }
    [[nodiscard]] std::size_t segment_count() const noexcept { return segment_ends.size(); }

    [[nodiscard]] std::span<const std::uint8_t> segment(std::size_t i) const {
        const std::size_t begin = i == 0 ? 0 : segment_ends[i - 1];
        return {symbols.data() + begin, segment_ends[i] - begin};
    }

    static symbol_sequence single_segment(std::vector<std::uint8_t> syms, std::uint32_t alphabet) {
        symbol_sequence s;
        s.segment_ends = {syms.size()};
        s.symbols = std::move(syms);
        s.alphabet_size = alphabet;
        return s;
    }
};

/// Equal-occupancy (maximum-entropy) partition from empirical quantiles.
/// Edge i is the ceil(i*N/K)-th order statistic of the pooled samples; no
/// interpolation between order statistics, so the edges are always observed
/// values and the construction is deterministic.
inline partition_spec mep_partition_samples(std::span<const double> samples, std::uint32_t alphabet_size) {
    if (alphabet_size < 2)
        throw error(errc::invalid_argument, "mep_partition: alphabet size must be at least 2");
    if (samples.size() < alphabet_size)
        throw error(errc::invalid_argument, "mep_partition: fewer samples than symbols");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());

    const std::size_t n = sorted.size();
    partition_spec spec;
    spec.alphabet_size = alphabet_size;
    spec.edges.reserve(alphabet_size - 1);
    for (std::uint32_t i = 1; i < alphabet_size; ++i) {
        // ceil(i*n/K)-th order statistic, 1-indexed
        const std::size_t rank = (static_cast<std::size_t>(i) * n + alphabet_size - 1) / alphabet_size;
        spec.edges.push_back(sorted[rank - 1]);
    }
    for (std::size_t i = 1; i < spec.edges.size(); ++i) {
        if (!(spec.edges[i - 1] < spec.edges[i]))
            throw degenerate_partition_error("mep_partition: tied quantile edges; data cannot support this alphabet");
    }
    return spec;
}

/// Pool every segment of a decimated series and partition the pooled values.
inline partition_spec mep_partition(const segmented_series& series, std::uint32_t alphabet_size) {
    std::vector<double> pooled;
    pooled.reserve(series.total_samples());
    for (const auto& seg : series.segments) pooled.insert(pooled.end(), seg.begin(), seg.end());
    return mep_partition_samples(pooled, alphabet_size);
}

/// Map one sample to its cell. Cells are right-closed: a value exactly on an
/// edge belongs to the lower cell.
inline std::uint8_t encode_sample(double x, const partition_spec& p) {
    const auto it = std::lower_bound(p.edges.begin(), p.edges.end(), x);
    return static_cast<std::uint8_t>(it - p.edges.begin());
}

/// Encode every segment, preserving segment boundaries.
inline symbol_sequence encode(const segmented_series& series, const partition_spec& p) {
    if (p.alphabet_size < 2 || p.edges.size() + 1 != p.alphabet_size)
        throw error(errc::invalid_argument, "encode: malformed partition");
    symbol_sequence out;
    out.alphabet_size = p.alphabet_size;
    out.symbols.reserve(series.total_samples());
    for (const auto& seg : series.segments) {
        for (double x : seg) out.symbols.push_back(encode_sample(x, p));
        out.segment_ends.push_back(out.symbols.size());
    }
    return out;
}

} // namespace symdyn
