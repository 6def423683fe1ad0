#pragma once

#include <cstdint>
#include <string>

#include "errors.hpp"
#include "reduce.hpp"
#include "select.hpp"

namespace symdyn {

enum class input_format { csv, f32, f64 };

/// Whether normalization happens on the raw record or on the decimated
/// segments (pooled statistics either way).
enum class normalize_order { before_downsample, after_downsample };

/// Which samples define the quantile edges: the decimated segments that will
/// actually be encoded (default), or the full-resolution record.
enum class partition_source { downsampled, full_resolution };

/// Every knob of the fit/reduce/simulate pipeline. Serialized verbatim into
/// each output so results are self-describing and reruns are comparable.
struct pipeline_config {
    std::uint32_t alphabet = 3;
    double epsilon = 0.05;
    std::uint32_t max_depth = 8;
    std::uint32_t depth_floor = 1;
    double prior_weight = 1.0;
    weighting emission_weighting = weighting::stationary;
    criterion selection = criterion::bic;
    std::uint64_t seed = 0;
    // input decoding
    input_format format = input_format::csv;
    std::size_t column = 0;
    bool skip_header = false;
    // preprocessing choices
    normalize_order norm_order = normalize_order::before_downsample;
    partition_source partition_from = partition_source::downsampled;
    // scoring and simulation
    bool hm_one_sided = false;
    std::size_t min_states = 1;
    std::size_t max_states = 0; ///< 0 means every cut
    std::size_t bound_length = 1000;
    std::size_t sim_length = 1000;
    std::size_t sim_trials = 100;
};

inline const char* to_string(weighting w) {
    return w == weighting::stationary ? "stationary" : "empirical";
}
inline const char* to_string(criterion c) { return c == criterion::aic ? "aic" : "bic"; }
inline const char* to_string(input_format f) {
    switch (f) {
        case input_format::csv: return "csv";
        case input_format::f32: return "f32";
        default: return "f64";
    }
}
inline const char* to_string(normalize_order o) {
    return o == normalize_order::before_downsample ? "before_downsample" : "after_downsample";
}
inline const char* to_string(partition_source s) {
    return s == partition_source::downsampled ? "downsampled" : "full_resolution";
}

inline weighting weighting_from_string(const std::string& s) {
    if (s == "stationary") return weighting::stationary;
    if (s == "empirical") return weighting::empirical;
    throw schema_error("unknown weighting: " + s);
}
inline criterion criterion_from_string(const std::string& s) {
    if (s == "aic") return criterion::aic;
    if (s == "bic") return criterion::bic;
    throw schema_error("unknown criterion: " + s);
}
inline input_format format_from_string(const std::string& s) {
    if (s == "csv") return input_format::csv;
    if (s == "f32") return input_format::f32;
    if (s == "f64") return input_format::f64;
    throw schema_error("unknown input format: " + s);
}
inline normalize_order normalize_order_from_string(const std::string& s) {
    if (s == "before_downsample") return normalize_order::before_downsample;
    if (s == "after_downsample") return normalize_order::after_downsample;
    throw schema_error("unknown normalize order: " + s);
}
inline partition_source partition_source_from_string(const std::string& s) {
    if (s == "downsampled") return partition_source::downsampled;
    if (s == "full_resolution") return partition_source::full_resolution;
    throw schema_error("unknown partition source: " + s);
}

} // namespace symdyn
