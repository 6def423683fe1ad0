#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cluster.hpp"
#include "config.hpp"
#include "depth.hpp"
#include "distort.hpp"
#include "errors.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "partition.hpp"
#include "reduce.hpp"
#include "select.hpp"
#include "series.hpp"

namespace symdyn {

// ---------------------------------------------------------------------------
// front end: raw record -> symbols

struct encoded_input {
    symbol_sequence seq;
    partition_spec partition;
    preprocess_info prep;
    segmented_series segments; ///< normalized, downsampled phases
    std::vector<double> acf;
};

namespace detail {

/// Normalize every segment with mean/deviation pooled across all of them, so
/// the segments stay mutually comparable and one partition covers them all.
inline void normalize_segments_pooled(segmented_series& s, double* mu_out = nullptr,
                                      double* sigma_out = nullptr) {
    std::vector<double> pooled;
    pooled.reserve(s.total_samples());
    for (const auto& seg : s.segments) pooled.insert(pooled.end(), seg.begin(), seg.end());
    const double mu = mean(pooled);
    const double var = variance(pooled);
    if (var == 0.0) throw zero_variance_error("downsampled series is constant");
    const double sd = std::sqrt(var);
    for (auto& seg : s.segments)
        for (double& x : seg) x = (x - mu) / sd;
    if (mu_out) *mu_out = mu;
    if (sigma_out) *sigma_out = sd;
}

} // namespace detail

/// Normalize, pick the decorrelation lag from the autocorrelation curve, keep
/// every downsampling phase, place the maximum-entropy partition, and encode.
/// The two ordering options change the scale the partition edges live on but
/// not the symbols themselves (the partition is rank-based and normalization
/// is monotone).
inline encoded_input encode_input(const raw_series& raw, const pipeline_config& cfg) {
    if (raw.samples.size() < 4)
        throw sequence_too_short_error("need at least 4 samples, got "
                                       + std::to_string(raw.samples.size()));
    encoded_input out;
    const std::size_t max_lag = default_max_lag(raw.samples.size());
    std::vector<double> full_norm; // full-resolution normalized samples, when needed

    if (cfg.norm_order == normalize_order::before_downsample) {
        raw_series normalized = normalize(raw);
        out.acf = autocorrelation(normalized.samples, max_lag);
        const lag_estimate le = find_downsampling_lag(out.acf);
        out.prep = {le.lag, le.rule, le.warning};
        out.segments = downsample_all_phases(normalized, le.lag);
        if (cfg.partition_from == partition_source::full_resolution)
            full_norm = std::move(normalized.samples);
    } else {
        // The autocorrelation curve is shift- and scale-invariant, so running
        // it on the raw samples gives the same lag either way.
        out.acf = autocorrelation(raw.samples, max_lag);
        const lag_estimate le = find_downsampling_lag(out.acf);
        out.prep = {le.lag, le.rule, le.warning};
        out.segments = downsample_all_phases(raw, le.lag);
        double mu = 0.0, sd = 1.0;
        detail::normalize_segments_pooled(out.segments, &mu, &sd);
        if (cfg.partition_from == partition_source::full_resolution) {
            full_norm.reserve(raw.samples.size());
            for (double x : raw.samples) full_norm.push_back((x - mu) / sd);
        }
    }

    out.partition = cfg.partition_from == partition_source::downsampled
                        ? mep_partition(out.segments, cfg.alphabet)
                        : mep_partition_samples(full_norm, cfg.alphabet);
    out.seq = encode(out.segments, out.partition);
    return out;
}

/// Re-derive the exact symbol stream a stored model was fitted on: the stored
/// lag and partition are reused verbatim, only the normalization statistics
/// are recomputed from the record (deterministic, so the same record encodes
/// to the same symbols).
inline symbol_sequence reencode_with(const model_artifact& art, const raw_series& raw) {
    segmented_series segs;
    if (art.config.norm_order == normalize_order::before_downsample) {
        segs = downsample_all_phases(normalize(raw), art.prep.lag);
    } else {
        segs = downsample_all_phases(raw, art.prep.lag);
        detail::normalize_segments_pooled(segs);
    }
    return encode(segs, art.partition);
}

// ---------------------------------------------------------------------------
// fit

struct fit_result {
    model_artifact artifact;
    fit_diagnostics diagnostics;
    symbol_sequence seq;
    depth_estimate depth;
};

/// Full fit pipeline: encode, estimate the word depth from the one-step
/// spectrum, then estimate the model at that depth.
inline fit_result fit_series(const raw_series& raw, const pipeline_config& cfg,
                             const std::string& input_hash) {
    fit_result r;
    encoded_input enc = encode_input(raw, cfg);

    dmarkov_model one_step = estimate_model(enc.seq, 1, cfg.prior_weight);
    r.depth = estimate_depth(one_step.emission, cfg.epsilon, cfg.max_depth, cfg.depth_floor);

    r.artifact.model = r.depth.depth == 1
                           ? std::move(one_step)
                           : estimate_model(enc.seq, r.depth.depth, cfg.prior_weight);
    r.artifact.partition = enc.partition;
    r.artifact.prep = enc.prep;
    r.artifact.config = cfg;
    r.artifact.input_hash = input_hash;

    fit_diagnostics& d = r.diagnostics;
    d.n_samples = raw.samples.size();
    d.n_obs = observation_count(enc.seq, r.depth.depth);
    d.prep = enc.prep;
    d.acf = std::move(enc.acf);
    d.partition = enc.partition;
    d.occupancy.assign(cfg.alphabet, 0);
    for (std::uint8_t s : enc.seq.symbols) ++d.occupancy[s];
    const double ideal = static_cast<double>(enc.seq.symbols.size()) / cfg.alphabet;
    for (std::size_t c : d.occupancy)
        d.occupancy_deviation = std::max(d.occupancy_deviation,
                                         std::abs(static_cast<double>(c) - ideal));
    d.depth = r.depth;
    d.stationary = r.artifact.model.stationary_diag;

    r.seq = std::move(enc.seq);
    return r;
}

// ---------------------------------------------------------------------------
// reduce

struct reduce_result {
    dendrogram tree;
    score_table table;
    std::size_t chosen_states = 0;
    cluster_map map;
    reduced_model reduced;
};

/// Cluster the emission rows, score every cut, pick the model order by the
/// configured criterion (or a forced order), and build that reduced model.
inline reduce_result reduce_over_cuts(const dmarkov_model& m, const symbol_sequence& seq,
                                      const pipeline_config& cfg,
                                      std::optional<std::size_t> force_states = std::nullopt) {
    reduce_result r;
    r.tree = hierarchical_cluster(pairwise_kl_distance(m));

    score_options so;
    so.emission_weighting = cfg.emission_weighting;
    so.min_states = cfg.min_states == 0 ? 1 : cfg.min_states;
    so.max_states = cfg.max_states;
    so.bound_length = cfg.bound_length;
    r.table = score_all_cuts(m, r.tree, seq, so);

    r.chosen_states = force_states ? *force_states : selected_states(r.table, cfg.selection);
    r.map = cut(r.tree, r.chosen_states);
    r.reduced = build_reduced_model(m, r.map, cfg.emission_weighting);
    return r;
}

// ---------------------------------------------------------------------------
// batch plumbing

struct batch_failure {
    std::string sample_id;
    std::string reason;
};

inline std::string sample_id_of(const std::filesystem::path& p) { return p.stem().string(); }

namespace detail {

inline std::size_t thread_budget(std::size_t jobs) {
    std::size_t cap = std::thread::hardware_concurrency();
    if (cap == 0) cap = 1;
    if (const char* env = std::getenv("SYMDYN_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

/// Run fn(0..jobs-1) across the configured number of worker threads. fn must
/// not throw (workers catch nothing); batch callers capture failures in
/// per-index slots so results assemble in input order regardless of timing.
template <typename Fn>
inline void parallel_for_index(std::size_t jobs, Fn&& fn) {
    const std::size_t nthreads = thread_budget(jobs);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t)
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace detail

// ---------------------------------------------------------------------------
// analyze: one metrics row per record

struct analyze_result {
    std::vector<anomaly_record> rows;    ///< input order; failed records omitted
    std::vector<batch_failure> failures; ///< input order
};

inline analyze_result analyze_batch(std::span<const std::filesystem::path> files,
                                    const pipeline_config& cfg) {
    struct slot {
        std::optional<anomaly_record> row;
        std::string fail;
    };
    std::vector<slot> slots(files.size());

    detail::parallel_for_index(files.size(), [&](std::size_t i) {
        try {
            const std::string h = hash_file(files[i]);
            const raw_series raw = read_series(files[i], cfg);
            const fit_result fr = fit_series(raw, cfg, h);
            const reduce_result rr = reduce_over_cuts(fr.artifact.model, fr.seq, cfg);
            anomaly_record rec;
            rec.sample_id = sample_id_of(files[i]);
            rec.delta_m = cluster_divergence(rr.reduced);
            rec.h_m = discrepancy_statistic(rr.reduced, cfg.hm_one_sided);
            rec.depth = fr.depth.depth;
            rec.selected_n = rr.chosen_states;
            slots[i].row = std::move(rec);
        } catch (const std::exception& e) {
            slots[i].fail = e.what();
        }
    });

    analyze_result out;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (slots[i].row) out.rows.push_back(std::move(*slots[i].row));
        else out.failures.push_back({sample_id_of(files[i]), slots[i].fail});
    }
    return out;
}

// ---------------------------------------------------------------------------
// features: fixed-order reduced emissions per record

struct features_result {
    std::vector<std::string> ids;            ///< input order; failed records omitted
    std::vector<std::vector<double>> rows;   ///< flattened reduced emission per id
    std::vector<dmatrix> emissions;          ///< the same matrices, unflattened
    std::vector<batch_failure> failures;
    std::size_t num_states = 0;
    std::uint32_t alphabet = 0;
};

/// Fit each record, cut its dendrogram at the requested order, and export the
/// reduced emission rows. The order is fixed across records so the flattened
/// vectors are directly comparable as feature vectors.
inline features_result features_batch(std::span<const std::filesystem::path> files,
                                      const pipeline_config& cfg, std::size_t num_states) {
    struct slot {
        std::optional<dmatrix> em;
        std::string fail;
    };
    std::vector<slot> slots(files.size());

    detail::parallel_for_index(files.size(), [&](std::size_t i) {
        try {
            const std::string h = hash_file(files[i]);
            const raw_series raw = read_series(files[i], cfg);
            const fit_result fr = fit_series(raw, cfg, h);
            const dmarkov_model& m = fr.artifact.model;
            const dendrogram tree = hierarchical_cluster(pairwise_kl_distance(m));
            const cluster_map f = cut(tree, num_states);
            slots[i].em = reduce_emission(m, f, cfg.emission_weighting);
        } catch (const std::exception& e) {
            slots[i].fail = e.what();
        }
    });

    features_result out;
    out.num_states = num_states;
    out.alphabet = cfg.alphabet;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (slots[i].em) {
            out.ids.push_back(sample_id_of(files[i]));
            out.rows.push_back(flatten_emission(*slots[i].em));
            out.emissions.push_back(std::move(*slots[i].em));
        } else {
            out.failures.push_back({sample_id_of(files[i]), slots[i].fail});
        }
    }
    return out;
}

} // namespace symdyn
