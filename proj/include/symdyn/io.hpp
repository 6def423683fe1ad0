#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cluster.hpp"
#include "config.hpp"
#include "depth.hpp"
#include "distort.hpp"
#include "errors.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "partition.hpp"
#include "reduce.hpp"
#include "select.hpp"
#include "series.hpp"

namespace symdyn {

// ---------------------------------------------------------------------------
// content hashing

/// FNV-1a 64-bit over raw bytes; cheap, stable, good enough to tie outputs to
/// the exact input they came from.
inline std::uint64_t fnv1a64(std::span<const char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// file primitives

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("read failed on " + path.string());
    return bytes;
}

inline std::string hash_file(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    return "fnv1a64:" + hex64(fnv1a64(bytes));
}

/// Write through a sibling temp file and rename, so readers never observe a
/// half-written artifact and a crashed batch leaves no truncated outputs.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot create " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw io_error("write failed on " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("rename failed for " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// numeric formatting: 17 significant digits round-trips IEEE doubles exactly

inline std::string fmt17(double v) {
    if (!std::isfinite(v)) {
        // CSV columns may legitimately carry infinities (e.g. zero-prior
        // likelihoods); JSON writers check finiteness before calling this.
        return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// series input

namespace detail {

inline double parse_strict_double(std::string_view tok, std::size_t line_no,
                                  const std::string& origin) {
    // trim surrounding spaces
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
        tok.remove_suffix(1);
    double v = 0.0;
    const auto* begin = tok.data();
    const auto* end = tok.data() + tok.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw io_error(origin + ":" + std::to_string(line_no) + ": not a number: '" + std::string(tok) + "'");
    if (!std::isfinite(v))
        throw io_error(origin + ":" + std::to_string(line_no) + ": non-finite sample");
    return v;
}

} // namespace detail

/// Read one numeric column from a CSV file. Values must be finite; anything
/// else is an immediate, located error rather than a silent NaN downstream.
inline raw_series read_csv_series(const std::filesystem::path& path, std::size_t column = 0,
                                  bool skip_header = false) {
    const std::string bytes = read_file_bytes(path);
    raw_series series;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    const std::string origin = path.filename().string();
    while (pos < bytes.size()) {
        std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string::npos) eol = bytes.size();
        std::string_view line(bytes.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (skip_header && line_no == 1) continue;
        std::size_t field = 0, start = 0;
        std::string_view tok;
        bool found = false;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (field == column) {
                    tok = line.substr(start, i - start);
                    found = true;
                    break;
                }
                ++field;
                start = i + 1;
            }
        }
        if (!found)
            throw io_error(origin + ":" + std::to_string(line_no) + ": missing column "
                           + std::to_string(column));
        series.samples.push_back(detail::parse_strict_double(tok, line_no, origin));
    }
    if (series.samples.empty()) throw io_error(origin + ": no samples");
    return series;
}

/// Read a packed little-endian float stream (the native layout on every
/// supported target).
inline raw_series read_binary_series(const std::filesystem::path& path, input_format fmt) {
    const std::string bytes = read_file_bytes(path);
    const std::size_t width = fmt == input_format::f32 ? 4 : 8;
    if (bytes.empty() || bytes.size() % width != 0)
        throw io_error(path.filename().string() + ": size is not a multiple of "
                       + std::to_string(width) + " bytes");
    raw_series series;
    series.samples.reserve(bytes.size() / width);
    for (std::size_t i = 0; i < bytes.size(); i += width) {
        double v;
        if (fmt == input_format::f32) {
            float f;
            std::memcpy(&f, bytes.data() + i, 4);
            v = static_cast<double>(f);
        } else {
            std::memcpy(&v, bytes.data() + i, 8);
        }
        if (!std::isfinite(v))
            throw io_error(path.filename().string() + ": non-finite sample at offset "
                           + std::to_string(i));
        series.samples.push_back(v);
    }
    return series;
}

inline raw_series read_series(const std::filesystem::path& path, const pipeline_config& cfg) {
    if (cfg.format == input_format::csv)
        return read_csv_series(path, cfg.column, cfg.skip_header);
    return read_binary_series(path, cfg.format);
}

// ---------------------------------------------------------------------------
// deterministic JSON writing

/// Tiny JSON emitter: fixed key order, no whitespace variation, doubles at 17
/// significant digits. Deterministic output is a contract (reruns must be
/// byte-identical), which is why a general-purpose serializer is not used.
class json_writer {
public:
    void begin_object() { open('{'); }
    void end_object() { close('}'); }
    void begin_array() { open('['); }
    void end_array() { close(']'); }

    void key(std::string_view k) {
        comma();
        text_.push_back('"');
        text_.append(k);
        text_.append("\":");
        pending_value_ = true;
    }

    void value(double v) {
        if (!std::isfinite(v)) throw io_error("json_writer: non-finite real");
        comma();
        text_.append(fmt17(v));
    }
    void value(std::uint64_t v) { comma(); text_.append(std::to_string(v)); }
    void value(std::int64_t v) { comma(); text_.append(std::to_string(v)); }
    void value(std::uint32_t v) { value(static_cast<std::uint64_t>(v)); }
    void value(bool v) { comma(); text_.append(v ? "true" : "false"); }
    void value(std::string_view s) {
        comma();
        text_.push_back('"');
        for (char c : s) {
            switch (c) {
                case '"': text_.append("\\\""); break;
                case '\\': text_.append("\\\\"); break;
                case '\n': text_.append("\\n"); break;
                case '\t': text_.append("\\t"); break;
                case '\r': text_.append("\\r"); break;
                default: text_.push_back(c);
            }
        }
        text_.push_back('"');
    }
    void value(const char* s) { value(std::string_view(s)); }

    template <typename T>
    void field(std::string_view k, T v) {
        key(k);
        value(v);
    }

    void real_array(std::string_view k, std::span<const double> xs) {
        key(k);
        begin_array();
        for (double x : xs) value(x);
        end_array();
    }

    void real_matrix(std::string_view k, const dmatrix& m) {
        key(k);
        begin_array();
        for (std::size_t i = 0; i < m.rows(); ++i) {
            begin_array();
            for (std::size_t j = 0; j < m.cols(); ++j) value(m(i, j));
            end_array();
        }
        end_array();
    }

    const std::string& str() const { return text_; }

private:
    void open(char c) {
        comma();
        text_.push_back(c);
        first_.push_back(true);
    }
    void close(char c) {
        text_.push_back(c);
        first_.pop_back();
    }
    void comma() {
        if (pending_value_) {
            pending_value_ = false;
            return;
        }
        if (!first_.empty()) {
            if (!first_.back()) text_.push_back(',');
            first_.back() = false;
        }
    }

    std::string text_;
    std::vector<bool> first_;
    bool pending_value_ = false;
};

inline void write_config(json_writer& w, const pipeline_config& c) {
    w.key("config");
    w.begin_object();
    w.field("alphabet", c.alphabet);
    w.field("epsilon", c.epsilon);
    w.field("max_depth", c.max_depth);
    w.field("depth_floor", c.depth_floor);
    w.field("prior_weight", c.prior_weight);
    w.field("weighting", to_string(c.emission_weighting));
    w.field("criterion", to_string(c.selection));
    w.field("seed", c.seed);
    w.field("format", to_string(c.format));
    w.field("column", c.column);
    w.field("skip_header", c.skip_header);
    w.field("normalize", to_string(c.norm_order));
    w.field("partition_from", to_string(c.partition_from));
    w.field("hm_one_sided", c.hm_one_sided);
    w.field("min_states", c.min_states);
    w.field("max_states", c.max_states);
    w.field("bound_length", c.bound_length);
    w.field("sim_length", c.sim_length);
    w.field("sim_trials", c.sim_trials);
    w.end_object();
}

// ---------------------------------------------------------------------------
// JSON reading helpers (nlohmann does the parsing; wrap its failures)

namespace detail {

using njson = nlohmann::json;

inline njson parse_json(const std::string& text, const std::string& origin) {
    njson j = njson::parse(text, nullptr, false);
    if (j.is_discarded()) throw schema_error(origin + ": not valid JSON");
    return j;
}

inline const njson& require(const njson& j, const char* key, const std::string& origin) {
    const auto it = j.find(key);
    if (it == j.end()) throw schema_error(origin + ": missing key '" + key + "'");
    return *it;
}

inline double require_real(const njson& j, const char* key, const std::string& origin) {
    const auto& v = require(j, key, origin);
    if (!v.is_number()) throw schema_error(origin + ": '" + key + "' must be a number");
    return v.get<double>();
}

inline std::uint64_t require_uint(const njson& j, const char* key, const std::string& origin) {
    const auto& v = require(j, key, origin);
    if (!v.is_number_unsigned() && !v.is_number_integer())
        throw schema_error(origin + ": '" + key + "' must be an integer");
    const auto i = v.get<std::int64_t>();
    if (i < 0) throw schema_error(origin + ": '" + key + "' must be nonnegative");
    return static_cast<std::uint64_t>(i);
}

inline std::string require_string(const njson& j, const char* key, const std::string& origin) {
    const auto& v = require(j, key, origin);
    if (!v.is_string()) throw schema_error(origin + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

inline dmatrix require_real_matrix(const njson& j, const char* key, std::size_t rows,
                                   std::size_t cols, const std::string& origin) {
    const auto& v = require(j, key, origin);
    if (!v.is_array() || v.size() != rows)
        throw schema_error(origin + ": '" + key + "' must be an array of " + std::to_string(rows) + " rows");
    dmatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& row = v[i];
        if (!row.is_array() || row.size() != cols)
            throw schema_error(origin + ": '" + key + "' row " + std::to_string(i) + " must have "
                               + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!row[c].is_number())
                throw schema_error(origin + ": '" + key + "' has a non-numeric entry");
            m(i, c) = row[c].get<double>();
        }
    }
    return m;
}

inline std::vector<double> require_real_array(const njson& j, const char* key, const std::string& origin) {
    const auto& v = require(j, key, origin);
    if (!v.is_array()) throw schema_error(origin + ": '" + key + "' must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw schema_error(origin + ": '" + key + "' has a non-numeric entry");
        out.push_back(x.get<double>());
    }
    return out;
}

inline pipeline_config read_config(const njson& j, const std::string& origin) {
    pipeline_config c;
    c.alphabet = static_cast<std::uint32_t>(require_uint(j, "alphabet", origin));
    c.epsilon = require_real(j, "epsilon", origin);
    c.max_depth = static_cast<std::uint32_t>(require_uint(j, "max_depth", origin));
    c.depth_floor = static_cast<std::uint32_t>(require_uint(j, "depth_floor", origin));
    c.prior_weight = require_real(j, "prior_weight", origin);
    c.emission_weighting = weighting_from_string(require_string(j, "weighting", origin));
    c.selection = criterion_from_string(require_string(j, "criterion", origin));
    c.seed = require_uint(j, "seed", origin);
    c.format = format_from_string(require_string(j, "format", origin));
    c.column = require_uint(j, "column", origin);
    c.skip_header = require(j, "skip_header", origin).get<bool>();
    c.norm_order = normalize_order_from_string(require_string(j, "normalize", origin));
    c.partition_from = partition_source_from_string(require_string(j, "partition_from", origin));
    c.hm_one_sided = require(j, "hm_one_sided", origin).get<bool>();
    c.min_states = require_uint(j, "min_states", origin);
    c.max_states = require_uint(j, "max_states", origin);
    c.bound_length = require_uint(j, "bound_length", origin);
    c.sim_length = require_uint(j, "sim_length", origin);
    c.sim_trials = require_uint(j, "sim_trials", origin);
    return c;
}

} // namespace detail

// ---------------------------------------------------------------------------
// model artifact

/// How the symbol sequence was derived from the raw record; everything needed
/// to re-encode the same input deterministically.
struct preprocess_info {
    std::size_t lag = 1;
    lag_rule rule = lag_rule::local_minimum;
    bool lag_warning = false;
};

inline const char* to_string(lag_rule r) {
    switch (r) {
        case lag_rule::local_minimum: return "local_minimum";
        case lag_rule::zero_crossing: return "zero_crossing";
        default: return "max_lag_fallback";
    }
}
inline lag_rule lag_rule_from_string(const std::string& s) {
    if (s == "local_minimum") return lag_rule::local_minimum;
    if (s == "zero_crossing") return lag_rule::zero_crossing;
    if (s == "max_lag_fallback") return lag_rule::max_lag_fallback;
    throw schema_error("unknown lag rule: " + s);
}

/// A fitted model plus the partition and preprocessing that produced it.
struct model_artifact {
    dmarkov_model model;
    partition_spec partition;
    preprocess_info prep;
    pipeline_config config;
    std::string input_hash;
};

inline std::string write_model_json(const model_artifact& a) {
    json_writer w;
    const auto& m = a.model;
    w.begin_object();
    w.field("alphabet_size", m.alphabet_size);
    w.field("depth", m.depth);
    w.field("prior_weight", m.prior_weight);

    w.key("partition");
    w.begin_object();
    w.real_array("edges", a.partition.edges);
    w.field("alphabet_size", a.partition.alphabet_size);
    w.end_object();

    w.key("counts");
    w.begin_array();
    for (std::size_t q = 0; q < m.counts.rows(); ++q) {
        w.begin_array();
        for (std::size_t s = 0; s < m.counts.cols(); ++s) w.value(m.counts(q, s));
        w.end_array();
    }
    w.end_array();

    w.real_matrix("emission", m.emission);

    w.key("transition_sparse");
    w.begin_array();
    for (const auto& [from, to, p] : transition_triplets(m)) {
        w.begin_array();
        w.value(from);
        w.value(to);
        w.value(p);
        w.end_array();
    }
    w.end_array();

    w.real_array("stationary", m.stationary);

    w.key("stationary_solver");
    w.begin_object();
    w.field("iterations", m.stationary_diag.iterations);
    w.field("residual", m.stationary_diag.residual);
    w.field("damped", m.stationary_diag.damped);
    w.end_object();

    w.key("preprocess");
    w.begin_object();
    w.field("lag", a.prep.lag);
    w.field("lag_rule", to_string(a.prep.rule));
    w.field("lag_warning", a.prep.lag_warning);
    w.end_object();

    write_config(w, a.config);
    w.field("input_hash", a.input_hash);
    w.end_object();
    return w.str();
}

inline model_artifact read_model_json(const std::string& text, const std::string& origin = "model") {
    const auto j = detail::parse_json(text, origin);
    model_artifact a;
    auto& m = a.model;
    try {
        m.alphabet_size = static_cast<std::uint32_t>(detail::require_uint(j, "alphabet_size", origin));
        m.depth = static_cast<std::uint32_t>(detail::require_uint(j, "depth", origin));
        m.prior_weight = detail::require_real(j, "prior_weight", origin);
        if (m.alphabet_size < 2) throw schema_error(origin + ": alphabet_size must be at least 2");
        if (m.depth < 1) throw schema_error(origin + ": depth must be at least 1");
        const std::size_t nq = state_count_for(m.alphabet_size, m.depth);

        const auto& pj = detail::require(j, "partition", origin);
        a.partition.edges = detail::require_real_array(pj, "edges", origin + ".partition");
        a.partition.alphabet_size =
            static_cast<std::uint32_t>(detail::require_uint(pj, "alphabet_size", origin + ".partition"));
        if (a.partition.alphabet_size != m.alphabet_size
            || a.partition.edges.size() + 1 != a.partition.alphabet_size)
            throw schema_error(origin + ": partition does not match the alphabet");
        for (std::size_t i = 1; i < a.partition.edges.size(); ++i)
            if (!(a.partition.edges[i - 1] < a.partition.edges[i]))
                throw schema_error(origin + ": partition edges must increase");

        const auto& cj = detail::require(j, "counts", origin);
        if (!cj.is_array() || cj.size() != nq)
            throw schema_error(origin + ": counts must have one row per state");
        m.counts = cmatrix(nq, m.alphabet_size, 0);
        for (std::size_t q = 0; q < nq; ++q) {
            if (!cj[q].is_array() || cj[q].size() != m.alphabet_size)
                throw schema_error(origin + ": counts row has wrong width");
            for (std::uint32_t s = 0; s < m.alphabet_size; ++s) {
                if (!cj[q][s].is_number_unsigned() && !cj[q][s].is_number_integer())
                    throw schema_error(origin + ": counts must be integers");
                const auto v = cj[q][s].get<std::int64_t>();
                if (v < 0) throw schema_error(origin + ": counts must be nonnegative");
                m.counts(q, s) = static_cast<std::uint64_t>(v);
            }
        }

        m.emission = detail::require_real_matrix(j, "emission", nq, m.alphabet_size, origin);
        for (std::size_t q = 0; q < nq; ++q) {
            double rowsum = 0.0;
            for (std::uint32_t s = 0; s < m.alphabet_size; ++s) {
                if (m.emission(q, s) < 0.0)
                    throw schema_error(origin + ": emission has a negative entry");
                rowsum += m.emission(q, s);
            }
            if (std::abs(rowsum - 1.0) > 1e-9)
                throw schema_error(origin + ": emission row " + std::to_string(q) + " does not sum to 1");
        }

        m.stationary = detail::require_real_array(j, "stationary", origin);
        if (m.stationary.size() != nq)
            throw schema_error(origin + ": stationary must have one entry per state");
        double total = 0.0;
        for (double v : m.stationary) {
            if (v < 0.0) throw schema_error(origin + ": stationary has a negative entry");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw schema_error(origin + ": stationary does not sum to 1");

        const auto& tj = detail::require(j, "transition_sparse", origin);
        if (!tj.is_array()) throw schema_error(origin + ": transition_sparse must be an array");
        for (const auto& trip : tj) {
            if (!trip.is_array() || trip.size() != 3)
                throw schema_error(origin + ": transition_sparse entries are [from,to,p] triplets");
            const auto from = trip[0].get<std::int64_t>();
            const auto to = trip[1].get<std::int64_t>();
            if (from < 0 || to < 0 || from >= static_cast<std::int64_t>(nq)
                || to >= static_cast<std::int64_t>(nq))
                throw schema_error(origin + ": transition_sparse index out of range");
        }

        const auto& sj = detail::require(j, "stationary_solver", origin);
        m.stationary_diag.iterations = detail::require_uint(sj, "iterations", origin);
        m.stationary_diag.residual = detail::require_real(sj, "residual", origin);
        m.stationary_diag.damped = detail::require(sj, "damped", origin).get<bool>();

        const auto& prj = detail::require(j, "preprocess", origin);
        a.prep.lag = detail::require_uint(prj, "lag", origin);
        a.prep.rule = lag_rule_from_string(detail::require_string(prj, "lag_rule", origin));
        a.prep.lag_warning = detail::require(prj, "lag_warning", origin).get<bool>();
        if (a.prep.lag == 0) throw schema_error(origin + ": lag must be positive");

        a.config = detail::read_config(detail::require(j, "config", origin), origin + ".config");
        a.input_hash = detail::require_string(j, "input_hash", origin);
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(origin + ": " + e.what());
    }
    return a;
}

// ---------------------------------------------------------------------------
// reduced model artifact

struct reduced_artifact {
    reduced_model model;
    std::string source_model_hash;
    pipeline_config config;
    std::string input_hash;
};

inline std::string write_reduced_json(const reduced_artifact& a) {
    const auto& r = a.model;
    json_writer w;
    w.begin_object();
    w.field("alphabet_size", r.alphabet_size);
    w.field("source_depth", r.source_depth);
    w.field("num_states", r.num_states());
    w.real_matrix("emission", r.emission);
    w.real_matrix("transition", r.transition);
    w.real_array("stationary", r.stationary);
    w.key("cluster_map");
    w.begin_array();
    for (auto c : r.map.assignment) w.value(c);
    w.end_array();
    w.field("emission_weighting", to_string(r.emission_weighting));
    w.key("zero_mass_clusters");
    w.begin_array();
    for (auto c : r.zero_mass_clusters) w.value(c);
    w.end_array();
    w.field("source_model_hash", a.source_model_hash);
    write_config(w, a.config);
    w.field("input_hash", a.input_hash);
    w.end_object();
    return w.str();
}

inline reduced_artifact read_reduced_json(const std::string& text, const std::string& origin = "reduced") {
    const auto j = detail::parse_json(text, origin);
    reduced_artifact a;
    auto& r = a.model;
    try {
        r.alphabet_size = static_cast<std::uint32_t>(detail::require_uint(j, "alphabet_size", origin));
        r.source_depth = static_cast<std::uint32_t>(detail::require_uint(j, "source_depth", origin));
        const std::size_t n = detail::require_uint(j, "num_states", origin);
        if (n < 1) throw schema_error(origin + ": num_states must be positive");
        r.emission = detail::require_real_matrix(j, "emission", n, r.alphabet_size, origin);
        r.transition = detail::require_real_matrix(j, "transition", n, n, origin);
        r.stationary = detail::require_real_array(j, "stationary", origin);
        if (r.stationary.size() != n)
            throw schema_error(origin + ": stationary must have one entry per state");

        const auto& mj = detail::require(j, "cluster_map", origin);
        if (!mj.is_array()) throw schema_error(origin + ": cluster_map must be an array");
        r.map.num_clusters = n;
        r.map.assignment.reserve(mj.size());
        for (const auto& v : mj) {
            const auto c = v.get<std::int64_t>();
            if (c < 0 || c >= static_cast<std::int64_t>(n))
                throw schema_error(origin + ": cluster label out of range");
            r.map.assignment.push_back(static_cast<std::uint32_t>(c));
        }
        const std::size_t nq = state_count_for(r.alphabet_size, r.source_depth);
        if (r.map.assignment.size() != nq)
            throw schema_error(origin + ": cluster_map must cover all " + std::to_string(nq) + " states");

        r.emission_weighting = weighting_from_string(detail::require_string(j, "emission_weighting", origin));
        for (const auto& v : detail::require(j, "zero_mass_clusters", origin))
            r.zero_mass_clusters.push_back(v.get<std::uint32_t>());
        a.source_model_hash = detail::require_string(j, "source_model_hash", origin);
        a.config = detail::read_config(detail::require(j, "config", origin), origin + ".config");
        a.input_hash = detail::require_string(j, "input_hash", origin);
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(origin + ": " + e.what());
    }
    return a;
}

// ---------------------------------------------------------------------------
// dendrogram artifact

inline std::string write_dendrogram_json(const dendrogram& t, const pipeline_config& cfg,
                                         const std::string& input_hash) {
    json_writer w;
    w.begin_object();
    w.field("leaves", t.leaves);
    // Merge k creates cluster id leaves + k, so (a, b, height) is complete.
    w.key("merges");
    w.begin_array();
    for (const auto& m : t.merges) {
        w.begin_array();
        w.value(m.a);
        w.value(m.b);
        w.value(m.height);
        w.end_array();
    }
    w.end_array();
    write_config(w, cfg);
    w.field("input_hash", input_hash);
    w.end_object();
    return w.str();
}

inline dendrogram read_dendrogram_json(const std::string& text, const std::string& origin = "dendrogram") {
    const auto j = detail::parse_json(text, origin);
    dendrogram t;
    try {
        t.leaves = detail::require_uint(j, "leaves", origin);
        const auto& mj = detail::require(j, "merges", origin);
        if (!mj.is_array()) throw schema_error(origin + ": merges must be an array");
        std::uint32_t next_id = static_cast<std::uint32_t>(t.leaves);
        for (const auto& e : mj) {
            if (!e.is_array() || e.size() != 3)
                throw schema_error(origin + ": merges entries are [a,b,height] triplets");
            dendrogram::merge m;
            m.a = e[0].get<std::uint32_t>();
            m.b = e[1].get<std::uint32_t>();
            m.height = e[2].get<double>();
            m.id = next_id++;
            if (m.a >= m.id || m.b >= m.id || m.a == m.b)
                throw schema_error(origin + ": merge references an invalid cluster id");
            t.merges.push_back(m);
        }
        if (t.leaves == 0 || t.merges.size() + 1 != t.leaves)
            throw schema_error(origin + ": merge count must be leaves - 1");
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(origin + ": " + e.what());
    }
    return t;
}

// ---------------------------------------------------------------------------
// distortion report

inline std::string write_distortion_json(const distortion_report& rep, const pipeline_config& cfg,
                                         const std::string& model_hash,
                                         const std::string& reduced_hash) {
    json_writer w;
    w.begin_object();
    w.field("kappa", rep.kappa);
    w.field("bound", rep.bound);
    w.field("vacuous", rep.vacuous);
    w.field("sequence_length", rep.sequence_length);
    w.field("trials", rep.trials);
    w.field("coupling", "common-random-numbers");
    w.key("empirical");
    w.begin_object();
    w.field("mean", rep.empirical.mean);
    w.field("min", rep.empirical.min);
    w.field("q1", rep.empirical.q1);
    w.field("median", rep.empirical.median);
    w.field("q3", rep.empirical.q3);
    w.field("max", rep.empirical.max);
    w.end_object();
    w.real_array("distances", rep.distances);
    write_config(w, cfg);
    w.field("input_hash", model_hash);
    w.field("reduced_hash", reduced_hash);
    w.end_object();
    return w.str();
}

// ---------------------------------------------------------------------------
// fit diagnostics (write-only)

struct fit_diagnostics {
    std::size_t n_samples = 0;
    std::size_t n_obs = 0;
    preprocess_info prep;
    std::vector<double> acf;
    partition_spec partition;
    std::vector<std::size_t> occupancy;
    double occupancy_deviation = 0.0; ///< max |cell count - N/|A||
    depth_estimate depth;
    stationary_info stationary;
};

inline std::string write_diagnostics_json(const fit_diagnostics& d, const pipeline_config& cfg,
                                          const std::string& input_hash) {
    json_writer w;
    w.begin_object();
    w.field("n_samples", d.n_samples);
    w.field("n_obs", d.n_obs);
    w.key("lag");
    w.begin_object();
    w.field("value", d.prep.lag);
    w.field("rule", to_string(d.prep.rule));
    w.field("warning", d.prep.lag_warning);
    w.end_object();
    w.real_array("acf", d.acf);
    w.key("partition");
    w.begin_object();
    w.real_array("edges", d.partition.edges);
    w.field("alphabet_size", d.partition.alphabet_size);
    w.end_object();
    w.key("occupancy");
    w.begin_array();
    for (auto c : d.occupancy) w.value(c);
    w.end_array();
    w.field("occupancy_deviation", d.occupancy_deviation);
    w.key("depth");
    w.begin_object();
    w.field("value", d.depth.depth);
    w.field("capped", d.depth.capped);
    w.real_array("eigen_magnitudes", d.depth.magnitudes);
    w.field("repeated_eigenvalues", d.depth.repeated_eigenvalues);
    w.end_object();
    w.key("stationary_solver");
    w.begin_object();
    w.field("iterations", d.stationary.iterations);
    w.field("residual", d.stationary.residual);
    w.field("damped", d.stationary.damped);
    w.end_object();
    write_config(w, cfg);
    w.field("input_hash", input_hash);
    w.end_object();
    return w.str();
}

// ---------------------------------------------------------------------------
// CSV artifacts: config and provenance ride along as comment lines

inline std::string csv_preamble(const pipeline_config& cfg, const std::string& input_hash) {
    json_writer w;
    w.begin_object();
    write_config(w, cfg);
    w.end_object();
    std::string s = "# ";
    s += w.str();
    s += "\n# input_hash ";
    s += input_hash;
    s += "\n";
    return s;
}

inline std::string write_score_csv(const score_table& t, const pipeline_config& cfg,
                                   const std::string& input_hash) {
    std::string s = csv_preamble(cfg, input_hash);
    s += "# n_obs " + std::to_string(t.n_obs) + ", bound_length " + std::to_string(t.bound_length)
         + ", selected_aic " + std::to_string(t.selected_aic) + ", selected_bic "
         + std::to_string(t.selected_bic) + "\n";
    s += "N,L,K,AIC,BIC,kappa,bound\n";
    for (const auto& r : t.rows) {
        s += std::to_string(r.num_states) + "," + fmt17(r.log_likelihood) + ","
             + std::to_string(r.k) + "," + fmt17(r.aic) + "," + fmt17(r.bic) + ","
             + fmt17(r.kappa) + "," + fmt17(r.bound) + "\n";
    }
    return s;
}

inline std::string write_trend_csv(std::span<const anomaly_record> rows, const pipeline_config& cfg) {
    std::string s = csv_preamble(cfg, "(per-sample; see fit artifacts)");
    s += "sample_id,delta_m,h_m,depth,selected_n\n";
    for (const auto& r : rows) {
        s += r.sample_id + "," + fmt17(r.delta_m) + "," + fmt17(r.h_m) + ","
             + std::to_string(r.depth) + "," + std::to_string(r.selected_n) + "\n";
    }
    return s;
}

inline std::string write_features_csv(std::span<const std::string> ids,
                                      std::span<const std::vector<double>> features,
                                      std::size_t num_states, std::uint32_t alphabet,
                                      const pipeline_config& cfg) {
    std::string s = csv_preamble(cfg, "(per-sample; see fit artifacts)");
    s += "sample_id";
    for (std::size_t q = 0; q < num_states; ++q)
        for (std::uint32_t a = 0; a < alphabet; ++a)
            s += ",e" + std::to_string(q) + "_s" + std::to_string(a);
    s += "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        s += ids[i];
        for (double v : features[i]) s += "," + fmt17(v);
        s += "\n";
    }
    return s;
}

inline std::string write_simplex_csv(std::span<const std::string> ids,
                                     std::span<const dmatrix> emissions,
                                     std::uint32_t alphabet, const pipeline_config& cfg) {
    std::string s = csv_preamble(cfg, "(per-sample; see fit artifacts)");
    s += "sample_id,state";
    for (std::uint32_t a = 0; a < alphabet; ++a) s += ",p" + std::to_string(a);
    s += "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t q = 0; q < emissions[i].rows(); ++q) {
            s += ids[i] + "," + std::to_string(q);
            for (std::uint32_t a = 0; a < alphabet; ++a) s += "," + fmt17(emissions[i](q, a));
            s += "\n";
        }
    }
    return s;
}

inline std::string write_boxplot_csv(std::span<const std::pair<std::size_t, five_number_summary>> rows,
                                     const pipeline_config& cfg, const std::string& input_hash) {
    std::string s = csv_preamble(cfg, input_hash);
    s += "N,min,q1,median,q3,max,mean\n";
    for (const auto& [n, f] : rows) {
        s += std::to_string(n) + "," + fmt17(f.min) + "," + fmt17(f.q1) + "," + fmt17(f.median)
             + "," + fmt17(f.q3) + "," + fmt17(f.max) + "," + fmt17(f.mean) + "\n";
    }
    return s;
}

/// One line per trial, symbols space-separated; trivially diffable.
inline std::string write_sequences_text(std::span<const std::vector<std::uint8_t>> sequences) {
    std::string s;
    for (const auto& seq : sequences) {
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i) s += ' ';
            s += std::to_string(static_cast<unsigned>(seq[i]));
        }
        s += '\n';
    }
    return s;
}

} // namespace symdyn
