#pragma once

#include <stdexcept>
#include <string>

namespace symdyn {

/// Broad failure categories, used by the command-line tools to pick exit codes.
enum class errc {
    io,              ///< unreadable input, malformed CSV/binary payload
    degenerate_data, ///< input that admits no valid model (constant series, tied quantiles, ...)
    schema,          ///< serialized artifact missing keys or shape-inconsistent
    invalid_argument,///< caller error: bad sizes, out-of-range indices, bad options
    numeric          ///< iteration failed to converge or produced non-finite values
};

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    [[nodiscard]] errc code() const noexcept { return code_; }

private:
    errc code_;
};

struct io_error : error {
    explicit io_error(const std::string& what) : error(errc::io, what) {}
};

/// Constant input where a spread is required (normalization, quantile edges).
struct zero_variance_error : error {
    explicit zero_variance_error(const std::string& what) : error(errc::degenerate_data, what) {}
};

/// Quantile edges coincide; the requested alphabet cannot be realized.
struct degenerate_partition_error : error {
    explicit degenerate_partition_error(const std::string& what) : error(errc::degenerate_data, what) {}
};

/// Not enough symbols in any segment to form a single conditioning word.
struct sequence_too_short_error : error {
    explicit sequence_too_short_error(const std::string& what) : error(errc::degenerate_data, what) {}
};

struct lag_too_large_error : error {
    explicit lag_too_large_error(const std::string& what) : error(errc::invalid_argument, what) {}
};

/// Fixed-point iteration exhausted its budget without meeting tolerance.
struct no_convergence_error : error {
    explicit no_convergence_error(const std::string& what) : error(errc::numeric, what) {}
};

/// A computation that requires strictly positive probabilities saw a zero.
struct zero_probability_error : error {
    explicit zero_probability_error(const std::string& what) : error(errc::invalid_argument, what) {}
};

struct bad_cut_error : error {
    explicit bad_cut_error(const std::string& what) : error(errc::invalid_argument, what) {}
};

/// Sequence length too small for the distortion bound to be defined.
struct bad_length_error : error {
    explicit bad_length_error(const std::string& what) : error(errc::invalid_argument, what) {}
};

struct schema_error : error {
    explicit schema_error(const std::string& what) : error(errc::schema, what) {}
};

} // namespace symdyn
