// Command-line front end: fit / reduce / simulate / analyze / features.
//
// Exit codes: 0 success, 1 usage or internal failure, 2 unreadable or
// malformed input bytes, 3 degenerate data (constant series, tied quantile
// edges, too-short records), 4 artifact schema mismatch. Every failure prints
// exactly one machine-parsable stderr line: "symdyn: <kind>: <message>".

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <symdyn/symdyn.hpp>

namespace fs = std::filesystem;
using namespace symdyn;

namespace {

const char* kind_name(errc c) {
    switch (c) {
        case errc::io: return "io";
        case errc::degenerate_data: return "degenerate";
        case errc::schema: return "schema";
        case errc::invalid_argument: return "invalid";
        case errc::numeric: return "numeric";
    }
    return "internal";
}

int exit_code_for(errc c) {
    switch (c) {
        case errc::io: return 2;
        case errc::degenerate_data: return 3;
        case errc::schema: return 4;
        default: return 1;
    }
}

/// Shared flag set; string-valued enums are converted after parsing.
struct common_flags {
    pipeline_config cfg;
    std::string weighting_s = "stationary";
    std::string criterion_s = "bic";
    std::string format_s = "csv";
    std::string normalize_s = "before_downsample";
    std::string partition_s = "downsampled";
    std::string out_dir = ".";
};

void add_common(CLI::App* c, common_flags& f) {
    c->add_option("--alphabet", f.cfg.alphabet, "symbol alphabet size")->check(CLI::Range(2, 255));
    c->add_option("--epsilon", f.cfg.epsilon, "depth-selection spectral tolerance")
        ->check(CLI::Range(1e-12, 1.0));
    c->add_option("--dmax", f.cfg.max_depth, "depth cap")->check(CLI::Range(1, 24));
    c->add_option("--depth-floor", f.cfg.depth_floor, "smallest admissible depth")
        ->check(CLI::Range(1, 24));
    c->add_option("--prior", f.cfg.prior_weight, "Dirichlet smoothing weight per cell")
        ->check(CLI::NonNegativeNumber);
    c->add_option("--weighting", f.weighting_s, "row aggregation weights")
        ->check(CLI::IsMember({"stationary", "empirical"}));
    c->add_option("--criterion", f.criterion_s, "model-order selection rule")
        ->check(CLI::IsMember({"aic", "bic"}));
    c->add_option("--seed", f.cfg.seed, "base seed for all randomized steps");
    c->add_option("--column", f.cfg.column, "CSV column holding the signal");
    c->add_flag("--skip-header", f.cfg.skip_header, "ignore the first CSV line");
    c->add_option("--format", f.format_s, "input encoding")
        ->check(CLI::IsMember({"csv", "f32", "f64"}));
    c->add_option("--normalize", f.normalize_s, "normalize before or after downsampling")
        ->check(CLI::IsMember({"before_downsample", "after_downsample"}));
    c->add_option("--partition-from", f.partition_s, "samples the quantile edges come from")
        ->check(CLI::IsMember({"downsampled", "full_resolution"}));
    c->add_flag("--hm-one-sided", f.cfg.hm_one_sided,
                "one-sided divergence in the discrepancy statistic");
    c->add_option("--nmin", f.cfg.min_states, "smallest model order to score");
    c->add_option("--nmax", f.cfg.max_states, "largest model order to score (0: all)");
    c->add_option("--bound-n", f.cfg.bound_length, "sequence length for the reported bound");
    c->add_option("--out-dir", f.out_dir, "directory for output files");
}

void finalize(common_flags& f) {
    f.cfg.emission_weighting = weighting_from_string(f.weighting_s);
    f.cfg.selection = criterion_from_string(f.criterion_s);
    f.cfg.format = format_from_string(f.format_s);
    f.cfg.norm_order = normalize_order_from_string(f.normalize_s);
    f.cfg.partition_from = partition_source_from_string(f.partition_s);
    if (f.cfg.depth_floor > f.cfg.max_depth)
        throw error(errc::invalid_argument, "--depth-floor must not exceed --dmax");
}

/// Apply only the flags the user actually passed on top of a stored config,
/// so rerunning a later stage keeps the provenance of the earlier one.
void overlay_stage_flags(const CLI::App* c, const common_flags& f, pipeline_config& cfg) {
    if (c->count("--weighting")) cfg.emission_weighting = f.cfg.emission_weighting;
    if (c->count("--criterion")) cfg.selection = f.cfg.selection;
    if (c->count("--nmin")) cfg.min_states = f.cfg.min_states;
    if (c->count("--nmax")) cfg.max_states = f.cfg.max_states;
    if (c->count("--bound-n")) cfg.bound_length = f.cfg.bound_length;
    if (c->count("--hm-one-sided")) cfg.hm_one_sided = f.cfg.hm_one_sided;
    if (c->count("--seed")) cfg.seed = f.cfg.seed;
}

std::vector<fs::path> collect_inputs(const std::vector<std::string>& args) {
    std::vector<fs::path> files;
    for (const auto& a : args) {
        const fs::path p(a);
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            std::vector<fs::path> dir;
            for (const auto& entry : fs::directory_iterator(p, ec)) {
                if (!entry.is_regular_file()) continue;
                const std::string name = entry.path().filename().string();
                if (!name.empty() && name.front() == '.') continue;
                dir.push_back(entry.path());
            }
            if (ec) throw io_error("cannot list " + a + ": " + ec.message());
            std::sort(dir.begin(), dir.end());
            files.insert(files.end(), dir.begin(), dir.end());
        } else if (fs::is_regular_file(p, ec)) {
            files.push_back(p);
        } else {
            throw io_error("no such input: " + a);
        }
    }
    if (files.empty()) throw io_error("no input files");
    return files;
}

/// "bearing7.model" -> "bearing7": strip a trailing role suffix from an
/// artifact stem so derived outputs chain names cleanly.
std::string base_id(const fs::path& p, const std::string& role) {
    std::string stem = p.stem().string();
    const std::string suffix = "." + role;
    if (stem.size() > suffix.size() && stem.ends_with(suffix))
        stem.resize(stem.size() - suffix.size());
    return stem;
}

void emit(const fs::path& path, const std::string& content, const char* label) {
    write_file_atomic(path, content);
    std::printf("%s %s\n", label, path.string().c_str());
}

// ---------------------------------------------------------------------------

int cmd_fit(const fs::path& input, const pipeline_config& cfg, const fs::path& out_dir) {
    const std::string input_hash = hash_file(input);
    const raw_series raw = read_series(input, cfg);
    const fit_result r = fit_series(raw, cfg, input_hash);

    fs::create_directories(out_dir);
    const std::string stem = input.stem().string();
    emit(out_dir / (stem + ".model.json"), write_model_json(r.artifact), "model");
    emit(out_dir / (stem + ".diagnostics.json"),
         write_diagnostics_json(r.diagnostics, cfg, input_hash), "diagnostics");
    std::printf("depth %u capped %d lag %zu n_obs %zu\n", r.depth.depth, r.depth.capped ? 1 : 0,
                r.artifact.prep.lag, r.diagnostics.n_obs);
    return 0;
}

int cmd_reduce(const fs::path& model_path, const fs::path& input, std::size_t forced_states,
               const CLI::App* sub, const common_flags& f) {
    model_artifact art = read_model_json(read_file_bytes(model_path), model_path.filename().string());
    pipeline_config cfg = art.config;
    overlay_stage_flags(sub, f, cfg);

    const std::string input_hash = hash_file(input);
    const raw_series raw = read_series(input, cfg);
    const symbol_sequence seq = reencode_with(art, raw);

    const std::optional<std::size_t> force =
        forced_states > 0 ? std::optional<std::size_t>(forced_states) : std::nullopt;
    const reduce_result r = reduce_over_cuts(art.model, seq, cfg, force);

    const fs::path out_dir(f.out_dir);
    fs::create_directories(out_dir);
    const std::string stem = base_id(model_path, "model");
    emit(out_dir / (stem + ".scores.csv"), write_score_csv(r.table, cfg, input_hash), "scores");
    emit(out_dir / (stem + ".dendrogram.json"),
         write_dendrogram_json(r.tree, cfg, input_hash), "dendrogram");

    reduced_artifact red;
    red.model = r.reduced;
    red.source_model_hash = hash_file(model_path);
    red.config = cfg;
    red.input_hash = input_hash;
    emit(out_dir / (stem + ".reduced.json"), write_reduced_json(red), "reduced");

    if (force)
        std::printf("selected %zu forced\n", r.chosen_states);
    else
        std::printf("selected %zu by %s\n", r.chosen_states, to_string(cfg.selection));
    return 0;
}

int cmd_simulate(const fs::path& model_path, const fs::path& reduced_path, const CLI::App* sub,
                 const common_flags& f, std::size_t length, std::size_t trials) {
    const model_artifact art =
        read_model_json(read_file_bytes(model_path), model_path.filename().string());
    const reduced_artifact red =
        read_reduced_json(read_file_bytes(reduced_path), reduced_path.filename().string());

    const std::string model_hash = hash_file(model_path);
    if (red.source_model_hash != model_hash)
        throw schema_error("reduced model was built from a different model (hash mismatch)");

    pipeline_config cfg = red.config;
    overlay_stage_flags(sub, f, cfg);
    if (sub->count("--length")) cfg.sim_length = length;
    if (sub->count("--trials")) cfg.sim_trials = trials;

    std::vector<std::vector<std::uint8_t>> sequences;
    const distortion_report rep =
        monte_carlo_hamming(art.model, red.model, cfg.sim_length, cfg.sim_trials, cfg.seed,
                            &sequences);

    const fs::path out_dir(f.out_dir);
    fs::create_directories(out_dir);
    const std::string stem = base_id(reduced_path, "reduced");
    emit(out_dir / (stem + ".distortion.json"),
         write_distortion_json(rep, cfg, model_hash, hash_file(reduced_path)), "distortion");
    emit(out_dir / (stem + ".sequences.txt"), write_sequences_text(sequences), "sequences");
    std::printf("kappa %s bound %s%s mean_distance %s\n", fmt17(rep.kappa).c_str(),
                fmt17(rep.bound).c_str(), rep.vacuous ? " (vacuous)" : "",
                fmt17(rep.empirical.mean).c_str());
    return 0;
}

int cmd_analyze(const std::vector<std::string>& inputs, const pipeline_config& cfg,
                const fs::path& out_dir) {
    const std::vector<fs::path> files = collect_inputs(inputs);
    const analyze_result res = analyze_batch(files, cfg);
    for (const auto& fail : res.failures)
        std::fprintf(stderr, "symdyn: skipped %s: %s\n", fail.sample_id.c_str(),
                     fail.reason.c_str());
    if (res.rows.empty()) throw error(errc::degenerate_data, "every record in the batch failed");

    fs::create_directories(out_dir);
    emit(out_dir / "trend.csv", write_trend_csv(res.rows, cfg), "trend");
    std::printf("analyzed %zu of %zu records\n", res.rows.size(), files.size());
    return 0;
}

int cmd_features(const std::vector<std::string>& inputs, const pipeline_config& cfg,
                 std::size_t num_states, const fs::path& out_dir) {
    const std::vector<fs::path> files = collect_inputs(inputs);
    const features_result res = features_batch(files, cfg, num_states);
    for (const auto& fail : res.failures)
        std::fprintf(stderr, "symdyn: skipped %s: %s\n", fail.sample_id.c_str(),
                     fail.reason.c_str());
    if (res.ids.empty()) throw error(errc::degenerate_data, "every record in the batch failed");

    fs::create_directories(out_dir);
    emit(out_dir / "features.csv",
         write_features_csv(res.ids, res.rows, res.num_states, res.alphabet, cfg), "features");
    emit(out_dir / "simplex.csv", write_simplex_csv(res.ids, res.emissions, res.alphabet, cfg),
         "simplex");
    std::printf("exported %zu of %zu records\n", res.ids.size(), files.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"reduced-order Markov modeling of numeric time series via symbolic dynamics"};
    app.require_subcommand(1);

    common_flags ff, fr, fs_, fa, fe;
    std::string fit_input, reduce_model, reduce_input, sim_model, sim_reduced;
    std::vector<std::string> analyze_inputs, feature_inputs;
    std::size_t reduce_states = 0, sim_length = 1000, sim_trials = 100, feature_states = 0;

    CLI::App* fit = app.add_subcommand("fit", "fit a model to one numeric record");
    fit->add_option("input", fit_input, "series file")->required();
    add_common(fit, ff);

    CLI::App* reduce = app.add_subcommand("reduce", "cluster states and pick a reduced order");
    reduce->add_option("model", reduce_model, "model JSON from fit")
        ->required();
    reduce->add_option("input", reduce_input, "series file the model was fitted on")
        ->required();
    reduce->add_option("--states", reduce_states, "force this model order instead of selecting");
    add_common(reduce, fr);

    CLI::App* simulate = app.add_subcommand("simulate", "coupled Monte-Carlo distortion estimate");
    simulate->add_option("model", sim_model, "model JSON from fit")
        ->required();
    simulate->add_option("reduced", sim_reduced, "reduced JSON from reduce")
        ->required();
    simulate->add_option("--length", sim_length, "symbols per trial");
    simulate->add_option("--trials", sim_trials, "number of coupled runs");
    add_common(simulate, fs_);

    CLI::App* analyze = app.add_subcommand("analyze", "batch metrics trend over many records");
    analyze->add_option("inputs", analyze_inputs, "series files or directories")
        ->required()
        ->expected(-1);
    add_common(analyze, fa);

    CLI::App* features = app.add_subcommand("features", "batch feature-vector export");
    features->add_option("inputs", feature_inputs, "series files or directories")
        ->required()
        ->expected(-1);
    features->add_option("--states", feature_states, "reduced order of every feature vector")
        ->required()
        ->check(CLI::PositiveNumber);
    add_common(features, fe);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "symdyn: invalid: %s\n", e.what());
        return 1;
    }

    try {
        if (*fit) {
            finalize(ff);
            return cmd_fit(fit_input, ff.cfg, ff.out_dir);
        }
        if (*reduce) {
            finalize(fr);
            return cmd_reduce(reduce_model, reduce_input, reduce_states, reduce, fr);
        }
        if (*simulate) {
            finalize(fs_);
            return cmd_simulate(sim_model, sim_reduced, simulate, fs_, sim_length, sim_trials);
        }
        if (*analyze) {
            finalize(fa);
            return cmd_analyze(analyze_inputs, fa.cfg, fa.out_dir);
        }
        if (*features) {
            finalize(fe);
            return cmd_features(feature_inputs, fe.cfg, feature_states, fe.out_dir);
        }
    } catch (const error& e) {
        std::fprintf(stderr, "symdyn: %s: %s\n", kind_name(e.code()), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "symdyn: internal: %s\n", e.what());
        return 1;
    }
    return 1;
}
