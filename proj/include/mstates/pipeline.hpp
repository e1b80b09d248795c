#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "mstates/cluster.hpp"
#include "mstates/corrmat.hpp"
#include "mstates/csvio.hpp"
#include "mstates/embed.hpp"
#include "mstates/error.hpp"
#include "mstates/panel.hpp"
#include "mstates/parallel.hpp"
#include "mstates/similarity.hpp"
#include "mstates/spectra.hpp"
#include "mstates/states.hpp"

namespace mstates {

inline constexpr const char* kVersion = "0.1.0";

// =============================================================================
// End-to-end orchestration: price CSV -> correlation frames -> similarity ->
// MDS -> ensemble k-means -> market states -> exports. Every default equals
// the reference configuration, so a bare run needs only an input path.
// Re-running with identical input and config is byte-identical, at any
// worker-pool size.
// =============================================================================

struct PipelineConfig {
    std::string input_path;
    std::string sectors_path;
    std::string output_dir = "out";
    int epoch_days = 20;        // M
    int shift_days = 10;        // delta tau
    double epsilon = 0.6;
    int mds_dim = 2;
    int k_max = 8;
    int ensemble_runs = 500;
    std::uint64_t master_seed = 42;
    MeanMode mean_mode = MeanMode::AllElements;
    IntraMode intra_mode = IntraMode::PerClusterMean;
    bool kmeans_plusplus = false;
    double eta = 0.05;          // optimal-k tie tolerance, relative to the std range
    std::size_t occupancy_window = 10;
    unsigned workers = 0;       // 0 = hardware concurrency
    bool use_cache = true;
};

inline void validate_config(const PipelineConfig& cfg) {
    if (cfg.input_path.empty()) throw ConfigError("input path is required");
    if (cfg.epoch_days < 2) throw ConfigError("epoch length must be >= 2 days");
    if (cfg.shift_days < 1) throw ConfigError("epoch shift must be >= 1 day");
    if (cfg.epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
    if (cfg.mds_dim != 2 && cfg.mds_dim != 3) throw ConfigError("MDS dimension must be 2 or 3");
    if (cfg.k_max < 2) throw ConfigError("k range must reach at least 2");
    if (cfg.ensemble_runs < 2) throw ConfigError("ensemble needs at least 2 runs");
    if (cfg.eta < 0.0) throw ConfigError("eta must be >= 0");
    if (cfg.occupancy_window < 1) throw ConfigError("occupancy window must be >= 1");
}

enum class Stage { Frames, Similarity, Embed, Cluster, States, All };

namespace detail {

template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (ConfigError& e) {
        throw ConfigError("[stage " + name + "] " + e.what());
    } catch (ParseError& e) {
        throw ParseError("[stage " + name + "] " + e.what());
    } catch (ValidationError& e) {
        throw ValidationError("[stage " + name + "] " + e.what());
    } catch (NumericalError& e) {
        throw NumericalError("[stage " + name + "] " + e.what());
    }
}

inline std::string state_name(int zero_based) { return "S" + std::to_string(zero_based + 1); }

} // namespace detail

struct PipelineData {
    PricePanel panel;
    ReturnPanel returns;
    std::vector<EpochWindow> windows;
    std::vector<CorrelationFrame> raw_frames;
    std::vector<CorrelationFrame> frames;       // noise-suppressed branch
    std::vector<FrameDescriptor> descriptors;   // mu/gini/lambda_max on the raw branch
    std::vector<Spectrum> raw_spectra;
    std::vector<Spectrum> mapped_spectra;       // empty when epsilon == 0
    SimilarityMatrix sim;
    std::string cache_key;
    bool cache_hit = false;
    Embedding embedding;
    std::vector<EnsembleStats> ensemble;
    OptimalKDecision decision;
    KMeansResult final_clustering;
    int final_run_index = -1;
    StateModel states;
    TransitionMatrix transitions;
    StationaryDistribution stationary;
    Eigen::VectorXd empirical;
    std::vector<Eigen::VectorXd> occupancy;
    std::vector<PrecursorEntry> precursors;
};

// -----------------------------------------------------------------------------
// Stages
// -----------------------------------------------------------------------------

inline void stage_load(const PipelineConfig& cfg, PipelineData& data) {
    detail::run_stage("panel", [&] {
        data.panel = load_price_panel(cfg.input_path, cfg.sectors_path.empty()
                                                          ? std::filesystem::path()
                                                          : std::filesystem::path(cfg.sectors_path));
        data.returns = log_returns(data.panel);
        data.windows = epoch_windows(data.returns, static_cast<std::size_t>(cfg.epoch_days),
                                     static_cast<std::size_t>(cfg.shift_days));
    });
}

inline void stage_frames(const PipelineConfig& cfg, PipelineData& data) {
    detail::run_stage("corrmat", [&] {
        const std::size_t n = data.windows.size();
        data.raw_frames.resize(n);
        data.frames.resize(n);
        data.descriptors.resize(n);
        data.raw_spectra.resize(n);
        if (cfg.epsilon > 0.0) data.mapped_spectra.resize(n);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            data.raw_frames[i] = pearson_frame(data.returns, data.windows[i]);
            data.frames[i] = power_map(data.raw_frames[i], cfg.epsilon);
            data.descriptors[i] = describe_frame(data.raw_frames[i], cfg.mean_mode);
            data.raw_spectra[i] = spectrum(data.raw_frames[i]);
            data.descriptors[i].lambda_max = data.raw_spectra[i].lambda_max;
            if (cfg.epsilon > 0.0) data.mapped_spectra[i] = spectrum(data.frames[i]);
        });
    });
}

inline std::string similarity_cache_key(const PipelineConfig& cfg) {
    std::uint64_t h = fnv1a(read_file_bytes(cfg.input_path));
    h = fnv1a("M=" + std::to_string(cfg.epoch_days), h);
    h = fnv1a("shift=" + std::to_string(cfg.shift_days), h);
    h = fnv1a("eps=" + fmt_double_exact(cfg.epsilon), h);
    return to_hex(h);
}

inline void stage_similarity(const PipelineConfig& cfg, PipelineData& data) {
    detail::run_stage("similarity", [&] {
        const auto bin_path = std::filesystem::path(cfg.output_dir) / "similarity.bin";
        const auto key_path = std::filesystem::path(cfg.output_dir) / "similarity.key";
        data.cache_key = similarity_cache_key(cfg);
        data.cache_hit = false;
        if (cfg.use_cache && std::filesystem::exists(bin_path) &&
            std::filesystem::exists(key_path) &&
            trim(read_file_bytes(key_path)) == data.cache_key) {
            auto cached = load_similarity_cache(bin_path);
            if (cached && cached->size() == static_cast<Eigen::Index>(data.frames.size()) &&
                cached->epsilon == cfg.epsilon) {
                data.sim = std::move(*cached);
                data.sim.end_dates.clear();
                for (const auto& f : data.frames) data.sim.end_dates.push_back(f.epoch.end_date);
                data.cache_hit = true;
                return;
            }
        }
        data.sim = similarity_matrix(data.frames, cfg.workers);
    });
}

inline void stage_embed(const PipelineConfig& cfg, PipelineData& data) {
    detail::run_stage("embed", [&] { data.embedding = classical_mds(data.sim.matrix, cfg.mds_dim); });
}

inline KMeansOptions kmeans_options(const PipelineConfig& cfg) {
    KMeansOptions opt;
    opt.init = cfg.kmeans_plusplus ? KMeansInit::PlusPlus : KMeansInit::Forgy;
    opt.intra = cfg.intra_mode;
    return opt;
}

inline void stage_cluster(const PipelineConfig& cfg, PipelineData& data) {
    detail::run_stage("cluster", [&] {
        const KMeansOptions opt = kmeans_options(cfg);
        data.ensemble.clear();
        for (int k = 1; k <= cfg.k_max; ++k)
            data.ensemble.push_back(ensemble_stats(data.embedding.coordinates, k,
                                                   cfg.ensemble_runs, cfg.master_seed,
                                                   cfg.workers, opt));
        data.decision = optimal_k(data.ensemble, cfg.eta);

        // Final clustering: the ensemble run with the lowest objective at the
        // selected k (ties to the earliest run), replayed from its seed.
        const auto& chosen = data.ensemble[static_cast<std::size_t>(data.decision.selected_k - 1)];
        std::size_t best_run = 0;
        for (std::size_t r = 1; r < chosen.per_run_wcss.size(); ++r)
            if (chosen.per_run_wcss[r] < chosen.per_run_wcss[best_run]) best_run = r;
        data.final_run_index = static_cast<int>(best_run);
        data.final_clustering = kmeans(data.embedding.coordinates, data.decision.selected_k,
                                       chosen.per_run_seed[best_run], opt);
    });
}

inline void stage_states(const PipelineConfig& cfg, PipelineData& data) {
    detail::run_stage("states", [&] {
        // State means and representative matrices read the raw branch so they
        // live on the same scale as the descriptor time series.
        data.states = order_states(data.final_clustering.labels, data.raw_frames, cfg.mean_mode);
        data.transitions = transition_matrix(data.states.state_of_epoch, data.states.k);
        data.stationary = stationary_distribution(data.transitions.W);
        data.empirical = empirical_frequencies(data.states.state_of_epoch, data.states.k);
        data.occupancy =
            occupancy_windows(data.states.state_of_epoch, data.states.k, cfg.occupancy_window);
        data.precursors = precursor_report(data.transitions);
    });
}

// -----------------------------------------------------------------------------
// Exports
// -----------------------------------------------------------------------------

namespace detail {

inline void export_descriptors(const std::filesystem::path& dir, const PipelineData& data) {
    std::string out = "end_date,mu,gini,lambda_max\n";
    for (const auto& d : data.descriptors) {
        out += d.end_date + "," + fmt_double(d.mean_correlation) + ",";
        if (d.gini) out += fmt_double(*d.gini);
        out += "," + fmt_double(d.lambda_max) + "\n";
    }
    write_text_file(dir / "descriptors.csv", out);
}

inline void export_spectra(const std::filesystem::path& dir, const PipelineConfig& cfg,
                           const PipelineData& data) {
    std::string out = "end_date,epsilon,index,eigenvalue\n";
    for (std::size_t i = 0; i < data.raw_spectra.size(); ++i) {
        const std::string& date = data.windows[i].end_date;
        const auto& raw = data.raw_spectra[i].eigenvalues;
        for (Eigen::Index j = 0; j < raw.size(); ++j)
            out += date + ",0," + std::to_string(j) + "," + fmt_double(raw(j)) + "\n";
        if (!data.mapped_spectra.empty()) {
            const auto& mapped = data.mapped_spectra[i].eigenvalues;
            for (Eigen::Index j = 0; j < mapped.size(); ++j)
                out += date + "," + fmt_double(cfg.epsilon) + "," + std::to_string(j) + "," +
                       fmt_double(mapped(j)) + "\n";
        }
    }
    write_text_file(dir / "spectra.csv", out);
}

inline void export_similarity(const std::filesystem::path& dir, const PipelineData& data,
                              const std::string& cache_key) {
    std::string out;
    for (std::size_t i = 0; i < data.sim.end_dates.size(); ++i)
        out += (i ? "," : "") + data.sim.end_dates[i];
    out += "\n";
    for (Eigen::Index i = 0; i < data.sim.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.sim.matrix.cols(); ++j)
            out += (j ? "," : "") + fmt_double(data.sim.matrix(i, j));
        out += "\n";
    }
    write_text_file(dir / "similarity.csv", out);
    save_similarity_cache(dir / "similarity.bin", data.sim);
    write_text_file(dir / "similarity.key", cache_key + "\n");
}

inline void export_embedding(const std::filesystem::path& dir, const PipelineData& data) {
    std::string out = data.embedding.dim == 3 ? "end_date,x,y,z\n" : "end_date,x,y\n";
    for (Eigen::Index i = 0; i < data.embedding.coordinates.rows(); ++i) {
        out += data.sim.end_dates[static_cast<std::size_t>(i)];
        for (int c = 0; c < data.embedding.dim; ++c)
            out += "," + fmt_double(data.embedding.coordinates(i, c));
        out += "\n";
    }
    write_text_file(dir / "embedding.csv", out);
}

inline void export_cluster(const std::filesystem::path& dir, const PipelineData& data,
                           const std::string& stats_name, const std::string& runs_name) {
    std::string stats = "k,mean_intra_mean,mean_intra_std\n";
    for (const auto& s : data.ensemble)
        stats += std::to_string(s.k) + "," + fmt_double(s.mean_of_mean_intra) + "," +
                 fmt_double(s.std_of_mean_intra) + "\n";
    write_text_file(dir / stats_name, stats);

    std::string runs = "k,run,seed,mean_intra\n";
    for (const auto& s : data.ensemble)
        for (int r = 0; r < s.runs; ++r)
            runs += std::to_string(s.k) + "," + std::to_string(r) + "," +
                    std::to_string(s.per_run_seed[static_cast<std::size_t>(r)]) + "," +
                    fmt_double(s.per_run_mean_intra[static_cast<std::size_t>(r)]) + "\n";
    write_text_file(dir / runs_name, runs);
}

inline void export_states(const std::filesystem::path& dir, const PipelineConfig& cfg,
                          const PipelineData& data) {
    std::string seq = "end_date,state\n";
    for (std::size_t e = 0; e < data.states.state_of_epoch.size(); ++e)
        seq += data.windows[e].end_date + "," +
               std::to_string(data.states.state_of_epoch[e] + 1) + "\n";
    write_text_file(dir / "states.csv", seq);

    // Rows are the first state of each consecutive pair.
    std::string tm = "state";
    for (int j = 0; j < data.states.k; ++j) tm += "," + state_name(j);
    tm += "\n";
    for (int i = 0; i < data.states.k; ++i) {
        tm += state_name(i);
        for (int j = 0; j < data.states.k; ++j) tm += "," + fmt_double(data.transitions.W(i, j));
        tm += "\n";
    }
    write_text_file(dir / "transition_matrix.csv", tm);

    nlohmann::json stationary = nlohmann::json::array();
    for (int s = 0; s < data.states.k; ++s)
        stationary.push_back({{"state", state_name(s)},
                              {"stationary", data.stationary.p0(s)},
                              {"empirical", data.empirical(s)}});
    write_text_file(dir / "stationary.json", stationary.dump(2) + "\n");

    std::string occ = "window_start,window_end";
    for (int s = 0; s < data.states.k; ++s) occ += "," + state_name(s);
    occ += "\n";
    for (std::size_t w = 0; w < data.occupancy.size(); ++w) {
        const std::size_t start = w * cfg.occupancy_window;
        const std::size_t end =
            std::min(data.states.state_of_epoch.size(), start + cfg.occupancy_window) - 1;
        occ += data.windows[start].end_date + "," + data.windows[end].end_date;
        for (int s = 0; s < data.states.k; ++s) occ += "," + fmt_double(data.occupancy[w](s));
        occ += "\n";
    }
    write_text_file(dir / "occupancy.csv", occ);

    std::string prec = "from_state,to_state,conditional,joint\n";
    for (const auto& p : data.precursors)
        prec += state_name(p.from_state) + "," + state_name(data.states.k - 1) + "," +
                fmt_double(p.conditional) + "," + fmt_double(p.joint) + "\n";
    write_text_file(dir / "precursors.csv", prec);
}

// Result-affecting parameters only: execution knobs (worker count, cache
// toggle, output location) stay out so equivalent runs produce identical
// manifests.
inline nlohmann::json config_json(const PipelineConfig& cfg) {
    return {{"input", cfg.input_path},
            {"sectors", cfg.sectors_path},
            {"epoch_days", cfg.epoch_days},
            {"shift_days", cfg.shift_days},
            {"epsilon", cfg.epsilon},
            {"mds_dim", cfg.mds_dim},
            {"k_max", cfg.k_max},
            {"ensemble_runs", cfg.ensemble_runs},
            {"master_seed", cfg.master_seed},
            {"mean_mode", cfg.mean_mode == MeanMode::AllElements ? "all" : "offdiag"},
            {"intra_mode",
             cfg.intra_mode == IntraMode::PerClusterMean ? "percluster" : "pooled"},
            {"kmeans_plusplus", cfg.kmeans_plusplus},
            {"eta", cfg.eta},
            {"occupancy_window", cfg.occupancy_window}};
}

} // namespace detail

// Runs stages up to and including `stage`, writing each stage's exports.
// Returns the manifest; `run` (Stage::All) also writes it to manifest.json.
inline nlohmann::json run_pipeline(const PipelineConfig& cfg, Stage stage = Stage::All) {
    validate_config(cfg);
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    PipelineData data;
    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["mode"] = "run";
    manifest["config"] = detail::config_json(cfg);
    std::vector<std::string> outputs;

    stage_load(cfg, data);
    manifest["data"] = {{"n_stocks", data.panel.n_stocks()},
                        {"price_days", data.panel.n_days()},
                        {"return_days", data.returns.n_days()},
                        {"n_frames", data.windows.size()}};

    stage_frames(cfg, data);
    detail::export_descriptors(dir, data);
    detail::export_spectra(dir, cfg, data);
    outputs.push_back("descriptors.csv");
    outputs.push_back("spectra.csv");

    if (stage >= Stage::Similarity) {
        stage_similarity(cfg, data);
        detail::export_similarity(dir, data, data.cache_key);
        outputs.insert(outputs.end(), {"similarity.csv", "similarity.bin", "similarity.key"});
        manifest["similarity_cache"] = {{"file", "similarity.bin"},
                                        {"key", data.cache_key},
                                        {"hit", data.cache_hit}};
    }
    if (stage >= Stage::Embed) {
        stage_embed(cfg, data);
        detail::export_embedding(dir, data);
        outputs.push_back("embedding.csv");
        std::vector<double> evals(data.embedding.eigenvalues_used.data(),
                                  data.embedding.eigenvalues_used.data() +
                                      data.embedding.eigenvalues_used.size());
        manifest["embedding"] = {{"eigenvalues_used", evals},
                                 {"stress", data.embedding.stress},
                                 {"negative_eigenvalue_mass",
                                  data.embedding.negative_eigenvalue_mass}};
    }
    if (stage >= Stage::Cluster) {
        stage_cluster(cfg, data);
        detail::export_cluster(dir, data, "cluster_stats.csv", "cluster_runs.csv");
        outputs.insert(outputs.end(), {"cluster_stats.csv", "cluster_runs.csv"});
        nlohmann::json trace = nlohmann::json::array();
        for (const auto& row : data.decision.trace)
            trace.push_back({{"k", row.k},
                             {"mean", row.mean},
                             {"std", row.std},
                             {"admissible", row.admissible},
                             {"within_tolerance", row.within_tolerance}});
        manifest["selection"] = {{"selected_k", data.decision.selected_k},
                                 {"eta", data.decision.eta},
                                 {"min_std", data.decision.min_std},
                                 {"max_std", data.decision.max_std},
                                 {"threshold", data.decision.threshold},
                                 {"trace", trace}};
        manifest["final_clustering"] = {{"seed", data.final_clustering.seed},
                                        {"run_index", data.final_run_index},
                                        {"wcss", data.final_clustering.wcss},
                                        {"iterations", data.final_clustering.iterations}};
    }
    if (stage >= Stage::States) {
        stage_states(cfg, data);
        detail::export_states(dir, cfg, data);
        outputs.insert(outputs.end(), {"states.csv", "transition_matrix.csv", "stationary.json",
                                       "occupancy.csv", "precursors.csv"});
        nlohmann::json ties = nlohmann::json::array();
        for (const auto& [a, b] : data.states.ties)
            ties.push_back({detail::state_name(a), detail::state_name(b)});
        manifest["states"] = {{"k", data.states.k},
                              {"state_mean_corr", data.states.state_mean_corr},
                              {"mean_corr_ties", ties},
                              {"zero_transition_rows", data.transitions.zero_rows}};
        std::vector<double> p0(data.stationary.p0.data(),
                               data.stationary.p0.data() + data.stationary.p0.size());
        std::vector<double> emp(data.empirical.data(),
                                data.empirical.data() + data.empirical.size());
        manifest["stationary"] = {{"p0", p0},
                                  {"empirical", emp},
                                  {"residual", data.stationary.residual}};
    }

    manifest["outputs"] = outputs;
    if (stage == Stage::All)
        write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

// Repeats power-map -> similarity -> MDS -> ensemble for each epsilon and
// emits one k/mean/std table per value, plus a sweep manifest.
inline nlohmann::json sweep_epsilon(const PipelineConfig& cfg,
                                    const std::vector<double>& eps_list) {
    validate_config(cfg);
    if (eps_list.empty()) throw ConfigError("epsilon sweep needs at least one value");
    for (const double e : eps_list)
        if (e < 0.0) throw ConfigError("epsilon must be >= 0");
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    PipelineData data;
    stage_load(cfg, data);
    detail::run_stage("corrmat", [&] {
        const std::size_t n = data.windows.size();
        data.raw_frames.resize(n);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            data.raw_frames[i] = pearson_frame(data.returns, data.windows[i]);
        });
    });

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["mode"] = "sweep";
    manifest["config"] = detail::config_json(cfg);
    manifest["epsilon_list"] = eps_list;
    nlohmann::json per_eps = nlohmann::json::array();
    std::vector<std::string> outputs;

    const KMeansOptions opt = kmeans_options(cfg);
    for (const double eps : eps_list) {
        PipelineData branch;
        branch.windows = data.windows;
        branch.frames.resize(data.raw_frames.size());
        parallel_for(data.raw_frames.size(), cfg.workers,
                     [&](std::size_t i) { branch.frames[i] = power_map(data.raw_frames[i], eps); });
        branch.sim = similarity_matrix(branch.frames, cfg.workers);
        branch.embedding = classical_mds(branch.sim.matrix, cfg.mds_dim);
        for (int k = 1; k <= cfg.k_max; ++k)
            branch.ensemble.push_back(ensemble_stats(branch.embedding.coordinates, k,
                                                     cfg.ensemble_runs, cfg.master_seed,
                                                     cfg.workers, opt));
        branch.decision = optimal_k(branch.ensemble, cfg.eta);

        const std::string stats_name = "cluster_stats_eps" + fmt_double(eps) + ".csv";
        const std::string runs_name = "cluster_runs_eps" + fmt_double(eps) + ".csv";
        detail::export_cluster(dir, branch, stats_name, runs_name);
        outputs.push_back(stats_name);
        outputs.push_back(runs_name);
        per_eps.push_back({{"epsilon", eps},
                           {"selected_k", branch.decision.selected_k},
                           {"min_std", branch.decision.min_std},
                           {"threshold", branch.decision.threshold},
                           {"stats_file", stats_name}});
    }
    manifest["per_epsilon"] = per_eps;
    manifest["outputs"] = outputs;
    write_text_file(dir / "sweep_manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

} // namespace mstates
