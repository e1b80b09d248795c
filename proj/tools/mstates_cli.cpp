// Command-line front end for the market-state pipeline.
//
// Subcommands: run, frames, similarity, embed, cluster, states, sweep, synth.
// Options may come from a flat key=value config file (--config) with
// command-line flags taking precedence. Exit codes: 0 success, 2 config
// error, 3 data validation error, 4 numerical or internal failure.

#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "mstates/mstates.hpp"

namespace {

struct CliOptions {
    mstates::PipelineConfig pipeline;
    std::string mean_mode = "all";
    std::string intra_mode = "percluster";
    std::vector<double> sweep_eps = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};

    mstates::SynthConfig synth;
    std::string synth_output = "synth_prices.csv";
};

void apply_modes(CliOptions& opts) {
    opts.pipeline.mean_mode = opts.mean_mode == "offdiag" ? mstates::MeanMode::OffDiagonal
                                                          : mstates::MeanMode::AllElements;
    opts.pipeline.intra_mode = opts.intra_mode == "pooled" ? mstates::IntraMode::PooledPoints
                                                           : mstates::IntraMode::PerClusterMean;
}

void add_pipeline_options(CLI::App& app, CliOptions& opts) {
    auto& cfg = opts.pipeline;
    app.add_option("-i,--input", cfg.input_path, "Price panel CSV (date,TICKER,...)");
    app.add_option("--sectors", cfg.sectors_path, "Optional ticker,sector sidecar CSV");
    app.add_option("-o,--output-dir", cfg.output_dir, "Output directory")
        ->capture_default_str();
    app.add_option("--epoch-days", cfg.epoch_days, "Epoch length M in return days")
        ->capture_default_str();
    app.add_option("--shift-days", cfg.shift_days, "Epoch shift in return days")
        ->capture_default_str();
    app.add_option("--epsilon", cfg.epsilon, "Noise-suppression exponent")
        ->capture_default_str();
    app.add_option("--mds-dim", cfg.mds_dim, "MDS target dimension (2 or 3)")
        ->capture_default_str();
    app.add_option("--k-max", cfg.k_max, "Largest cluster count examined")
        ->capture_default_str();
    app.add_option("--ensemble-runs", cfg.ensemble_runs, "k-means initializations per k")
        ->capture_default_str();
    app.add_option("--seed", cfg.master_seed, "Master RNG seed")->capture_default_str();
    app.add_option("--mean-mode", opts.mean_mode, "Mean correlation over `all` or `offdiag` entries")
        ->check(CLI::IsMember({"all", "offdiag"}))
        ->capture_default_str();
    app.add_option("--intra-mode", opts.intra_mode,
                   "Intra-cluster distance: `percluster` or `pooled`")
        ->check(CLI::IsMember({"percluster", "pooled"}))
        ->capture_default_str();
    app.add_flag("--kmeanspp", cfg.kmeans_plusplus,
                 "Use k-means++ seeding (suppresses the ensemble variance signal)");
    app.add_option("--eta", cfg.eta, "Optimal-k tolerance, relative to the std range")
        ->capture_default_str();
    app.add_option("--occupancy-window", cfg.occupancy_window,
                   "Epochs per occupancy window")
        ->capture_default_str();
    app.add_option("-j,--workers", cfg.workers, "Worker threads (0 = hardware)")
        ->capture_default_str();
    app.add_flag("!--no-cache", cfg.use_cache, "Disable the similarity binary cache");
}

int dispatch(const CLI::App& app, CliOptions& opts) {
    apply_modes(opts);
    using mstates::Stage;
    if (app.got_subcommand("synth")) {
        mstates::write_price_csv(opts.synth_output, mstates::synth_panel(opts.synth));
        std::printf("wrote %s (%lld stocks, %lld days)\n", opts.synth_output.c_str(),
                    static_cast<long long>(opts.synth.n_stocks),
                    static_cast<long long>(opts.synth.n_days));
        return 0;
    }
    if (app.got_subcommand("sweep")) {
        const auto manifest = mstates::sweep_epsilon(opts.pipeline, opts.sweep_eps);
        std::printf("sweep complete: %zu epsilon value(s), outputs in %s\n",
                    opts.sweep_eps.size(), opts.pipeline.output_dir.c_str());
        for (const auto& entry : manifest["per_epsilon"])
            std::printf("  epsilon=%g selected_k=%d\n", entry["epsilon"].get<double>(),
                        entry["selected_k"].get<int>());
        return 0;
    }

    Stage stage = Stage::All;
    if (app.got_subcommand("frames")) stage = Stage::Frames;
    else if (app.got_subcommand("similarity")) stage = Stage::Similarity;
    else if (app.got_subcommand("embed")) stage = Stage::Embed;
    else if (app.got_subcommand("cluster")) stage = Stage::Cluster;
    else if (app.got_subcommand("states")) stage = Stage::States;

    const auto manifest = mstates::run_pipeline(opts.pipeline, stage);
    std::printf("n_frames=%lld\n", manifest["data"]["n_frames"].get<long long>());
    if (manifest.contains("selection"))
        std::printf("selected_k=%d\n", manifest["selection"]["selected_k"].get<int>());
    if (manifest.contains("stationary")) {
        std::printf("stationary:");
        for (const double p : manifest["stationary"]["p0"].get<std::vector<double>>())
            std::printf(" %.3f", p);
        std::printf("\n");
    }
    std::printf("outputs in %s\n", opts.pipeline.output_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Market-state detection from rolling correlation structures"};
    app.set_config("--config", "", "Flat key=value config file; flags override it");
    app.fallthrough();
    app.require_subcommand(1);

    CliOptions opts;
    add_pipeline_options(app, opts);

    app.add_subcommand("run", "Full pipeline: frames through states, plus manifest");
    app.add_subcommand("frames", "Correlation frames, descriptors and spectra only");
    app.add_subcommand("similarity", "Stages through the inter-frame similarity matrix");
    app.add_subcommand("embed", "Stages through the MDS embedding");
    app.add_subcommand("cluster", "Stages through ensemble k-means and optimal k");
    app.add_subcommand("states", "Stages through the state sequence and Markov analysis");

    auto* sweep = app.add_subcommand("sweep", "Per-epsilon ensemble tables");
    sweep->add_option("--eps-list", opts.sweep_eps, "Epsilon values to sweep")
        ->delimiter(',')
        ->capture_default_str();

    auto* synth = app.add_subcommand("synth", "Generate a block-correlated synthetic price CSV");
    synth->add_option("--synth-output", opts.synth_output, "Output CSV path")
        ->capture_default_str();
    synth->add_option("--n-stocks", opts.synth.n_stocks, "Number of stocks")
        ->capture_default_str();
    synth->add_option("--n-days", opts.synth.n_days, "Number of price days")
        ->capture_default_str();
    synth->add_option("--levels", opts.synth.levels,
                      "Per-regime uniform off-diagonal correlation levels")
        ->delimiter(',')
        ->capture_default_str();
    synth->add_option("--switches", opts.synth.switch_returns,
                      "Return-day indices where regimes switch (one fewer than levels)")
        ->delimiter(',')
        ->capture_default_str();
    synth->add_option("--vol", opts.synth.daily_vol, "Daily volatility")->capture_default_str();
    synth->add_option("--drift", opts.synth.daily_drift, "Daily drift")->capture_default_str();
    synth->add_option("--start-date", opts.synth.start_date, "First price date (ISO-8601)")
        ->capture_default_str();
    synth->add_option("--synth-seed", opts.synth.seed, "Generator seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return dispatch(app, opts);
    } catch (const mstates::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const mstates::ParseError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const mstates::ValidationError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
