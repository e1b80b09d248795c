#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "helpers.hpp"
#include "mstates/csvio.hpp"

// End-to-end checks of the installed binary: subcommands, config file
// handling, and the documented exit codes.

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MSTATES_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("cli help exits cleanly") {
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("synth --help") == 0);
}

TEST_CASE("cli rejects unknown arguments and missing subcommands") {
    CHECK(run_cli("") == 2);
    CHECK(run_cli("run --no-such-flag") == 2);
    CHECK(run_cli("bogus_subcommand") == 2);
}

TEST_CASE("cli synth then full run") {
    const auto dir = testutil::fresh_dir("cli_run");
    const auto csv = dir / "prices.csv";
    REQUIRE(run_cli("synth --synth-output " + csv.string() +
                    " --n-stocks 8 --n-days 420 --levels 0.1,0.7 --switches 210"
                    " --synth-seed 11") == 0);
    REQUIRE(std::filesystem::exists(csv));

    const auto out = dir / "out";
    CHECK(run_cli("run -i " + csv.string() + " -o " + out.string() +
                  " --ensemble-runs 20 --k-max 3 --seed 5 -j 2") == 0);
    CHECK(std::filesystem::exists(out / "manifest.json"));
    CHECK(std::filesystem::exists(out / "states.csv"));

    SECTION("partial-stage subcommand") {
        const auto fdir = dir / "frames_only";
        CHECK(run_cli("frames -i " + csv.string() + " -o " + fdir.string()) == 0);
        CHECK(std::filesystem::exists(fdir / "descriptors.csv"));
        CHECK_FALSE(std::filesystem::exists(fdir / "manifest.json"));
    }
    SECTION("sweep subcommand") {
        const auto sdir = dir / "sweep_out";
        CHECK(run_cli("sweep -i " + csv.string() + " -o " + sdir.string() +
                      " --ensemble-runs 10 --k-max 3 --eps-list 0,0.6") == 0);
        CHECK(std::filesystem::exists(sdir / "sweep_manifest.json"));
        CHECK(std::filesystem::exists(sdir / "cluster_stats_eps0.6.csv"));
    }
}

TEST_CASE("cli reads a flat key=value config file with flag overrides") {
    const auto dir = testutil::fresh_dir("cli_config");
    const auto csv = dir / "prices.csv";
    REQUIRE(run_cli("synth --synth-output " + csv.string() +
                    " --n-stocks 6 --n-days 320 --levels 0.2,0.6 --switches 160"
                    " --synth-seed 3") == 0);

    const auto conf = dir / "run.conf";
    std::ofstream(conf) << "input=" << csv.string() << "\n"
                        << "output-dir=" << (dir / "out_conf").string() << "\n"
                        << "epoch-days=15\n"
                        << "ensemble-runs=12\n"
                        << "k-max=3\n"
                        << "seed=9\n";
    REQUIRE(run_cli("run --config " + conf.string()) == 0);

    const auto manifest =
        nlohmann::json::parse(mstates::read_file_bytes(dir / "out_conf" / "manifest.json"));
    CHECK(manifest["config"]["epoch_days"] == 15);
    CHECK(manifest["config"]["ensemble_runs"] == 12);
    CHECK(manifest["config"]["master_seed"] == 9);

    SECTION("command-line flags override the file") {
        REQUIRE(run_cli("run --config " + conf.string() + " --epoch-days 12 -o " +
                        (dir / "out_override").string()) == 0);
        const auto m2 = nlohmann::json::parse(
            mstates::read_file_bytes(dir / "out_override" / "manifest.json"));
        CHECK(m2["config"]["epoch_days"] == 12);
    }
}

TEST_CASE("cli exit codes map the error taxonomy") {
    const auto dir = testutil::fresh_dir("cli_errors");

    SECTION("missing input is a config error") {
        CHECK(run_cli("run -o " + (dir / "o1").string()) == 2);
    }
    SECTION("bad dimension is a config error") {
        CHECK(run_cli("run -i nonexistent.csv --mds-dim 5") == 2);
    }
    SECTION("unreadable input is a data error") {
        CHECK(run_cli("run -i " + (dir / "absent.csv").string()) == 3);
    }
    SECTION("non-positive price is a data error") {
        const auto bad = dir / "bad.csv";
        std::ofstream(bad) << "date,A,B\n2001-01-02,1,2\n2001-01-03,0,2\n";
        CHECK(run_cli("run -i " + bad.string() + " -o " + (dir / "o2").string()) == 3);
    }
    SECTION("synth with inconsistent regime schedule is a config error") {
        CHECK(run_cli("synth --synth-output " + (dir / "x.csv").string() +
                      " --levels 0.1,0.5 --switches 10,20") == 2);
    }
}
