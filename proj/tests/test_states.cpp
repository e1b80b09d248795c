#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "mstates/states.hpp"

using namespace mstates;

namespace {

// Frames with a prescribed uniform off-diagonal level, so cluster mean
// correlations are known.
std::vector<CorrelationFrame> frames_at_levels(const std::vector<double>& levels,
                                               Eigen::Index n = 4) {
    std::vector<CorrelationFrame> frames;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        auto f = testutil::make_frame(testutil::uniform_offdiag(n, levels[i]), 6);
        f.epoch.end_date = "d" + std::to_string(i);
        frames.push_back(std::move(f));
    }
    return frames;
}

} // namespace

TEST_CASE("order_states relabels clusters by ascending mean correlation") {
    // Cluster 0 holds high-correlation frames, cluster 1 low ones.
    const auto frames = frames_at_levels({0.5, 0.5, 0.1, 0.1});
    const std::vector<int> labels = {0, 0, 1, 1};
    const StateModel model = order_states(labels, frames);
    REQUIRE(model.k == 2);
    CHECK(model.state_of_epoch == std::vector<int>{1, 1, 0, 0});
    CHECK(model.state_mean_corr[0] < model.state_mean_corr[1]);
    CHECK(model.ties.empty());
}

TEST_CASE("order_states representative matrices are element-wise member means") {
    const auto frames = frames_at_levels({0.2, 0.4, 0.8});
    const std::vector<int> labels = {0, 0, 1};
    const StateModel model = order_states(labels, frames);
    // Single-member cluster: representative equals the member.
    CHECK(model.representative_frame[1] == frames[2].matrix);
    // Two-member cluster: element-wise mean of 0.2 and 0.4 levels.
    CHECK_THAT(model.representative_frame[0](0, 1),
               Catch::Matchers::WithinAbs(0.3, 1e-15));
    CHECK(model.representative_frame[0](0, 0) == 1.0);
}

TEST_CASE("order_states reports ties and breaks them by earliest epoch") {
    const auto frames = frames_at_levels({0.3, 0.3});
    const std::vector<int> labels = {1, 0};  // identical means; cluster 1 appears first
    const StateModel model = order_states(labels, frames);
    REQUIRE(model.ties.size() == 1);
    CHECK(model.state_of_epoch == std::vector<int>{0, 1});
}

TEST_CASE("order_states validation") {
    const auto frames = frames_at_levels({0.1, 0.2});
    CHECK_THROWS_AS(order_states({0, 0}, frames), ValidationError);       // k < 2
    CHECK_THROWS_AS(order_states({0, 2}, frames), ValidationError);      // empty cluster 1
    CHECK_THROWS_AS(order_states({0}, frames), ValidationError);         // size mismatch
}

TEST_CASE("transition_matrix counts consecutive pairs") {
    SECTION("constant sequence is the identity on its state") {
        const TransitionMatrix tm = transition_matrix({0, 0, 0, 0}, 1);
        CHECK(tm.W(0, 0) == 1.0);
        CHECK(tm.counts(0, 0) == 3.0);
        CHECK(tm.zero_rows.empty());
    }
    SECTION("deterministic alternation") {
        const TransitionMatrix tm = transition_matrix({0, 1, 0, 1, 0}, 2);
        CHECK(tm.W(0, 0) == 0.0);
        CHECK(tm.W(0, 1) == 1.0);
        CHECK(tm.W(1, 0) == 1.0);
        CHECK(tm.W(1, 1) == 0.0);
    }
    SECTION("rows with no outgoing pair are flagged, not normalized") {
        const TransitionMatrix tm = transition_matrix({0, 0, 0, 1}, 2);
        REQUIRE(tm.zero_rows == std::vector<int>{1});
        CHECK(tm.W.row(1).sum() == 0.0);
    }
    SECTION("rows with data sum to one") {
        const auto seq = testutil::sample_chain(testutil::usa_table_w(), 5000, 31);
        const TransitionMatrix tm = transition_matrix(seq, 4);
        for (int i = 0; i < 4; ++i)
            CHECK_THAT(tm.W.row(i).sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("validation") {
        CHECK_THROWS_AS(transition_matrix({0}, 1), ValidationError);
        CHECK_THROWS_AS(transition_matrix({0, 3}, 2), ValidationError);
    }
}

TEST_CASE("transition_matrix recovers the chain it was sampled from") {
    const Eigen::MatrixXd w = testutil::usa_table_w();
    const auto seq = testutil::sample_chain(w, 1000000, 4242);
    const TransitionMatrix tm = transition_matrix(seq, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK_THAT(tm.W(i, j), Catch::Matchers::WithinAbs(w(i, j), 0.005));
}

TEST_CASE("stationary_distribution on the reference tables") {
    SECTION("USA four-state chain") {
        const StationaryDistribution sd = stationary_distribution(testutil::usa_table_w());
        const std::vector<double> expected = {0.523, 0.288, 0.149, 0.040};
        for (int i = 0; i < 4; ++i)
            CHECK_THAT(sd.p0(i), Catch::Matchers::WithinAbs(expected[static_cast<std::size_t>(i)],
                                                            0.002));
        CHECK_THAT(sd.p0.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
    SECTION("JPN five-state chain") {
        const StationaryDistribution sd = stationary_distribution(testutil::jpn_table_w());
        const std::vector<double> expected = {0.274, 0.308, 0.263, 0.119, 0.036};
        for (int i = 0; i < 5; ++i)
            CHECK_THAT(sd.p0(i), Catch::Matchers::WithinAbs(expected[static_cast<std::size_t>(i)],
                                                            0.002));
    }
}

TEST_CASE("stationary_distribution structural cases") {
    SECTION("doubly stochastic uniform chain is uniform") {
        const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(4, 4, 0.25);
        const StationaryDistribution sd = stationary_distribution(w);
        for (int i = 0; i < 4; ++i)
            CHECK_THAT(sd.p0(i), Catch::Matchers::WithinAbs(0.25, 1e-12));
        CHECK(sd.residual < 1e-10);
    }
    SECTION("periodic irreducible chain still has its exact fixed point") {
        Eigen::MatrixXd w(2, 2);
        w << 0.0, 1.0, 1.0, 0.0;
        const StationaryDistribution sd = stationary_distribution(w);
        CHECK_THAT(sd.p0(0), Catch::Matchers::WithinAbs(0.5, 1e-12));
        CHECK_THAT(sd.p0(1), Catch::Matchers::WithinAbs(0.5, 1e-12));
    }
    SECTION("reducible chain with two closed classes is rejected with the class structure") {
        Eigen::MatrixXd w = Eigen::MatrixXd::Identity(3, 3);
        try {
            stationary_distribution(w);
            FAIL("expected NumericalError");
        } catch (const NumericalError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("closed communicating classes") != std::string::npos);
            CHECK(msg.find("S1") != std::string::npos);
        }
    }
    SECTION("transient state feeding one closed class is fine") {
        Eigen::MatrixXd w(3, 3);
        w << 0.5, 0.5, 0.0,
             0.4, 0.3, 0.3,
             0.0, 0.0, 1.0;  // state 3 absorbing, others transient
        const StationaryDistribution sd = stationary_distribution(w);
        CHECK_THAT(sd.p0(2), Catch::Matchers::WithinAbs(1.0, 1e-10));
    }
    SECTION("non-stochastic rows are rejected") {
        Eigen::MatrixXd w(2, 2);
        w << 0.5, 0.3, 0.5, 0.5;
        CHECK_THROWS_AS(stationary_distribution(w), ValidationError);
        w << 0.7, -0.3, 0.5, 0.5;
        CHECK_THROWS_AS(stationary_distribution(w), ValidationError);
    }
    SECTION("a zero row reports reducibility rather than guessing") {
        Eigen::MatrixXd w(2, 2);
        w << 0.5, 0.5, 0.0, 0.0;
        try {
            stationary_distribution(w);
            FAIL("expected NumericalError");
        } catch (const NumericalError& e) {
            CHECK(std::string(e.what()).find("reducible") != std::string::npos);
        }
    }
}

TEST_CASE("stationary fixed point holds to 1e-10 on random ergodic chains") {
    Rng rng(654);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(rng.next_below(6));
        Eigen::MatrixXd w(k, k);
        for (int i = 0; i < k; ++i) {
            double row_sum = 0.0;
            for (int j = 0; j < k; ++j) {
                w(i, j) = 0.05 + rng.next_double();
                row_sum += w(i, j);
            }
            w.row(i) /= row_sum;
        }
        const StationaryDistribution sd = stationary_distribution(w);
        CHECK(sd.residual < 1e-10);
        CHECK(sd.p0.minCoeff() >= 0.0);
        CHECK_THAT(sd.p0.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("empirical_frequencies") {
    const Eigen::VectorXd f = empirical_frequencies({0, 0, 1, 1}, 2);
    CHECK(f(0) == 0.5);
    CHECK(f(1) == 0.5);
    CHECK_THROWS_AS(empirical_frequencies({}, 2), ValidationError);
}

TEST_CASE("long chain samples converge to the stationary distribution") {
    const Eigen::MatrixXd w = testutil::jpn_table_w();
    const auto seq = testutil::sample_chain(w, 1000000, 777);
    const Eigen::VectorXd freq = empirical_frequencies(seq, 5);
    const StationaryDistribution sd = stationary_distribution(w);
    for (int i = 0; i < 5; ++i)
        CHECK_THAT(freq(i), Catch::Matchers::WithinAbs(sd.p0(i), 0.005));
}

TEST_CASE("occupancy_windows") {
    SECTION("constant sequence is one-hot everywhere") {
        const auto occ = occupancy_windows(std::vector<int>(25, 1), 3, 10);
        REQUIRE(occ.size() == 3);  // 10 + 10 + trailing 5
        for (const auto& v : occ) {
            CHECK(v(1) == 1.0);
            CHECK_THAT(v.sum(), Catch::Matchers::WithinAbs(1.0, 1e-15));
        }
    }
    SECTION("window of one is one-hot per epoch") {
        const auto occ = occupancy_windows({0, 1, 2}, 3, 1);
        REQUIRE(occ.size() == 3);
        CHECK(occ[0](0) == 1.0);
        CHECK(occ[1](1) == 1.0);
        CHECK(occ[2](2) == 1.0);
    }
    SECTION("hand-built 20-epoch sequence matches hand counts") {
        const std::vector<int> seq = {0, 0, 0, 0, 0, 0, 0, 1, 1, 1,
                                      0, 0, 0, 0, 1, 1, 1, 1, 1, 1};
        const auto occ = occupancy_windows(seq, 2, 10);
        REQUIRE(occ.size() == 2);
        CHECK(occ[0](0) == 0.7);
        CHECK(occ[0](1) == 0.3);
        CHECK(occ[1](0) == 0.4);
        CHECK(occ[1](1) == 0.6);
    }
    SECTION("window must be positive") {
        CHECK_THROWS_AS(occupancy_windows({0, 1}, 2, 0), ValidationError);
    }
}

TEST_CASE("precursor_report ranks inflows into the critical state") {
    SECTION("USA: S3 is the precursor with conditional 0.058") {
        const Eigen::MatrixXd w = testutil::usa_table_w();
        TransitionMatrix tm;
        tm.W = w;
        // Counts consistent with the stationary occupancy of a long run.
        const StationaryDistribution sd = stationary_distribution(w);
        tm.counts = Eigen::MatrixXd::Zero(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                tm.counts(i, j) = std::round(1e6 * sd.p0(i) * w(i, j));
        const auto report = precursor_report(tm);
        REQUIRE(report.size() == 3);
        CHECK(report[0].from_state == 2);  // S3
        CHECK(report[0].conditional == w(2, 3));
        CHECK(report[0].conditional == 0.058);
        // Joint co-occurrence of (S3, S4) is under one percent.
        CHECK_THAT(report[0].joint, Catch::Matchers::WithinAbs(sd.p0(2) * 0.058, 1e-4));
        CHECK(report[1].conditional <= report[0].conditional);
    }
    SECTION("JPN: S4 is the precursor with conditional 0.075") {
        const Eigen::MatrixXd w = testutil::jpn_table_w();
        TransitionMatrix tm;
        tm.W = w;
        tm.counts = Eigen::MatrixXd::Zero(5, 5);
        const auto report = precursor_report(tm);
        REQUIRE(report.size() == 4);
        CHECK(report[0].from_state == 3);  // S4
        CHECK(report[0].conditional == 0.075);
        CHECK(report[0].joint == 0.0);  // no counts supplied
    }
    SECTION("identity chain has zero inflows") {
        TransitionMatrix tm;
        tm.W = Eigen::MatrixXd::Identity(3, 3);
        tm.counts = Eigen::MatrixXd::Identity(3, 3) * 10.0;
        for (const auto& entry : precursor_report(tm)) {
            CHECK(entry.conditional == 0.0);
            CHECK(entry.joint == 0.0);
        }
    }
}

TEST_CASE("reference tables are diagonally dominant (data regression)") {
    // Remaining in a state is more likely than any single transition out.
    for (const auto& w : {testutil::usa_table_w(), testutil::jpn_table_w()}) {
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                if (i != j) CHECK(w(i, i) > w(i, j));
    }
}
