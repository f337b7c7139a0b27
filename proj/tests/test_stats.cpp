#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "actoreg/common/errors.hpp"
#include "actoreg/stats/stats.hpp"

using namespace actoreg;
using stats::EvalSeries;
using stats::ScoreMatrix;

namespace {

ScoreMatrix make_matrix(std::vector<std::vector<double>> scores,
                        const std::string& alg = "a") {
    ScoreMatrix m;
    m.algorithm = alg;
    const size_t t = scores.empty() ? 0 : scores[0].size();
    for (size_t i = 0; i < t; ++i) m.tasks.push_back("task" + std::to_string(i));
    for (size_t r = 0; r < scores.size(); ++r) m.seeds.push_back(r + 1);
    m.scores = std::move(scores);
    return m;
}

// Brute-force oracles written as direct enumeration with full re-sorting.
double oracle_median(const ScoreMatrix& m) {
    std::vector<double> task_means;
    for (size_t t = 0; t < m.tasks.size(); ++t) {
        double acc = 0.0;
        for (size_t r = 0; r < m.scores.size(); ++r) acc += m.scores[r][t];
        task_means.push_back(acc / static_cast<double>(m.scores.size()));
    }
    std::sort(task_means.begin(), task_means.end());
    const size_t n = task_means.size();
    return n % 2 == 1 ? task_means[n / 2]
                      : 0.5 * (task_means[n / 2 - 1] + task_means[n / 2]);
}

double oracle_iqm(const ScoreMatrix& m) {
    std::vector<double> flat;
    for (const auto& row : m.scores)
        for (double v : row) flat.push_back(v);
    std::sort(flat.begin(), flat.end());
    const auto drop = static_cast<size_t>(std::floor(0.25 * static_cast<double>(flat.size())));
    double acc = 0.0;
    size_t kept = 0;
    for (size_t i = drop; i + drop < flat.size(); ++i) {
        acc += flat[i];
        ++kept;
    }
    return acc / static_cast<double>(kept);
}

double oracle_mean(const ScoreMatrix& m) {
    double acc = 0.0;
    size_t n = 0;
    for (const auto& row : m.scores)
        for (double v : row) {
            acc += v;
            ++n;
        }
    return acc / static_cast<double>(n);
}

double oracle_gap(const ScoreMatrix& m) {
    double acc = 0.0;
    size_t n = 0;
    for (const auto& row : m.scores)
        for (double v : row) {
            acc += std::max(0.0, 1.0 - v / 100.0);
            ++n;
        }
    return acc / static_cast<double>(n);
}

double oracle_poi(const ScoreMatrix& a, const ScoreMatrix& b) {
    double acc = 0.0;
    for (size_t t = 0; t < a.tasks.size(); ++t) {
        double wins = 0.0;
        int pairs = 0;
        for (size_t ra = 0; ra < a.scores.size(); ++ra)
            for (size_t rb = 0; rb < b.scores.size(); ++rb) {
                if (a.scores[ra][t] > b.scores[rb][t])
                    wins += 1.0;
                else if (a.scores[ra][t] == b.scores[rb][t])
                    wins += 0.5;
                ++pairs;
            }
        acc += wins / pairs;
    }
    return acc / static_cast<double>(a.tasks.size());
}

std::vector<double> oracle_profile(const ScoreMatrix& m,
                                   const std::vector<double>& thresholds) {
    std::vector<double> out;
    for (double tau : thresholds) {
        int above = 0, total = 0;
        for (const auto& row : m.scores)
            for (double v : row) {
                if (v / 100.0 > tau) ++above;
                ++total;
            }
        out.push_back(static_cast<double>(above) / total);
    }
    return out;
}

// A two-dimensional do-nothing environment with reward |a[0]| per step, so
// noise effects on the return are hand-computable.
class FlatEnv final : public data::Environment {
  public:
    std::string name() const override { return "flat"; }
    int state_dim() const override { return 2; }
    int action_dim() const override { return 2; }
    int horizon() const override { return 10; }
    float reward_scale() const override { return 1.0f; }
    std::vector<float> initial_state(compute::Rng&) const override { return {0.0f, 0.0f}; }
    data::StepResult step(std::span<const float> s,
                          std::span<const float> a) const override {
        data::StepResult r;
        r.next_state.assign(s.begin(), s.end());
        r.reward = std::fabs(a[0]);
        r.done = false;
        return r;
    }
    std::vector<float> expert_action(std::span<const float>) const override {
        return {1.0f, 0.0f};
    }
};

}  // namespace

TEST_CASE("normalized score anchors and linearity") {
    CHECK(stats::normalized_score(-12.0, -100.0, -12.0) == doctest::Approx(100.0));
    CHECK(stats::normalized_score(-100.0, -100.0, -12.0) == doctest::Approx(0.0));
    CHECK(stats::normalized_score(-56.0, -100.0, -12.0) == doctest::Approx(50.0));
    CHECK_THROWS_AS(stats::normalized_score(0.0, 5.0, 5.0), config_error);
    CHECK_THROWS_AS(stats::normalized_score(0.0, 5.0, 4.0), config_error);
}

TEST_CASE("running average of the last checkpoints") {
    EvalSeries s;
    s.steps = {100, 200, 300};
    s.returns = {10.0, 20.0, 30.0};
    CHECK(stats::rar(s, 2) == doctest::Approx(25.0));
    CHECK(stats::rar(s, 3) == doctest::Approx(20.0));  // full window = overall mean
    CHECK(stats::rar(s, 1) == doctest::Approx(30.0));
    CHECK_THROWS_WITH_AS(stats::rar(s, 4), doctest::Contains("shorter than the window"),
                         config_error);
    CHECK_THROWS_AS(stats::rar(s, 0), config_error);
    CHECK(stats::default_rar_window(true) == 5);
    CHECK(stats::default_rar_window(false) == 10);
}

TEST_CASE("score matrix validation") {
    auto good = make_matrix({{1.0, 2.0}, {3.0, 4.0}});
    CHECK_NOTHROW(good.validate());

    auto ragged = good;
    ragged.scores[1].pop_back();
    CHECK_THROWS_WITH_AS(ragged.validate(), doctest::Contains("ragged"), config_error);

    auto nan = good;
    nan.scores[0][0] = std::nan("");
    CHECK_THROWS_AS(nan.validate(), config_error);

    auto dup_task = good;
    dup_task.tasks[1] = dup_task.tasks[0];
    CHECK_THROWS_AS(dup_task.validate(), config_error);

    auto dup_seed = good;
    dup_seed.seeds[1] = dup_seed.seeds[0];
    CHECK_THROWS_AS(dup_seed.validate(), config_error);

    ScoreMatrix empty;
    CHECK_THROWS_AS(empty.validate(), config_error);
}

TEST_CASE("aggregate point estimates on hand examples") {
    // flat scores 1..8: drop floor(0.25*8)=2 from each end, mean(3,4,5,6)=4.5
    auto m = make_matrix({{1.0, 2.0, 3.0, 4.0}, {5.0, 6.0, 7.0, 8.0}});
    CHECK(stats::iqm(m) == doctest::Approx(4.5));
    CHECK(stats::grand_mean(m) == doctest::Approx(4.5));

    // optimality gap on scores 50 and 150: (0.5 + 0)/2
    auto g = make_matrix({{50.0}, {150.0}});
    CHECK(stats::optimality_gap(g) == doctest::Approx(0.25));

    // constant matrix: median = iqm = mean = c and the bootstrap is a point
    auto c = make_matrix({{70.0, 70.0, 70.0}, {70.0, 70.0, 70.0}});
    CHECK(stats::median_score(c) == doctest::Approx(70.0));
    CHECK(stats::iqm(c) == doctest::Approx(70.0));
    CHECK(stats::grand_mean(c) == doctest::Approx(70.0));
    auto rep = stats::aggregate_metrics(c, 100, 3);
    CHECK(rep.median.ci.lo == doctest::Approx(70.0));
    CHECK(rep.median.ci.hi == doctest::Approx(70.0));
    CHECK(rep.iqm.ci.lo == doctest::Approx(70.0));
    CHECK(rep.optimality_gap.value == doctest::Approx(0.3));

    // median over tasks of per-run means: 2 tasks with means 10 and 30
    auto med = make_matrix({{5.0, 25.0}, {15.0, 35.0}});
    CHECK(stats::median_score(med) == doctest::Approx(20.0));
}

TEST_CASE("all statistics match the brute-force oracle on integer matrices") {
    std::mt19937_64 gen(99);
    std::uniform_int_distribution<int> runs_d(2, 5), tasks_d(1, 6), val_d(-50, 150);
    for (int rep = 0; rep < 100; ++rep) {
        const int r = runs_d(gen), t = tasks_d(gen);
        std::vector<std::vector<double>> sa(r, std::vector<double>(t));
        std::vector<std::vector<double>> sb(r, std::vector<double>(t));
        for (auto& row : sa)
            for (auto& v : row) v = static_cast<double>(val_d(gen));
        for (auto& row : sb)
            for (auto& v : row) v = static_cast<double>(val_d(gen));
        auto a = make_matrix(std::move(sa), "a");
        auto b = make_matrix(std::move(sb), "b");

        CHECK(stats::median_score(a) == oracle_median(a));
        CHECK(stats::iqm(a) == oracle_iqm(a));
        CHECK(stats::grand_mean(a) == oracle_mean(a));
        CHECK(stats::optimality_gap(a) == oracle_gap(a));
        CHECK(stats::poi_point(a, b) == oracle_poi(a, b));

        std::vector<double> thresholds;
        for (int k = -8; k <= 16; ++k) thresholds.push_back(k / 8.0);
        CHECK(stats::performance_profile(a, thresholds) == oracle_profile(a, thresholds));
    }
}

TEST_CASE("iqm sits inside the kept range and ignores run order") {
    // integer scores keep every sum exact, so permutation checks can use ==
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<int> val(-20, 130);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<std::vector<double>> s(4, std::vector<double>(5));
        for (auto& row : s)
            for (auto& v : row) v = static_cast<double>(val(gen));
        auto m = make_matrix(s);
        const double q = stats::iqm(m);

        std::vector<double> flat;
        for (const auto& row : s)
            for (double v : row) flat.push_back(v);
        std::sort(flat.begin(), flat.end());
        const size_t drop = flat.size() / 4;
        CHECK(q >= flat[drop]);
        CHECK(q <= flat[flat.size() - drop - 1]);
        CHECK(q >= flat.front());
        CHECK(q <= flat.back());

        std::reverse(s.begin(), s.end());  // permute runs
        auto perm = make_matrix(s);
        CHECK(stats::iqm(perm) == q);
        CHECK(stats::median_score(perm) == stats::median_score(m));
    }
}

TEST_CASE("optimality gap is zero above threshold and strictly improves") {
    auto top = make_matrix({{100.0, 120.0}, {101.0, 250.0}});
    CHECK(stats::optimality_gap(top) == 0.0);

    auto m = make_matrix({{40.0, 110.0}, {90.0, 55.0}});
    const double g0 = stats::optimality_gap(m);
    CHECK(g0 > 0.0);
    m.scores[0][0] = 60.0;  // raise a below-threshold score
    const double g1 = stats::optimality_gap(m);
    CHECK(g1 < g0);
    m.scores[1][0] = 130.0;  // raising an above-threshold score does nothing more
    const double g2 = stats::optimality_gap(m);
    m.scores[1][0] = 180.0;
    CHECK(stats::optimality_gap(m) == g2);
}

TEST_CASE("bootstrap intervals contain the point estimate on random matrices") {
    std::mt19937_64 gen(42);
    std::uniform_int_distribution<int> runs_d(3, 5), tasks_d(2, 6), val_d(0, 120);
    for (int rep = 0; rep < 100; ++rep) {
        const int r = runs_d(gen), t = tasks_d(gen);
        std::vector<std::vector<double>> s(r, std::vector<double>(t));
        for (auto& row : s)
            for (auto& v : row) v = static_cast<double>(val_d(gen));
        auto m = make_matrix(std::move(s));
        auto report = stats::aggregate_metrics(m, 400, static_cast<uint64_t>(rep));
        CHECK(report.median.ci.lo <= report.median.value);
        CHECK(report.median.ci.hi >= report.median.value);
        CHECK(report.iqm.ci.lo <= report.iqm.value);
        CHECK(report.iqm.ci.hi >= report.iqm.value);
        CHECK(report.mean.ci.lo <= report.mean.value);
        CHECK(report.mean.ci.hi >= report.mean.value);
        CHECK(report.optimality_gap.ci.lo <= report.optimality_gap.value);
        CHECK(report.optimality_gap.ci.hi >= report.optimality_gap.value);
    }
}

TEST_CASE("bootstrap is deterministic for a fixed seed") {
    // a continuous-valued 5x6 matrix: percentile endpoints of its bootstrap
    // distribution almost surely move when the seed does
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> val(0.0, 100.0);
    std::vector<std::vector<double>> s(5, std::vector<double>(6));
    for (auto& row : s)
        for (auto& v : row) v = val(gen);
    auto m = make_matrix(std::move(s));
    auto ci1 = stats::stratified_bootstrap_ci(m, stats::grand_mean, 500, 11);
    auto ci2 = stats::stratified_bootstrap_ci(m, stats::grand_mean, 500, 11);
    CHECK(ci1.lo == ci2.lo);
    CHECK(ci1.hi == ci2.hi);
    auto ci3 = stats::stratified_bootstrap_ci(m, stats::grand_mean, 500, 12);
    CHECK((ci3.lo != ci1.lo || ci3.hi != ci1.hi));
    CHECK(ci1.lo <= ci1.hi);
    CHECK_THROWS_AS(stats::stratified_bootstrap_ci(m, stats::grand_mean, 1, 1), config_error);
}

TEST_CASE("probability of improvement hand cases and complement identity") {
    // dominance: every A run beats every B run on every task
    auto a = make_matrix({{10.0, 10.0}, {12.0, 11.0}}, "a");
    auto b = make_matrix({{1.0, 2.0}, {3.0, 4.0}}, "b");
    CHECK(stats::poi_point(a, b) == 1.0);
    CHECK(stats::poi_point(b, a) == 0.0);

    // identical matrices: pure ties
    CHECK(stats::poi_point(a, a) == 0.5);

    // A=[1,3], B=[2,2] on one task: one win of four pairs plus no ties
    auto a1 = make_matrix({{1.0}, {3.0}}, "a");
    auto b1 = make_matrix({{2.0}, {2.0}}, "b");
    CHECK(stats::poi_point(a1, b1) == 0.5);

    // complement identity when no ties exist
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> val(0.0, 100.0);
    std::vector<std::vector<double>> sa(3, std::vector<double>(4)),
        sb(4, std::vector<double>(4));
    for (auto& row : sa)
        for (auto& v : row) v = val(gen);
    for (auto& row : sb)
        for (auto& v : row) v = val(gen);
    auto ra = make_matrix(sa, "a");
    auto rb = make_matrix(sb, "b");
    CHECK(stats::poi_point(ra, rb) + stats::poi_point(rb, ra) == doctest::Approx(1.0));

    // mismatched task lists are rejected
    auto wrong = make_matrix({{1.0}}, "c");
    CHECK_THROWS_AS(stats::poi_point(a, wrong), config_error);

    // CI machinery runs and brackets the estimate
    auto poi = stats::probability_of_improvement(ra, rb, 300, 8);
    CHECK(poi.ci.lo <= poi.value);
    CHECK(poi.ci.hi >= poi.value);
}

TEST_CASE("performance profile boundaries and monotonicity") {
    auto m = make_matrix({{20.0, 60.0, 100.0}});
    CHECK(stats::performance_profile(m, {-0.5}) == std::vector<double>{1.0});
    CHECK(stats::performance_profile(m, {1.5}) == std::vector<double>{0.0});
    auto v = stats::performance_profile(m, {0.5});
    CHECK(v[0] == doctest::Approx(2.0 / 3.0));
    // strictly greater: a score exactly at the threshold does not count
    auto at = stats::performance_profile(m, {0.2, 0.6, 1.0});
    CHECK(at[0] == doctest::Approx(2.0 / 3.0));
    CHECK(at[1] == doctest::Approx(1.0 / 3.0));
    CHECK(at[2] == doctest::Approx(0.0));

    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> val(-10.0, 140.0);
    std::vector<std::vector<double>> s(5, std::vector<double>(6));
    for (auto& row : s)
        for (auto& vv : row) vv = val(gen);
    auto big = make_matrix(s);
    std::vector<double> taus;
    for (int k = 0; k <= 60; ++k) taus.push_back(-0.2 + k * 0.03);
    auto curve = stats::performance_profile(big, taus);
    for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
    // duplicated threshold keeps the same value (right continuity on the grid)
    auto dup = stats::performance_profile(big, {0.4, 0.4});
    CHECK(dup[0] == dup[1]);

    CHECK_THROWS_AS(stats::performance_profile(big, {0.5, 0.4}), config_error);
    CHECK_THROWS_AS(stats::performance_profile(big, {}), config_error);
}

TEST_CASE("robustness ratio: clean identity, degradation, ceiling, missing") {
    FlatEnv env;
    data::ScoreAnchors anchors{0.0, 10.0};  // random 0, expert 10 (raw returns)

    // the expert stand-in: |a0| = 1 per step, return 10
    data::Policy full = [](std::span<const float>) {
        return std::vector<float>{1.0f, 0.0f};
    };
    // sigma = 0 leaves the rollout untouched: ratio exactly 1
    auto clean = stats::robustness_eval(env, full, stats::NoiseMode::action, 0.0f, 5, 3,
                                        anchors);
    REQUIRE(clean.has_value());
    CHECK(*clean == 1.0);

    // clamped action noise on a saturated action can only lower the return
    auto degraded = stats::robustness_eval(env, full, stats::NoiseMode::action,
                                           stats::kActionNoiseSigma, 20, 3, anchors);
    REQUIRE(degraded.has_value());
    CHECK(*degraded < 1.0);
    CHECK(*degraded > 0.5);

    // noise around a small action raises E|a0| well past the ceiling
    data::Policy faint = [](std::span<const float>) {
        return std::vector<float>{0.05f, 0.0f};
    };
    auto boosted = stats::robustness_eval(env, faint, stats::NoiseMode::action, 0.2f, 20, 3,
                                          anchors);
    REQUIRE(boosted.has_value());
    CHECK(*boosted == stats::kRobustnessClip);

    // observation noise reaches the policy input: echoing obs[0] turns pure
    // zeros into nonzero actions
    data::Policy echo = [](std::span<const float> s) {
        return std::vector<float>{s[0], 0.0f};
    };
    data::ScoreAnchors shifted{-10.0, 10.0};  // clean return 0 maps to score 50
    auto obs = stats::robustness_eval(env, echo, stats::NoiseMode::observation,
                                      stats::kObservationNoiseSigma, 20, 3, shifted);
    REQUIRE(obs.has_value());
    CHECK(*obs > 1.0);  // |noise| adds return; ratio exceeds one (maybe clipped)

    // zero clean normalized score reports missing
    data::ScoreAnchors at_zero{0.0, 10.0};  // echo policy's clean return equals random
    auto missing = stats::robustness_eval(env, echo, stats::NoiseMode::observation, 0.05f,
                                          20, 3, at_zero);
    CHECK(!missing.has_value());

    CHECK_THROWS_AS(
        stats::robustness_eval(env, full, stats::NoiseMode::action, -0.1f, 5, 3, anchors),
        config_error);
    CHECK_THROWS_AS(
        stats::robustness_eval(env, full, stats::NoiseMode::action, 0.1f, 0, 3, anchors),
        config_error);

    CHECK(stats::kActionNoiseSigma == 0.2f);
    CHECK(stats::kObservationNoiseSigma == 0.05f);
    CHECK(stats::kRobustnessClip == 1.1);
}

TEST_CASE("scores csv round trip and error reporting") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "actoreg_stats_test";
    fs::create_directories(dir);
    const auto path = (dir / "scores.csv").string();

    auto a = make_matrix({{10.5, 20.0}, {30.25, 40.0}}, "alpha");
    auto b = make_matrix({{-5.0, 99.125}, {7.0, 64.0}, {8.0, 2.0}}, "beta");
    stats::save_scores_csv(path, {a, b});
    auto loaded = stats::load_scores_csv(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].algorithm == "alpha");
    CHECK(loaded[1].algorithm == "beta");
    CHECK(loaded[0].tasks == a.tasks);
    CHECK(loaded[0].seeds == a.seeds);
    CHECK(loaded[0].scores == a.scores);
    CHECK(loaded[1].scores == b.scores);

    // loading is insensitive to row order: shuffle the data lines
    {
        std::ifstream in(path);
        std::string header, line;
        std::getline(in, header);
        std::vector<std::string> rows;
        while (std::getline(in, line)) rows.push_back(line);
        in.close();
        std::reverse(rows.begin(), rows.end());
        std::ofstream out(path);
        out << header << "\n";
        for (auto& r : rows) out << r << "\n";
    }
    auto reloaded = stats::load_scores_csv(path);
    CHECK(reloaded[0].scores == a.scores);
    CHECK(reloaded[1].scores == b.scores);

    // bad header
    {
        std::ofstream out(path);
        out << "task,algorithm,seed,score\nx,y,1,2\n";
    }
    CHECK_THROWS_WITH_AS(stats::load_scores_csv(path), doctest::Contains("header"),
                         io_error);

    // missing cell: seed 2 lacks task1
    {
        std::ofstream out(path);
        out << "algorithm,task,seed,score\n";
        out << "a,task0,1,10\na,task1,1,20\na,task0,2,30\n";
    }
    CHECK_THROWS_WITH_AS(stats::load_scores_csv(path), doctest::Contains("missing cell"),
                         io_error);

    // duplicate cell
    {
        std::ofstream out(path);
        out << "algorithm,task,seed,score\n";
        out << "a,task0,1,10\na,task0,1,11\n";
    }
    CHECK_THROWS_WITH_AS(stats::load_scores_csv(path), doctest::Contains("duplicate cell"),
                         io_error);

    // malformed row
    {
        std::ofstream out(path);
        out << "algorithm,task,seed,score\n";
        out << "a,task0,one,10\n";
    }
    CHECK_THROWS_WITH_AS(stats::load_scores_csv(path), doctest::Contains("line 2"),
                         io_error);

    // truncated row
    {
        std::ofstream out(path);
        out << "algorithm,task,seed,score\n";
        out << "a,task0\n";
    }
    CHECK_THROWS_AS(stats::load_scores_csv(path), io_error);

    CHECK_THROWS_AS(stats::load_scores_csv((dir / "absent.csv").string()), io_error);

    // empty data section
    {
        std::ofstream out(path);
        out << "algorithm,task,seed,score\n";
    }
    CHECK_THROWS_WITH_AS(stats::load_scores_csv(path), doctest::Contains("no data rows"),
                         io_error);

    fs::remove_all(dir);
}

TEST_CASE("aggregate_metrics requires at least two runs") {
    auto solo = make_matrix({{50.0, 60.0}});
    CHECK_THROWS_AS(stats::aggregate_metrics(solo, 100, 1), config_error);
}
