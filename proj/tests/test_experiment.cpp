#include "nbmc/experiment.hpp"
#include "nbmc/metrics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>

namespace nbmc {
namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentPlan small_plan(const std::filesystem::path& out) {
    ExperimentPlan plan;
    plan.data.kind = DataSource::Kind::synthetic;
    plan.data.rows = 10;
    plan.data.cols = 8;
    plan.data.rank = 2;
    plan.noise_list = {NegativeBinomial{10.0}};
    plan.q_list = {0.75};
    plan.models = {ModelSpec::parse("nb")};
    plan.trials = 1;
    plan.tau_grid = {10.0};
    plan.solver.max_iters = 200;
    plan.master_seed = 7;
    plan.output_dir = out;
    return plan;
}

class ExperimentTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("nbmc_exp_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        std::filesystem::remove_all(dir_);
        std::filesystem::create_directories(dir_);
        unsetenv("NBMC_SEED");
    }
    void TearDown() override {
        std::filesystem::remove_all(dir_);
        unsetenv("NBMC_SEED");
    }
    std::filesystem::path dir_;
};

TEST(ModelSpec, Parse) {
    EXPECT_EQ(ModelSpec::parse("nb").kind, ModelSpec::Kind::nb_matched);
    EXPECT_EQ(ModelSpec::parse("poisson").kind, ModelSpec::Kind::poisson);
    const auto approx = ModelSpec::parse("nb-approx-poisson");
    EXPECT_EQ(approx.kind, ModelSpec::Kind::nb_fixed);
    EXPECT_EQ(approx.r, 1000.0);
    EXPECT_EQ(ModelSpec::parse("nb:25").r, 25.0);
    EXPECT_THROW(ModelSpec::parse("gauss"), std::invalid_argument);
}

TEST(ModelSpec, MatchedDispersion) {
    const auto nb = ModelSpec::parse("nb");
    EXPECT_EQ(std::get<NegativeBinomial>(nb.objective_for(NegativeBinomial{25.0})).r, 25.0);
    EXPECT_EQ(std::get<NegativeBinomial>(nb.objective_for(Poisson{})).r, 1000.0);
    EXPECT_TRUE(std::holds_alternative<Poisson>(ModelSpec::parse("poisson").objective_for(NegativeBinomial{10.0})));
}

TEST(GroundTruth, SyntheticRangeAndRank) {
    DataSource src;
    src.rows = 30;
    src.cols = 30;
    src.rank = 2;
    const DenseMatrix m = make_ground_truth(src, 3);
    EXPECT_NEAR(m.maxCoeff(), 50.0, 1e-12);
    EXPECT_GE(m.minCoeff(), 5.0);
    EXPECT_EQ(svd(m).numerical_rank(), 2);
}

TEST(CaseSeed, DependsOnIdentityOnly) {
    EXPECT_EQ(case_seed(1, "nb:10", 0.5, 3, "noise"), case_seed(1, "nb:10", 0.5, 3, "noise"));
    EXPECT_NE(case_seed(1, "nb:10", 0.5, 3, "noise"), case_seed(1, "nb:10", 0.5, 3, "mask"));
    EXPECT_NE(case_seed(1, "nb:10", 0.5, 3, "noise"), case_seed(1, "nb:10", 0.25, 3, "noise"));
    EXPECT_NE(case_seed(1, "nb:10", 0.5, 3, "noise"), case_seed(1, "poisson", 0.5, 3, "noise"));
}

TEST_F(ExperimentTest, ConfigDefaults) {
    const ExperimentPlan plan = parse_config_text(R"(
[data]
source = synthetic
[experiment]
noise = nb:10, nb:25, poisson
q = 0.25, 0.5, 0.75
models = nb, poisson
)");
    EXPECT_EQ(plan.solver.max_iters, 2000);
    EXPECT_EQ(plan.solver.tol, 1e-6);
    EXPECT_EQ(plan.solver.eta, 1.1);
    EXPECT_EQ(plan.trials, 20);
    EXPECT_EQ(plan.tau_grid, default_tau_grid());
    EXPECT_EQ(plan.noise_list.size(), 3u);
    EXPECT_EQ(plan.q_list, (std::vector<double>{0.25, 0.5, 0.75}));
}

TEST_F(ExperimentTest, ConfigRangeGrid) {
    const ExperimentPlan plan = parse_config_text(R"(
[data]
source = synthetic
[experiment]
noise = poisson
q = 1
models = poisson
[solver]
tau_grid = 1:0.5:3
alpha = 100
)");
    EXPECT_EQ(plan.tau_grid, (std::vector<double>{1.0, 1.5, 2.0, 2.5, 3.0}));
    EXPECT_EQ(plan.solver.alpha, 100.0);
    EXPECT_FALSE(plan.solver.beta.has_value());
}

TEST_F(ExperimentTest, ConfigRejectsOutOfRangeQ) {
    EXPECT_THROW(parse_config_text("[data]\nsource = synthetic\n[experiment]\nnoise = poisson\nq = 1.3\n"
                                   "models = nb\n"),
                 ConfigError);
}

TEST_F(ExperimentTest, ConfigSuggestsKnownKey) {
    try {
        parse_config_text("[data]\nsource = synthetic\n[experiment]\nnoise = poisson\nq = 0.5\nmodels = nb\n"
                          "[solver]\ntaus = 10, 20\n");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        ASSERT_EQ(e.problems().size(), 1u);
        EXPECT_NE(e.problems()[0].find("did you mean 'tau_grid'"), std::string::npos) << e.what();
    }
}

TEST_F(ExperimentTest, ConfigListsEveryViolation) {
    try {
        parse_config_text("[data]\nsource = tiff\n[experiment]\nq = abc\ntrials = x\nmodels = nb\n");
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        // bad source, bad q, bad trials, missing noise
        EXPECT_EQ(e.problems().size(), 4u) << e.what();
    }
}

TEST_F(ExperimentTest, ConfigSeedEnvironmentOverride) {
    const std::string text =
        "[data]\nsource = synthetic\n[experiment]\nnoise = poisson\nq = 0.5\nmodels = nb\nmaster_seed = 5\n";
    EXPECT_EQ(parse_config_text(text).master_seed, 5u);
    setenv("NBMC_SEED", "77", 1);
    EXPECT_EQ(parse_config_text(text).master_seed, 77u);
}

TEST_F(ExperimentTest, ConfigResolvesPathsRelativeToFile) {
    std::ofstream(dir_ / "exp.ini") << "[data]\nsource = csv\npath = truth.csv\n[experiment]\nnoise = poisson\n"
                                       "q = 1\nmodels = nb\noutput_dir = out\n";
    std::ofstream(dir_ / "truth.csv") << "1,2\n3,4\n";
    const ExperimentPlan plan = parse_config(dir_ / "exp.ini");
    EXPECT_EQ(plan.data.path, dir_ / "truth.csv");
    EXPECT_EQ(plan.output_dir, dir_ / "out");
}

TEST_F(ExperimentTest, ConfigMissingFile) {
    EXPECT_THROW(parse_config_text("[data]\nsource = csv\npath = /nonexistent/x.csv\n[experiment]\nnoise = poisson\n"
                                   "q = 1\nmodels = nb\n"),
                 ConfigError);
}

TEST_F(ExperimentTest, MinimalPlanGivesOneCell) {
    const auto outcome = run_experiment(small_plan(dir_));
    ASSERT_EQ(outcome.table.size(), 1u);
    EXPECT_EQ(outcome.table[0].n_trials, 1);
    EXPECT_EQ(outcome.table[0].n_failures, 0);
    EXPECT_EQ(outcome.table[0].noise, "nb:10");
    EXPECT_EQ(outcome.table[0].sd_psnr, 0.0);
}

TEST_F(ExperimentTest, EmittedMetricsAreConsistent) {
    ExperimentPlan plan = small_plan(dir_);
    plan.trials = 3;
    plan.models = {ModelSpec::parse("nb"), ModelSpec::parse("poisson")};
    plan.noise_list = {NegativeBinomial{10.0}, Poisson{}};
    const auto outcome = run_experiment(plan);
    EXPECT_EQ(outcome.records.size(), 12u);
    for (const auto& r : outcome.records) {
        ASSERT_TRUE(r.ok) << r.error;
        const double implied = outcome.ground_truth.maxCoeff() * std::pow(10.0, -r.psnr_db / 20.0) /
                               (outcome.ground_truth.maxCoeff() - outcome.ground_truth.minCoeff());
        EXPECT_LT(std::abs(implied - r.nrmse) / r.nrmse, 1e-10);
    }
}

TEST_F(ExperimentTest, ReproducibleResultsCsv) {
    ExperimentPlan plan = small_plan(dir_ / "a");
    plan.trials = 2;
    plan.q_list = {0.5, 0.9};
    write_outputs(plan, run_experiment(plan));
    plan.output_dir = dir_ / "b";
    write_outputs(plan, run_experiment(plan));
    EXPECT_EQ(slurp(dir_ / "a" / "results.csv"), slurp(dir_ / "b" / "results.csv"));
    EXPECT_EQ(slurp(dir_ / "a" / "trials.csv"), slurp(dir_ / "b" / "trials.csv"));
}

TEST_F(ExperimentTest, CellsIndependentOfCaseOrder) {
    ExperimentPlan plan = small_plan(dir_);
    plan.noise_list = {NegativeBinomial{10.0}, Poisson{}};
    plan.q_list = {0.5, 0.9};
    const auto forward = run_experiment(plan);
    std::reverse(plan.noise_list.begin(), plan.noise_list.end());
    std::reverse(plan.q_list.begin(), plan.q_list.end());
    const auto backward = run_experiment(plan);
    for (const auto& cell : forward.table) {
        const auto it = std::find_if(backward.table.begin(), backward.table.end(), [&](const ResultCell& c) {
            return c.noise == cell.noise && c.q == cell.q && c.model == cell.model;
        });
        ASSERT_NE(it, backward.table.end());
        EXPECT_EQ(it->mean_psnr, cell.mean_psnr);
        EXPECT_EQ(it->mean_nrmse, cell.mean_nrmse);
    }
}

TEST_F(ExperimentTest, ThreadedRunMatchesSerial) {
    ExperimentPlan plan = small_plan(dir_);
    plan.trials = 4;
    const auto serial = run_experiment(plan);
    plan.threads = 3;
    const auto threaded = run_experiment(plan);
    EXPECT_EQ(format_results_csv(serial.table), format_results_csv(threaded.table));
}

TEST_F(ExperimentTest, OutputsAndTrace) {
    ExperimentPlan plan = small_plan(dir_);
    plan.trace = true;
    plan.heatmaps = true;
    const auto outcome = run_experiment(plan);
    write_outputs(plan, outcome);
    const std::string csv = slurp(dir_ / "results.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "noise,q,model,mean_psnr,sd_psnr,mean_nrmse,sd_nrmse,n_trials,n_failures");
    EXPECT_TRUE(std::filesystem::exists(dir_ / "summary.txt"));
    EXPECT_TRUE(std::filesystem::exists(dir_ / "heatmaps" / "nb-10_q0.75_truth.pgm"));
    EXPECT_TRUE(std::filesystem::exists(dir_ / "heatmaps" / "nb-10_q0.75_nb.pgm"));
    const std::string trace = slurp(dir_ / "traces.jsonl");
    EXPECT_EQ(static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n')),
              outcome.records[0].objective_trace.size());
}

TEST(Aggregate, FailedTrialsExcluded) {
    std::vector<TrialRecord> records(3);
    for (int i = 0; i < 3; ++i) {
        records[i].noise = "poisson";
        records[i].q = 0.5;
        records[i].model = "nb";
        records[i].trial = i;
        records[i].ok = i != 1;
        records[i].psnr_db = 10.0 * (i + 1);
        records[i].nrmse = 0.1;
    }
    const auto table = aggregate(records);
    ASSERT_EQ(table.size(), 1u);
    EXPECT_EQ(table[0].n_trials, 2);
    EXPECT_EQ(table[0].n_failures, 1);
    EXPECT_DOUBLE_EQ(table[0].mean_psnr, 20.0);
    EXPECT_DOUBLE_EQ(table[0].sd_psnr, std::sqrt(200.0));

    for (auto& r : records) r.ok = false;
    EXPECT_THROW(aggregate(records), std::runtime_error);
}

TEST_F(ExperimentTest, MicroscopyNearLossless) {
    Rng rng(61);
    const DenseMatrix img = oracle::random_matrix(rng, 64, 64, 2.0, 242.0).array().round().matrix();
    save_pgm(img, dir_ / "toy.pgm", 255);
    ExperimentPlan plan;
    plan.data.kind = DataSource::Kind::pgm;
    plan.data.path = dir_ / "toy.pgm";
    plan.data.patch_size = 8;
    plan.data.truncate_rank = 64;
    plan.noise_list = {NoNoise{}};
    plan.q_list = {1.0};
    plan.models = {ModelSpec::parse("nb")};
    plan.trials = 1;
    plan.tau_grid = {1e-6};
    plan.output_dir = dir_ / "out";
    const auto outcome = run_microscopy_pipeline(plan);
    ASSERT_TRUE(outcome.layout.has_value());
    EXPECT_EQ(outcome.ground_truth.rows(), 64);
    EXPECT_EQ(outcome.ground_truth.cols(), 64);
    EXPECT_GT(outcome.table[0].mean_psnr, 60.0);
    EXPECT_TRUE(std::filesystem::exists(dir_ / "out" / "heatmaps" / "none_q1_nb.pgm"));
    EXPECT_EQ(load_pgm(dir_ / "out" / "heatmaps" / "none_q1_truth.pgm").rows(), 64);
}

TEST_F(ExperimentTest, MicroscopyNeedsPgm) {
    EXPECT_THROW(run_microscopy_pipeline(small_plan(dir_)), std::invalid_argument);
}

}  // namespace
}  // namespace nbmc
