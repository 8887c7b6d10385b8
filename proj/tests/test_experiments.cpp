#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "relukan/errors.hpp"
#include "relukan/experiments.hpp"

using namespace relukan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("relukan_exp_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Drops the named zero-based CSV column from every line.
std::string drop_column(const std::string& csv, std::size_t column) {
    std::stringstream in(csv), out;
    std::string line;
    while (std::getline(in, line)) {
        std::stringstream fields(line);
        std::string f;
        std::size_t i = 0;
        bool first = true;
        while (std::getline(fields, f, ',')) {
            if (i++ == column) continue;
            if (!first) out << ',';
            out << f;
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace

TEST_CASE("default settings follow the parameter tables") {
    CHECK(fit_setting(fit_target("f1")).widths.to_string() == "1,1");
    CHECK(fit_setting(fit_target("f2")).widths.to_string() == "1,1");
    CHECK(fit_setting(fit_target("f2")).listed_widths.to_string() == "2,1");
    CHECK(fit_setting(fit_target("f3")).listed_widths.to_string() == "2,1,1");
    CHECK(fit_setting(fit_target("f4")).widths.to_string() == "2,5,1");
    CHECK(fit_setting(fit_target("f6")).grid == 10);
    CHECK(bench_setting(speed_target("f5")).widths.to_string() == "4,4,2,1");
    CHECK(bench_setting(speed_target("f5")).grid == 10);
    CHECK(bench_setting(speed_target("f3")).widths.to_string() == "2,1,1");
    for (TargetId id : fit_targets()) CHECK(fit_setting(id).widths.input_width() == target_info(id).arity);
    for (TargetId id : speed_targets()) CHECK(bench_setting(id).widths.input_width() == target_info(id).arity);
}

TEST_CASE("resolve_runs expands defaults") {
    ExperimentSpec spec;
    const auto runs = resolve_runs(spec);
    CHECK(runs.size() == 15);
    CHECK(runs.front().function == "f1");
    CHECK(runs.front().train.iterations == 1000);
    CHECK(runs.front().train.train_samples == 1000);

    spec.command = Command::kBench;
    const auto bench = resolve_runs(spec);
    CHECK(bench.size() == 5 * 3 * 5);
    CHECK(bench.front().train.iterations == 500);

    spec.command = Command::kForget;
    const auto forget = resolve_runs(spec);
    REQUIRE(forget.size() == 1);
    CHECK(forget[0].model == ModelVariant::kReluKan2);
    CHECK(forget[0].options.grid == kForgetDefaultGrid);
    CHECK(forget[0].train.iterations == 500);
    CHECK(forget[0].train.train_samples == 300);
}

TEST_CASE("invalid specs fail before any output") {
    const fs::path out = scratch("invalid");
    ExperimentSpec spec;
    spec.out_dir = out;
    spec.functions = {"f2"};
    spec.widths = WidthSpec::parse("2,1");
    CHECK_THROWS_AS(run_fit(spec), ParameterError);
    spec.widths = WidthSpec::parse("1,2");
    CHECK_THROWS_AS(run_fit(spec), ParameterError);
    spec.widths.reset();
    spec.functions = {"f9"};
    CHECK_THROWS_AS(run_fit(spec), ParameterError);
    spec.functions = {"f1"};
    spec.lr = 0.0;
    CHECK_THROWS_AS(run_fit(spec), ParameterError);
    spec.lr = 1e-3;
    spec.grid = 0;
    CHECK_THROWS_AS(run_fit(spec), ParameterError);
    CHECK_FALSE(fs::exists(out));
    CHECK_THROWS_AS(model_variant_from_string("mlp"), ParameterError);
}

TEST_CASE("output paths stay inside the output directory") {
    const fs::path root = scratch("paths");
    CHECK(output_path(root, "fit/summary.csv") == fs::absolute(root / "fit/summary.csv").lexically_normal());
    CHECK_THROWS_AS(output_path(root, "../escape.csv"), ParameterError);
    CHECK_THROWS_AS(output_path(root, "fit/../../escape.csv"), ParameterError);
    CHECK_THROWS_AS(output_path(root, "/etc/passwd"), ParameterError);
}

TEST_CASE("fit with zero iterations writes initial metrics") {
    ExperimentSpec spec;
    spec.out_dir = scratch("fit0");
    spec.functions = {"f1", "f4"};
    spec.models = {ModelVariant::kReluKan2};
    spec.seeds = {3};
    spec.iters = 0;
    const FitResult r = run_fit(spec);
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].initial_train_mse == r.rows[0].final_train_mse);
    const fs::path run1 = spec.out_dir / "fit/f1/relukan2/seed3";
    CHECK(slurp(run1 / "loss.csv") == "iter,loss,seconds\n");
    CHECK(fs::exists(run1 / "curve.csv"));
    CHECK(fs::exists(run1 / "meta.json"));
    CHECK(fs::exists(spec.out_dir / "fit/f4/relukan2/seed3/scatter.csv"));
    CHECK(fs::exists(spec.out_dir / "fit/summary.csv"));
    CHECK(fs::exists(spec.out_dir / "fit/medians.csv"));
    const std::string meta = slurp(run1 / "meta.json");
    CHECK(meta.find("\"schema_version\": 1") != std::string::npos);
    CHECK(meta.find("\"listed_widths\"") != std::string::npos);
}

TEST_CASE("fit outputs are reproducible and independent of worker count") {
    ExperimentSpec spec;
    spec.functions = {"f2"};
    spec.seeds = {1, 2};
    spec.iters = 40;
    spec.samples = 200;
    const fs::path pa = scratch("fitA"), pb = scratch("fitB");
    spec.out_dir = pa;
    const FitResult a = run_fit(spec);
    spec.out_dir = pb;
    spec.jobs = 3;
    const FitResult b = run_fit(spec);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].final_test_mse == b.rows[i].final_test_mse);
    // Column 6 of the summary is wall-clock seconds.
    CHECK(drop_column(slurp(pa / "fit/summary.csv"), 6) == drop_column(slurp(pb / "fit/summary.csv"), 6));
    CHECK(slurp(pa / "fit/medians.csv") == slurp(pb / "fit/medians.csv"));
    CHECK(slurp(pa / "fit/f2/bspline/seed2/curve.csv") == slurp(pb / "fit/f2/bspline/seed2/curve.csv"));
    CHECK(drop_column(slurp(pa / "fit/f2/relukan1/seed1/loss.csv"), 2) ==
          drop_column(slurp(pb / "fit/f2/relukan1/seed1/loss.csv"), 2));
}

TEST_CASE("bench writes timings and ratio columns") {
    ExperimentSpec spec;
    spec.out_dir = scratch("bench");
    spec.functions = {"f2"};
    spec.seeds = {1};
    spec.iters = 20;
    spec.samples = 100;
    const BenchResult r = run_bench(spec);
    CHECK(r.rows.size() == 3);
    REQUIRE(r.find("f2", ModelVariant::kBspline) != nullptr);
    CHECK(r.find("f2", ModelVariant::kBspline)->bspline_ratio == 1.0);
    CHECK(r.find("f2", ModelVariant::kReluKan1)->bspline_ratio > 0.0);
    const std::string summary = slurp(spec.out_dir / "bench/bench_summary.csv");
    CHECK(summary.rfind("function,model,median_total_seconds,median_iter_seconds,bspline_ratio\n", 0) == 0);
    CHECK(slurp(spec.out_dir / "bench/meta.json").find("CPU only") != std::string::npos);
    CHECK(fs::exists(spec.out_dir / "bench/f2/relukan1/seed1/loss.csv"));
}

TEST_CASE("forget writes one grid per phase and the rmse matrix") {
    ExperimentSpec spec;
    spec.out_dir = scratch("forget");
    spec.iters = 10;
    spec.samples = 40;
    spec.grid = 20;
    const auto results = run_forget(spec);
    REQUIRE(results.size() == 1);
    const fs::path dir = spec.out_dir / "forget/relukan2/seed1";
    for (int p = 1; p <= 5; ++p) CHECK(fs::exists(dir / ("phase" + std::to_string(p) + ".csv")));
    const std::string rmse = slurp(dir / "rmse.csv");
    CHECK(rmse.rfind("phase,region1,region2,region3,region4,region5\n", 0) == 0);
    CHECK(std::count(rmse.begin(), rmse.end(), '\n') == 6);

    spec.functions = {"f1"};
    CHECK_THROWS_AS(run_forget(spec), ParameterError);
}

TEST_CASE("gradcheck command writes a per-group table") {
    ExperimentSpec spec;
    spec.command = Command::kGradcheck;
    spec.out_dir = scratch("gc");
    spec.gradcheck_probes = 5;
    const GradcheckReport r = run_gradcheck_command(spec);
    CHECK(r.passed());
    CHECK(slurp(spec.out_dir / "gradcheck/gradcheck.csv").rfind("suite,group,max_rel_error,checked,passed\n", 0) == 0);
    spec.flip_grad_s_sign = true;
    CHECK_FALSE(run_gradcheck_command(spec).passed());
}

TEST_CASE("median helpers") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK(median({}) == 0.0);
    const std::vector<double> t{100, 100, 1, 2, 3};
    CHECK(mean_after_warmup(t, 2) == 2.0);
    CHECK(median_after_warmup(t, 2) == 2.0);
    CHECK(median_after_warmup(t, 5) == 0.0);
}
