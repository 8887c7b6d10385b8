#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relukan/gradcheck.hpp"
#include "relukan/network.hpp"
#include "relukan/relu_kan_layer.hpp"
#include "relukan/targets.hpp"
#include "relukan/training.hpp"

namespace relukan {

enum class Command { kFit, kBench, kForget, kGradcheck };
const char* to_string(Command command) noexcept;

// relukan1 freezes S/E, relukan2 trains them, bspline is the baseline KAN.
enum class ModelVariant { kReluKan1, kReluKan2, kBspline };
const char* to_string(ModelVariant model) noexcept;
ModelVariant model_variant_from_string(const std::string& name);
std::vector<ModelVariant> all_model_variants();

// Architecture for one target. `listed_widths` is the width column of the
// parameter table, which differs from `widths` where the table gives more
// input nodes than the function has arguments.
struct ModelSetting {
    WidthSpec widths;
    WidthSpec listed_widths;
    int grid = 5;
    int span = 3;
};

ModelSetting fit_setting(TargetId target);
ModelSetting bench_setting(TargetId target);

inline constexpr std::uint64_t kForgetDefaultSeed = 1;
inline constexpr int kForgetDefaultGrid = 200;

// Everything a command needs. Unset optionals fall back to the per-command
// and per-function defaults.
struct ExperimentSpec {
    Command command = Command::kFit;
    std::vector<ModelVariant> models;   // empty: fit/bench use all three, forget uses relukan2
    std::vector<std::string> functions; // short ids "f1".."f6"; empty: fit f1, bench f1..f5
    std::optional<WidthSpec> widths;
    std::optional<int> grid;
    std::optional<int> span;
    std::optional<std::size_t> iters;   // forget: per phase
    std::optional<std::size_t> samples; // forget: per phase
    double lr = 1e-3;
    std::vector<std::uint64_t> seeds;   // empty: {1..5}, forget {1}
    NormMode norm_mode = NormMode::kConstant;
    std::filesystem::path out_dir = "results";
    std::size_t jobs = 1;               // fit only; bench and forget always run serially
    bool flip_grad_s_sign = false;      // gradcheck fault hook
    std::size_t gradcheck_probes = 100;
};

// Checks the spec and resolves every default. Throws ParameterError for
// unknown functions, widths that do not match the function arity, or other
// invalid values. Nothing is computed or written before this passes.
struct ResolvedRun {
    ModelVariant model;
    TargetId target;
    std::string function;  // short id
    NetworkOptions options;
    WidthSpec listed_widths;
    TrainConfig train;
};
std::vector<ResolvedRun> resolve_runs(const ExperimentSpec& spec);

Network build_network(const ResolvedRun& run);

struct FitRow {
    std::string function;
    ModelVariant model;
    std::uint64_t seed = 0;
    double initial_train_mse = 0.0;
    double final_train_mse = 0.0;
    double final_test_mse = 0.0;
    double seconds = 0.0;
};

struct FitMedian {
    std::string function;
    ModelVariant model;
    std::size_t runs = 0;
    double median_train_mse = 0.0;
    double median_test_mse = 0.0;
};

struct FitResult {
    std::vector<FitRow> rows;
    std::vector<FitMedian> medians;

    const FitMedian* median(const std::string& function, ModelVariant model) const;
};

struct BenchRow {
    std::string function;
    ModelVariant model;
    std::uint64_t seed = 0;
    double total_seconds = 0.0;
    double iter_mean_seconds = 0.0;    // after warmup
    double iter_median_seconds = 0.0;  // after warmup
    double final_train_mse = 0.0;
};

struct BenchSummary {
    std::string function;
    ModelVariant model;
    double median_total_seconds = 0.0;
    double median_iter_seconds = 0.0;
    double bspline_ratio = 0.0;  // bspline median iter time / this model's
};

struct BenchResult {
    std::vector<BenchRow> rows;
    std::vector<BenchSummary> summary;

    const BenchSummary* find(const std::string& function, ModelVariant model) const;
};

inline constexpr std::size_t kBenchWarmupIterations = 10;

struct ForgetResult {
    ModelVariant model;
    std::uint64_t seed = 0;
    ForgettingReport report;
};

inline constexpr int kOutputSchemaVersion = 1;

FitResult run_fit(const ExperimentSpec& spec);
BenchResult run_bench(const ExperimentSpec& spec);
std::vector<ForgetResult> run_forget(const ExperimentSpec& spec);
GradcheckReport run_gradcheck_command(const ExperimentSpec& spec);

// Mean/median of per-iteration times with the first `warmup` entries dropped.
double mean_after_warmup(const std::vector<double>& seconds, std::size_t warmup);
double median_after_warmup(const std::vector<double>& seconds, std::size_t warmup);
double median(std::vector<double> values);

// Joins `relative` onto `root` and throws ParameterError if the result would
// leave `root`.
std::filesystem::path output_path(const std::filesystem::path& root,
                                  const std::filesystem::path& relative);

}  // namespace relukan
