// Command-line driver for the fitting, timing, forgetting and gradient-check
// experiments. Exit codes: 0 success, 1 usage error, 2 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relukan/errors.hpp"
#include "relukan/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw relukan::ParameterError("empty entry in list '" + text + "'");
        out.push_back(item);
    }
    if (out.empty()) throw relukan::ParameterError("empty list");
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const auto& item : split_list(text)) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size() || item.front() == '-') {
            throw relukan::ParameterError("invalid seed '" + item + "'");
        }
        seeds.push_back(v);
    }
    return seeds;
}

void print_fit(const relukan::FitResult& r) {
    std::printf("%-4s %-9s %6s %14s %14s %9s\n", "fn", "model", "seed", "train_mse", "test_mse", "seconds");
    for (const auto& row : r.rows) {
        std::printf("%-4s %-9s %6llu %14.6e %14.6e %9.3f\n", row.function.c_str(), to_string(row.model),
                    static_cast<unsigned long long>(row.seed), row.final_train_mse, row.final_test_mse,
                    row.seconds);
    }
    std::printf("\nmedians over seeds\n");
    for (const auto& m : r.medians) {
        std::printf("%-4s %-9s runs=%zu test_mse=%.6e\n", m.function.c_str(), to_string(m.model), m.runs,
                    m.median_test_mse);
    }
}

void print_bench(const relukan::BenchResult& r) {
    std::printf("%-4s %-9s %12s %14s %10s\n", "fn", "model", "total_s", "iter_median_s", "bspline/x");
    for (const auto& s : r.summary) {
        std::printf("%-4s %-9s %12.4f %14.6e %10.2f\n", s.function.c_str(), to_string(s.model),
                    s.median_total_seconds, s.median_iter_seconds, s.bspline_ratio);
    }
    std::printf("CPU only; GPU timings are not measured\n");
}

void print_forget(const std::vector<relukan::ForgetResult>& results) {
    for (const auto& res : results) {
        std::printf("%s seed %llu: RMSE by phase (rows) and region (columns)\n", to_string(res.model),
                    static_cast<unsigned long long>(res.seed));
        const auto& m = res.report.rmse;
        for (std::size_t p = 0; p < m.rows(); ++p) {
            std::printf("  phase %zu:", p + 1);
            for (std::size_t c = 0; c < m.cols(); ++c) std::printf(" %9.5f", m(p, c));
            std::printf("\n");
        }
    }
}

int print_gradcheck(const relukan::GradcheckReport& report) {
    std::printf("%-18s %-12s %12s %8s\n", "suite", "group", "max_rel_err", "checked");
    for (const auto& g : report.groups) {
        std::printf("%-18s %-12s %12.3e %8zu %s\n", g.suite.c_str(), g.group.c_str(), g.max_rel_error,
                    g.checked, g.max_rel_error < report.tolerance ? "ok" : "FAIL");
    }
    std::printf("tolerance %.0e, %.2f s: %s\n", report.tolerance, report.seconds,
                report.passed() ? "passed" : "FAILED");
    return report.passed() ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ReLU-KAN and B-spline KAN experiments"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string function, model, widths, seeds, norm_mode = "constant";
    std::optional<int> grid, span;
    std::optional<std::size_t> iters, samples;
    double lr = 1e-3;
    std::size_t jobs = 1, probes = 100;
    std::string out_dir = "results";
    bool flip = false;

    app.add_option("--function", function, "Target id (f1..f6 for fit, f1..f5 for bench), comma list or 'all'");
    app.add_option("--model", model, "relukan1, relukan2, bspline or a comma list");
    app.add_option("--widths", widths, "Layer widths as a comma list, e.g. 2,5,1");
    app.add_option("--grid", grid, "Grid size G");
    app.add_option("--span", span, "Span / spline order k");
    app.add_option("--iters", iters, "Training iterations (forget: per phase)");
    app.add_option("--samples", samples, "Training samples (forget: per phase)");
    app.add_option("--lr", lr, "Adam learning rate");
    app.add_option("--seeds", seeds, "Seeds as a comma list");
    app.add_option("--norm-mode", norm_mode, "ReLU-KAN normalization")->check(CLI::IsMember({"constant", "dynamic"}));
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--jobs", jobs, "Parallel workers for fit seed sweeps")->check(CLI::PositiveNumber);

    auto* fit = app.add_subcommand("fit", "Fitting accuracy runs");
    auto* bench = app.add_subcommand("bench", "Training time comparison");
    auto* forget = app.add_subcommand("forget", "Five-peak catastrophic forgetting protocol");
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    gradcheck->add_option("--probes", probes, "Probes per suite")->check(CLI::PositiveNumber);
    gradcheck->add_flag("--inject-grad-s-sign-flip", flip, "Test hook: negate the analytic dS");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    relukan::ExperimentSpec spec;
    try {
        if (!function.empty()) spec.functions = split_list(function);
        if (!model.empty()) {
            for (const auto& m : split_list(model)) spec.models.push_back(relukan::model_variant_from_string(m));
        }
        if (!widths.empty()) spec.widths = relukan::WidthSpec::parse(widths);
        if (!seeds.empty()) spec.seeds = parse_seeds(seeds);
        spec.grid = grid;
        spec.span = span;
        spec.iters = iters;
        spec.samples = samples;
        spec.lr = lr;
        spec.norm_mode = relukan::norm_mode_from_string(norm_mode);
        spec.out_dir = out_dir;
        spec.jobs = jobs;
        spec.gradcheck_probes = probes;
        spec.flip_grad_s_sign = flip;
        if (*fit) spec.command = relukan::Command::kFit;
        if (*bench) spec.command = relukan::Command::kBench;
        if (*forget) spec.command = relukan::Command::kForget;
        if (*gradcheck) spec.command = relukan::Command::kGradcheck;
        relukan::resolve_runs(spec);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        switch (spec.command) {
            case relukan::Command::kFit: print_fit(relukan::run_fit(spec)); break;
            case relukan::Command::kBench: print_bench(relukan::run_bench(spec)); break;
            case relukan::Command::kForget: print_forget(relukan::run_forget(spec)); break;
            case relukan::Command::kGradcheck:
                return print_gradcheck(relukan::run_gradcheck_command(spec));
        }
    } catch (const relukan::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    std::printf("outputs written under %s\n", out_dir.c_str());
    return kExitOk;
}
