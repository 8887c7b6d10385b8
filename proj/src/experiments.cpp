#include "relukan/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "relukan/errors.hpp"
#include "relukan/serialize.hpp"

namespace relukan {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* to_string(Command command) noexcept {
    switch (command) {
        case Command::kFit: return "fit";
        case Command::kBench: return "bench";
        case Command::kForget: return "forget";
        case Command::kGradcheck: return "gradcheck";
    }
    return "?";
}

const char* to_string(ModelVariant model) noexcept {
    switch (model) {
        case ModelVariant::kReluKan1: return "relukan1";
        case ModelVariant::kReluKan2: return "relukan2";
        case ModelVariant::kBspline: return "bspline";
    }
    return "?";
}

ModelVariant model_variant_from_string(const std::string& name) {
    if (name == "relukan1") return ModelVariant::kReluKan1;
    if (name == "relukan2") return ModelVariant::kReluKan2;
    if (name == "bspline") return ModelVariant::kBspline;
    throw ParameterError("unknown model '" + name + "' (expected relukan1, relukan2 or bspline)");
}

std::vector<ModelVariant> all_model_variants() {
    return {ModelVariant::kReluKan1, ModelVariant::kReluKan2, ModelVariant::kBspline};
}

ModelSetting fit_setting(TargetId target) {
    switch (target) {
        case TargetId::kFitF1: return {{{1, 1}}, {{1, 1}}, 5, 3};
        case TargetId::kFitF2: return {{{1, 1}}, {{2, 1}}, 5, 3};
        case TargetId::kFitF3: return {{{1, 1, 1}}, {{2, 1, 1}}, 5, 3};
        case TargetId::kFitF4: return {{{2, 5, 1}}, {{2, 5, 1}}, 5, 3};
        case TargetId::kFitF5: return {{{2, 5, 1}}, {{2, 5, 1}}, 5, 3};
        case TargetId::kFitF6: return {{{4, 4, 2, 1}}, {{4, 4, 2, 1}}, 10, 3};
        default: break;
    }
    throw ParameterError(std::string("no fitting configuration for ") + target_info(target).name);
}

ModelSetting bench_setting(TargetId target) {
    switch (target) {
        case TargetId::kSpeedF1: return {{{1, 1}}, {{1, 1}}, 5, 3};
        case TargetId::kSpeedF2: return {{{2, 1}}, {{2, 1}}, 5, 3};
        case TargetId::kSpeedF3: return {{{2, 1, 1}}, {{2, 1, 1}}, 5, 3};
        case TargetId::kSpeedF4: return {{{2, 5, 1}}, {{2, 5, 1}}, 5, 3};
        case TargetId::kSpeedF5: return {{{4, 4, 2, 1}}, {{4, 4, 2, 1}}, 10, 3};
        default: break;
    }
    throw ParameterError(std::string("no speed configuration for ") + target_info(target).name);
}

namespace {

std::vector<std::string> default_functions(Command command) {
    switch (command) {
        case Command::kFit: return {"f1"};
        case Command::kBench: return {"f1", "f2", "f3", "f4", "f5"};
        default: return {};
    }
}

std::vector<std::string> expand_functions(const ExperimentSpec& spec) {
    if (spec.functions.empty()) return default_functions(spec.command);
    if (spec.functions.size() == 1 && spec.functions.front() == "all") {
        if (spec.command == Command::kFit) return {"f1", "f2", "f3", "f4", "f5", "f6"};
        return default_functions(spec.command);
    }
    return spec.functions;
}

NetworkOptions make_options(ModelVariant model, const WidthSpec& widths, int grid, int span,
                            NormMode norm) {
    NetworkOptions o;
    o.kind = model == ModelVariant::kBspline ? ModelKind::kBspline : ModelKind::kReluKan;
    o.widths = widths;
    o.grid = grid;
    o.span = span;
    o.trainable_endpoints = model == ModelVariant::kReluKan2;
    o.norm_mode = norm;
    return o;
}

void validate_options(const NetworkOptions& o) {
    o.widths.validate();
    for (std::size_t t = 0; t < o.widths.layer_count(); ++t) {
        const std::size_t n_in = o.widths.widths[t];
        const std::size_t n_out = o.widths.widths[t + 1];
        if (o.kind == ModelKind::kReluKan) {
            ReluKanConfig{n_in, n_out, o.grid, o.span, o.trainable_endpoints, o.norm_mode}.validate();
        } else {
            BsplineKanConfig{n_in, n_out, o.grid, o.span}.validate();
        }
    }
}

}  // namespace

std::vector<ResolvedRun> resolve_runs(const ExperimentSpec& spec) {
    if (spec.command == Command::kGradcheck) return {};
    if (!(spec.lr > 0.0)) throw ParameterError("lr must be positive");
    if (spec.jobs == 0) throw ParameterError("jobs must be at least 1");
    if (spec.samples && *spec.samples == 0) throw ParameterError("samples must be at least 1");
    if (spec.grid && *spec.grid < 1) throw ParameterError("grid must be at least 1");
    if (spec.span && *spec.span < 0) throw ParameterError("span must be non-negative");

    const bool forget = spec.command == Command::kForget;
    std::vector<ModelVariant> models = spec.models;
    if (models.empty()) {
        models = forget ? std::vector<ModelVariant>{ModelVariant::kReluKan2} : all_model_variants();
    }
    std::vector<std::uint64_t> seeds = spec.seeds;
    if (seeds.empty()) {
        seeds = forget ? std::vector<std::uint64_t>{kForgetDefaultSeed}
                       : std::vector<std::uint64_t>{1, 2, 3, 4, 5};
    }

    struct Target {
        TargetId id;
        std::string name;
        ModelSetting setting;
    };
    std::vector<Target> targets;
    if (forget) {
        if (!spec.functions.empty() &&
            !(spec.functions.size() == 1 && spec.functions.front() == "forget5")) {
            throw ParameterError("forget only supports the five-peak target (forget5)");
        }
        targets.push_back({TargetId::kForget5, "forget5", {{{1, 1}}, {{1, 1}}, kForgetDefaultGrid, 3}});
    } else {
        for (const std::string& name : expand_functions(spec)) {
            const TargetId id =
                spec.command == Command::kFit ? fit_target(name) : speed_target(name);
            targets.push_back({id, name,
                               spec.command == Command::kFit ? fit_setting(id) : bench_setting(id)});
        }
    }

    std::vector<ResolvedRun> runs;
    for (const Target& t : targets) {
        const std::size_t arity = target_info(t.id).arity;
        const WidthSpec widths = spec.widths.value_or(t.setting.widths);
        widths.validate();
        if (widths.input_width() != arity) {
            throw ParameterError("widths " + widths.to_string() + " do not fit " + t.name + ": input width " +
                                 std::to_string(widths.input_width()) + " but the function takes " +
                                 std::to_string(arity) + " argument(s)");
        }
        if (widths.output_width() != 1) {
            throw ParameterError("widths " + widths.to_string() + " must end in a single output");
        }
        for (ModelVariant model : models) {
            const NetworkOptions options =
                make_options(model, widths, spec.grid.value_or(t.setting.grid),
                             spec.span.value_or(t.setting.span), spec.norm_mode);
            validate_options(options);
            for (std::uint64_t seed : seeds) {
                ResolvedRun run{model, t.id, t.name, options,
                                spec.widths ? widths : t.setting.listed_widths, {}};
                run.train.adam.lr = spec.lr;
                run.train.seed = seed;
                if (forget) {
                    run.train.iterations = spec.iters.value_or(500);
                    run.train.train_samples = spec.samples.value_or(300);
                } else {
                    run.train.iterations =
                        spec.iters.value_or(spec.command == Command::kBench ? 500 : 1000);
                    run.train.train_samples = spec.samples.value_or(1000);
                    run.train.test_samples = 1000;
                }
                runs.push_back(std::move(run));
            }
        }
    }
    return runs;
}

Network build_network(const ResolvedRun& run) {
    return Network::build(run.options, Rng(run.train.seed));
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_after_warmup(const std::vector<double>& seconds, std::size_t warmup) {
    if (seconds.size() <= warmup) return 0.0;
    double sum = 0.0;
    for (std::size_t i = warmup; i < seconds.size(); ++i) sum += seconds[i];
    return sum / static_cast<double>(seconds.size() - warmup);
}

double median_after_warmup(const std::vector<double>& seconds, std::size_t warmup) {
    if (seconds.size() <= warmup) return 0.0;
    return median(std::vector<double>(seconds.begin() + static_cast<std::ptrdiff_t>(warmup), seconds.end()));
}

fs::path output_path(const fs::path& root, const fs::path& relative) {
    if (relative.is_absolute()) throw ParameterError("output path must be relative: " + relative.string());
    const fs::path base = fs::absolute(root).lexically_normal();
    const fs::path full = (base / relative).lexically_normal();
    const fs::path rel = full.lexically_relative(base);
    if (rel.empty() || *rel.begin() == "..") {
        throw ParameterError("refusing to write outside " + base.string() + ": " + relative.string());
    }
    return full;
}

namespace {

std::ofstream open_output(const fs::path& root, const fs::path& relative) {
    const fs::path path = output_path(root, relative);
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void write_json(const fs::path& root, const fs::path& relative, const json& doc) {
    auto out = open_output(root, relative);
    out << doc.dump(2) << '\n';
}

std::string fmt(double v) { return format_double(v); }

fs::path run_dir(const char* command, const ResolvedRun& run) {
    return fs::path(command) / run.function / to_string(run.model) / ("seed" + std::to_string(run.train.seed));
}

void write_loss_csv(const fs::path& root, const fs::path& dir, const RunReport& report) {
    auto out = open_output(root, dir / "loss.csv");
    out << "iter,loss,seconds\n";
    double elapsed = 0.0;
    for (std::size_t i = 0; i < report.loss_history.size(); ++i) {
        elapsed += report.iteration_seconds[i];
        out << i + 1 << ',' << fmt(report.loss_history[i]) << ',' << fmt(elapsed) << '\n';
    }
}

json run_meta(const char* command, const ResolvedRun& run, const Network& net) {
    json meta;
    meta["schema_version"] = kOutputSchemaVersion;
    meta["command"] = command;
    meta["function"] = run.function;
    meta["formula"] = target_info(run.target).formula;
    meta["model"] = to_string(run.model);
    meta["seed"] = run.train.seed;
    meta["widths"] = run.options.widths.to_string();
    meta["listed_widths"] = run.listed_widths.to_string();
    meta["grid"] = run.options.grid;
    meta["span"] = run.options.span;
    meta["trainable_endpoints"] = run.options.trainable_endpoints;
    if (run.options.kind == ModelKind::kReluKan) meta["norm_mode"] = to_string(run.options.norm_mode);
    meta["parameter_count"] = net.parameter_count();
    meta["optimizer"] = {{"name", "adam"},
                         {"lr", run.train.adam.lr},
                         {"beta1", run.train.adam.beta1},
                         {"beta2", run.train.adam.beta2},
                         {"eps", run.train.adam.eps}};
    meta["iterations"] = run.train.iterations;
    meta["train_samples"] = run.train.train_samples;
    return meta;
}

void add_metrics(json& meta, const RunReport& report) {
    meta["test_samples"] = report.config.test_samples;
    meta["test_seed"] = report.config.seed + kTestSeedOffset;
    meta["initial_train_mse"] = report.initial_train_mse;
    meta["final_train_mse"] = report.final_train_mse;
    meta["final_test_mse"] = report.final_test_mse;
    meta["total_seconds"] = report.total_seconds;
}

inline constexpr std::size_t kCurvePoints = 1000;

FitRow fit_one(const ResolvedRun& run, const fs::path& root) {
    Network net = build_network(run);
    const Dataset train_set = make_dataset(run.target, run.train.train_samples, run.train.seed);
    const Dataset test_set =
        make_dataset(run.target, run.train.test_samples, run.train.seed + kTestSeedOffset);
    const RunReport report = train(net, train_set, test_set, run.train);

    const fs::path dir = run_dir("fit", run);
    write_loss_csv(root, dir, report);
    json meta = run_meta("fit", run, net);
    add_metrics(meta, report);
    meta["loss_columns"] = "iter,loss,seconds";
    if (target_info(run.target).arity == 1) {
        Matrix grid(kCurvePoints, 1);
        for (std::size_t j = 0; j < kCurvePoints; ++j) {
            grid(j, 0) = (static_cast<double>(j) + 0.5) / static_cast<double>(kCurvePoints);
        }
        const auto pred = predict(net, grid);
        auto out = open_output(root, dir / "curve.csv");
        out << "x,target,prediction\n";
        for (std::size_t j = 0; j < kCurvePoints; ++j) {
            const double x = grid(j, 0);
            out << fmt(x) << ',' << fmt(evaluate_target(run.target, {&x, 1})) << ',' << fmt(pred[j]) << '\n';
        }
        meta["fit_file"] = "curve.csv";
        meta["fit_columns"] = "x,target,prediction";
    } else {
        const auto pred = predict(net, test_set.inputs);
        auto out = open_output(root, dir / "scatter.csv");
        out << "true,predicted\n";
        for (std::size_t t = 0; t < pred.size(); ++t) {
            out << fmt(test_set.targets(t, 0)) << ',' << fmt(pred[t]) << '\n';
        }
        meta["fit_file"] = "scatter.csv";
        meta["fit_columns"] = "true,predicted";
    }
    write_json(root, dir / "meta.json", meta);

    return {run.function, run.model, run.train.seed, report.initial_train_mse, report.final_train_mse,
            report.final_test_mse, report.total_seconds};
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Rethrows the exception
// of the lowest failing index so the reported failure does not depend on
// scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(jobs, n);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

const FitMedian* FitResult::median(const std::string& function, ModelVariant model) const {
    for (const auto& m : medians) {
        if (m.function == function && m.model == model) return &m;
    }
    return nullptr;
}

const BenchSummary* BenchResult::find(const std::string& function, ModelVariant model) const {
    for (const auto& s : summary) {
        if (s.function == function && s.model == model) return &s;
    }
    return nullptr;
}

FitResult run_fit(const ExperimentSpec& spec) {
    ExperimentSpec s = spec;
    s.command = Command::kFit;
    const auto runs = resolve_runs(s);
    const fs::path root = spec.out_dir;

    FitResult result;
    result.rows.resize(runs.size());
    parallel_for(runs.size(), spec.jobs, [&](std::size_t i) { result.rows[i] = fit_one(runs[i], root); });

    for (const auto& row : result.rows) {
        const bool seen = std::any_of(result.medians.begin(), result.medians.end(), [&](const FitMedian& m) {
            return m.function == row.function && m.model == row.model;
        });
        if (seen) continue;
        std::vector<double> train_mse, test_mse;
        for (const auto& r : result.rows) {
            if (r.function == row.function && r.model == row.model) {
                train_mse.push_back(r.final_train_mse);
                test_mse.push_back(r.final_test_mse);
            }
        }
        result.medians.push_back(
            {row.function, row.model, test_mse.size(), relukan::median(train_mse), relukan::median(test_mse)});
    }

    {
        auto out = open_output(root, "fit/summary.csv");
        out << "function,model,seed,initial_train_mse,final_train_mse,final_test_mse,seconds\n";
        for (const auto& r : result.rows) {
            out << r.function << ',' << to_string(r.model) << ',' << r.seed << ',' << fmt(r.initial_train_mse)
                << ',' << fmt(r.final_train_mse) << ',' << fmt(r.final_test_mse) << ',' << fmt(r.seconds)
                << '\n';
        }
    }
    {
        auto out = open_output(root, "fit/medians.csv");
        out << "function,model,runs,median_train_mse,median_test_mse\n";
        for (const auto& m : result.medians) {
            out << m.function << ',' << to_string(m.model) << ',' << m.runs << ',' << fmt(m.median_train_mse)
                << ',' << fmt(m.median_test_mse) << '\n';
        }
    }
    return result;
}

BenchResult run_bench(const ExperimentSpec& spec) {
    ExperimentSpec s = spec;
    s.command = Command::kBench;
    auto runs = resolve_runs(s);
    const fs::path root = spec.out_dir;

    // Interleave models within each (function, seed) so that slow drifts in
    // machine load affect every model alike.
    std::stable_sort(runs.begin(), runs.end(), [](const ResolvedRun& a, const ResolvedRun& b) {
        if (a.function != b.function) return a.function < b.function;
        return a.train.seed < b.train.seed;
    });

    BenchResult result;
    for (const auto& run : runs) {
        Network net = build_network(run);
        const Dataset train_set = make_dataset(run.target, run.train.train_samples, run.train.seed);
        const Dataset test_set =
            make_dataset(run.target, run.train.test_samples, run.train.seed + kTestSeedOffset);
        const RunReport report = train(net, train_set, test_set, run.train);
        const fs::path dir = run_dir("bench", run);
        write_loss_csv(root, dir, report);
        json meta = run_meta("bench", run, net);
        add_metrics(meta, report);
        write_json(root, dir / "meta.json", meta);
        result.rows.push_back({run.function, run.model, run.train.seed, report.total_seconds,
                               mean_after_warmup(report.iteration_seconds, kBenchWarmupIterations),
                               median_after_warmup(report.iteration_seconds, kBenchWarmupIterations),
                               report.final_train_mse});
    }

    for (const auto& row : result.rows) {
        if (result.find(row.function, row.model)) continue;
        std::vector<double> totals, iters;
        for (const auto& r : result.rows) {
            if (r.function == row.function && r.model == row.model) {
                totals.push_back(r.total_seconds);
                iters.push_back(r.iter_median_seconds);
            }
        }
        result.summary.push_back({row.function, row.model, median(totals), median(iters), 0.0});
    }
    for (auto& s_row : result.summary) {
        const BenchSummary* base = result.find(s_row.function, ModelVariant::kBspline);
        if (base && s_row.median_iter_seconds > 0.0) {
            s_row.bspline_ratio = base->median_iter_seconds / s_row.median_iter_seconds;
        }
    }

    {
        auto out = open_output(root, "bench/bench_runs.csv");
        out << "function,model,seed,total_seconds,iter_mean_seconds,iter_median_seconds,final_train_mse\n";
        for (const auto& r : result.rows) {
            out << r.function << ',' << to_string(r.model) << ',' << r.seed << ',' << fmt(r.total_seconds) << ','
                << fmt(r.iter_mean_seconds) << ',' << fmt(r.iter_median_seconds) << ','
                << fmt(r.final_train_mse) << '\n';
        }
    }
    {
        auto out = open_output(root, "bench/bench_summary.csv");
        out << "function,model,median_total_seconds,median_iter_seconds,bspline_ratio\n";
        for (const auto& r : result.summary) {
            out << r.function << ',' << to_string(r.model) << ',' << fmt(r.median_total_seconds) << ','
                << fmt(r.median_iter_seconds) << ',';
            if (result.find(r.function, ModelVariant::kBspline)) out << fmt(r.bspline_ratio);
            out << '\n';
        }
    }
    json meta;
    meta["schema_version"] = kOutputSchemaVersion;
    meta["command"] = "bench";
    meta["device"] = "CPU only";
    meta["note"] = "GPU timings are not measured; times are wall clock of forward, backward and optimizer step";
    meta["warmup_iterations_dropped"] = kBenchWarmupIterations;
    meta["threads"] = 1;
    meta["hardware_concurrency"] = std::thread::hardware_concurrency();
    meta["runs_columns"] = "function,model,seed,total_seconds,iter_mean_seconds,iter_median_seconds,final_train_mse";
    meta["summary_columns"] = "function,model,median_total_seconds,median_iter_seconds,bspline_ratio";
    write_json(root, "bench/meta.json", meta);
    return result;
}

std::vector<ForgetResult> run_forget(const ExperimentSpec& spec) {
    ExperimentSpec s = spec;
    s.command = Command::kForget;
    const auto runs = resolve_runs(s);
    const fs::path root = spec.out_dir;

    std::vector<ForgetResult> results;
    for (const auto& run : runs) {
        Network net = build_network(run);
        ForgettingConfig fc;
        fc.samples_per_phase = run.train.train_samples;
        fc.iterations_per_phase = run.train.iterations;
        fc.adam = run.train.adam;
        fc.seed = run.train.seed;
        ForgettingReport report = forgetting_protocol(net, fc);

        const fs::path dir = fs::path("forget") / to_string(run.model) / ("seed" + std::to_string(run.train.seed));
        for (std::size_t p = 0; p < report.predictions.size(); ++p) {
            auto out = open_output(root, dir / ("phase" + std::to_string(p + 1) + ".csv"));
            out << "x,target,prediction\n";
            for (std::size_t j = 0; j < report.grid_x.size(); ++j) {
                out << fmt(report.grid_x[j]) << ',' << fmt(report.grid_target[j]) << ','
                    << fmt(report.predictions[p][j]) << '\n';
            }
        }
        {
            auto out = open_output(root, dir / "rmse.csv");
            out << "phase";
            for (std::size_t r = 0; r < report.rmse.cols(); ++r) out << ",region" << r + 1;
            out << '\n';
            for (std::size_t p = 0; p < report.rmse.rows(); ++p) {
                out << p + 1;
                for (std::size_t r = 0; r < report.rmse.cols(); ++r) out << ',' << fmt(report.rmse(p, r));
                out << '\n';
            }
        }
        json meta = run_meta("forget", run, net);
        meta["target"] = {{"peaks", fc.target.peaks}, {"sigma", fc.target.sigma}};
        meta["iterations_per_phase"] = fc.iterations_per_phase;
        meta["samples_per_phase"] = fc.samples_per_phase;
        meta["grid_points"] = fc.grid_points;
        meta["optimizer_state"] = "reset at the start of every phase";
        meta["phase_columns"] = "x,target,prediction";
        meta["rmse_columns"] = "phase,region1..regionP";
        json phases = json::array();
        for (const auto& ph : report.phases) {
            phases.push_back({{"final_train_mse", ph.final_train_mse},
                              {"final_test_mse", ph.final_test_mse},
                              {"seconds", ph.total_seconds}});
        }
        meta["phases"] = phases;
        write_json(root, dir / "meta.json", meta);
        results.push_back({run.model, run.train.seed, std::move(report)});
    }
    return results;
}

GradcheckReport run_gradcheck_command(const ExperimentSpec& spec) {
    GradcheckOptions options;
    if (!spec.seeds.empty()) options.seed = spec.seeds.front();
    options.probes = spec.gradcheck_probes;
    options.flip_grad_s_sign = spec.flip_grad_s_sign;
    GradcheckReport report = run_gradcheck(options);

    auto out = open_output(spec.out_dir, "gradcheck/gradcheck.csv");
    out << "suite,group,max_rel_error,checked,passed\n";
    for (const auto& g : report.groups) {
        out << g.suite << ',' << g.group << ',' << fmt(g.max_rel_error) << ',' << g.checked << ','
            << (g.max_rel_error < report.tolerance ? 1 : 0) << '\n';
    }
    return report;
}

}  // namespace relukan
