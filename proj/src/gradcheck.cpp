#include "relukan/gradcheck.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <functional>

#include "relukan/bspline_layer.hpp"
#include "relukan/network.hpp"
#include "relukan/relu_kan_layer.hpp"
#include "relukan/rng.hpp"
#include "relukan/training.hpp"

namespace relukan {

double gradcheck_relative_error(double analytic, double numeric, double floor) noexcept {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

bool GradcheckReport::passed() const noexcept {
    return std::all_of(groups.begin(), groups.end(),
                       [&](const GradcheckGroup& g) { return g.max_rel_error < tolerance; });
}

namespace {

// Collects (analytic, numeric) pairs for one probe, then scores them against
// the probe's largest analytic partial so that partials many orders below
// the probe's gradient scale are judged at the finite-difference noise level.
class Recorder {
public:
    void add(const std::string& suite, const std::string& group, double analytic, double numeric) {
        pending_.push_back({suite, group, analytic, numeric});
    }

    void end_probe() {
        double largest = 0.0;
        for (const auto& e : pending_) largest = std::max(largest, std::abs(e.analytic));
        const double floor = std::max(kGradcheckScaleFloor, kGradcheckProbeScale * largest);
        for (const auto& e : pending_) {
            auto it = std::find_if(groups_.begin(), groups_.end(), [&](const GradcheckGroup& g) {
                return g.suite == e.suite && g.group == e.group;
            });
            if (it == groups_.end()) {
                groups_.push_back({e.suite, e.group, 0.0, 0});
                it = std::prev(groups_.end());
            }
            it->max_rel_error =
                std::max(it->max_rel_error, gradcheck_relative_error(e.analytic, e.numeric, floor));
            ++it->checked;
        }
        pending_.clear();
    }

    std::vector<GradcheckGroup> take() { return std::move(groups_); }

private:
    struct Entry {
        std::string suite;
        std::string group;
        double analytic;
        double numeric;
    };
    std::vector<Entry> pending_;
    std::vector<GradcheckGroup> groups_;
};

double central_difference(double& slot, double h, const std::function<double()>& f) {
    const double saved = slot;
    slot = saved + h;
    const double plus = f();
    slot = saved - h;
    const double minus = f();
    slot = saved;
    return (plus - minus) / (2.0 * h);
}

std::size_t draw_count(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.next_u64() % (hi - lo + 1));
}

bool clear_of_relukan_kinks(const ReluKanLayer& layer, std::span<const double> x, double margin) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < layer.config().n_basis(); ++j) {
            if (std::abs(x[i] - layer.S()(i, j)) < margin || std::abs(x[i] - layer.E()(i, j)) < margin) {
                return false;
            }
        }
    }
    return true;
}

bool clear_of_knots(const BsplineGrid& grid, std::span<const double> x, double margin) {
    for (double v : x) {
        for (double t : grid.knots()) {
            if (std::abs(v - t) < margin) return false;
        }
    }
    return true;
}

// Shifts every endpoint by up to ±0.3 cells so widths and positions differ
// from the uniform initial grid.
void jitter_endpoints(ReluKanLayer& layer, Rng& rng) {
    const double cell = 1.0 / layer.config().grid;
    for (double& s : layer.S().data()) s += rng.uniform(-0.3, 0.3) * cell;
    for (double& e : layer.E().data()) e += rng.uniform(-0.3, 0.3) * cell;
}

void relukan_layer_suite(const GradcheckOptions& opt, NormMode mode, Recorder& rec) {
    const std::string suite = mode == NormMode::kConstant ? "relukan-constant" : "relukan-dynamic";
    for (std::size_t p = 0; p < opt.probes; ++p) {
        Rng rng(opt.seed, 0x52454C55 + (mode == NormMode::kDynamic ? 0x10000 : 0) + p);
        ReluKanConfig cfg;
        cfg.n_in = draw_count(rng, 1, 4);
        cfg.n_out = draw_count(rng, 1, 4);
        cfg.grid = static_cast<int>(draw_count(rng, 1, 10));
        cfg.span = static_cast<int>(draw_count(rng, 0, 3));
        cfg.trainable_endpoints = true;
        cfg.norm_mode = mode;
        ReluKanLayer layer = ReluKanLayer::init(cfg, rng);
        jitter_endpoints(layer, rng);

        std::vector<double> x(cfg.n_in);
        do {
            for (double& v : x) v = rng.uniform(-0.1, 1.1);
        } while (!clear_of_relukan_kinks(layer, x, opt.kink_margin));
        std::vector<double> g(cfg.n_out);
        for (double& v : g) v = rng.normal(0.0, 1.0);

        auto loss = [&] {
            auto y = layer.forward(x).first;
            double acc = 0.0;
            for (std::size_t c = 0; c < y.size(); ++c) acc += g[c] * y[c];
            return acc;
        };
        auto [y, cache] = layer.forward(x);
        ReluKanGrads grads = layer.backward(cache, g);
        if (opt.flip_grad_s_sign) {
            for (double& v : grads.S.data()) v = -v;
        }

        for (std::size_t c = 0; c < cfg.n_out; ++c) {
            auto w = layer.W()[c].data();
            for (std::size_t n = 0; n < w.size(); ++n) {
                rec.add(suite, "W", grads.W[c].data()[n], central_difference(w[n], opt.step, loss));
            }
        }
        auto s = layer.S().data();
        auto e = layer.E().data();
        for (std::size_t n = 0; n < s.size(); ++n) {
            rec.add(suite, "S", grads.S.data()[n], central_difference(s[n], opt.step, loss));
            rec.add(suite, "E", grads.E.data()[n], central_difference(e[n], opt.step, loss));
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            rec.add(suite, "x", grads.x(0, i), central_difference(x[i], opt.step, loss));
        }
        rec.end_probe();
    }
}

void bspline_layer_suite(const GradcheckOptions& opt, Recorder& rec) {
    const std::string suite = "bspline";
    for (std::size_t p = 0; p < opt.probes; ++p) {
        Rng rng(opt.seed, 0x42535046 + p);
        BsplineKanConfig cfg;
        cfg.n_in = draw_count(rng, 1, 4);
        cfg.n_out = draw_count(rng, 1, 4);
        cfg.grid = static_cast<int>(draw_count(rng, 1, 10));
        cfg.order = static_cast<int>(draw_count(rng, 0, 3));
        BsplineKanLayer layer = BsplineKanLayer::init(cfg, rng);
        for (auto& m : layer.coef()) {
            for (double& v : m.data()) v = rng.normal(0.0, 1.0);
        }
        for (double& v : layer.base_weight().data()) v = rng.normal(1.0, 0.5);
        for (double& v : layer.spline_weight().data()) v = rng.normal(1.0, 0.5);

        std::vector<double> x(cfg.n_in);
        do {
            for (double& v : x) v = rng.uniform(-0.1, 1.1);
        } while (!clear_of_knots(layer.grid(), x, opt.kink_margin));
        std::vector<double> g(cfg.n_out);
        for (double& v : g) v = rng.normal(0.0, 1.0);

        auto loss = [&] {
            auto y = layer.forward(x).first;
            double acc = 0.0;
            for (std::size_t c = 0; c < y.size(); ++c) acc += g[c] * y[c];
            return acc;
        };
        auto [y, cache] = layer.forward(x);
        BsplineGrads grads = layer.backward(cache, g);

        for (std::size_t c = 0; c < cfg.n_out; ++c) {
            auto coef = layer.coef()[c].data();
            for (std::size_t n = 0; n < coef.size(); ++n) {
                rec.add(suite, "coef", grads.coef[c].data()[n],
                           central_difference(coef[n], opt.step, loss));
            }
        }
        auto wb = layer.base_weight().data();
        auto ws = layer.spline_weight().data();
        for (std::size_t n = 0; n < wb.size(); ++n) {
            rec.add(suite, "w_b", grads.base_weight.data()[n], central_difference(wb[n], opt.step, loss));
            rec.add(suite, "w_s", grads.spline_weight.data()[n], central_difference(ws[n], opt.step, loss));
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            rec.add(suite, "x", grads.x(0, i), central_difference(x[i], opt.step, loss));
        }
        rec.end_probe();
    }
}

bool network_inputs_clear(const Network& net, const NetworkCache& cache, double margin) {
    for (std::size_t t = 0; t < net.layers().size(); ++t) {
        const Layer& layer = net.layers()[t];
        if (const auto* l = std::get_if<ReluKanLayer>(&layer)) {
            const auto& x = std::get<ForwardCache>(cache.layers[t]).x;
            for (std::size_t r = 0; r < x.rows(); ++r) {
                if (!clear_of_relukan_kinks(*l, x.row(r), margin)) return false;
            }
        } else {
            const auto& bl = std::get<BsplineKanLayer>(layer);
            const auto& x = std::get<BsplineCache>(cache.layers[t]).x;
            if (!clear_of_knots(bl.grid(), x.data(), margin)) return false;
        }
    }
    return true;
}

// "layer1.W12" -> "layer1.W"; names without a trailing index are unchanged.
std::string slot_family(const std::string& name) {
    const auto dot = name.rfind('.');
    std::string out = name;
    while (out.size() > dot + 2 && std::isdigit(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out;
}

void network_suite(const GradcheckOptions& opt, ModelKind kind, Recorder& rec) {
    const std::string suite = kind == ModelKind::kReluKan ? "network-relukan2" : "network-bspline";
    constexpr std::size_t kBatch = 4;
    for (std::size_t p = 0; p < opt.probes; ++p) {
        Rng rng(opt.seed, 0x4E455457 + (kind == ModelKind::kBspline ? 0x10000 : 0) + p);
        NetworkOptions o;
        o.kind = kind;
        o.widths = WidthSpec{{2, 3, 1}};
        o.grid = 5;
        o.span = 3;
        o.trainable_endpoints = true;
        Network net = Network::build(o, rng.substream(p));
        for (auto& layer : net.layers()) {
            if (auto* l = std::get_if<ReluKanLayer>(&layer)) jitter_endpoints(*l, rng);
        }

        Matrix X(kBatch, 2);
        Matrix T(kBatch, 1);
        for (double& v : T.data()) v = rng.normal(0.0, 1.0);
        NetworkCache cache;
        int attempts = 0;
        do {
            for (double& v : X.data()) v = rng.uniform(0.0, 1.0);
            net.forward_batch(X, &cache);
            if (++attempts > 10000) break;
        } while (!network_inputs_clear(net, cache, opt.kink_margin));

        auto loss = [&] { return mse(net.forward_batch(X, nullptr).data(), T.data()); };
        Matrix Y = net.forward_batch(X, &cache);
        auto g = mse_gradient(Y.data(), T.data());
        Matrix grad_Y(kBatch, 1);
        std::copy(g.begin(), g.end(), grad_Y.data().begin());
        NetworkGrads grads = net.backward_batch(cache, grad_Y);

        auto slots = net.param_view();
        for (std::size_t k = 0; k < slots.size(); ++k) {
            const bool is_s = slots[k].name.ends_with(".S");
            for (std::size_t n = 0; n < slots[k].value.size(); ++n) {
                double analytic = grads.params[k].data()[n];
                if (is_s && opt.flip_grad_s_sign) analytic = -analytic;
                rec.add(suite, slot_family(slots[k].name), analytic,
                           central_difference(slots[k].value[n], opt.step, loss));
            }
        }
        for (std::size_t n = 0; n < X.size(); ++n) {
            rec.add(suite, "x", grads.x.data()[n], central_difference(X.data()[n], opt.step, loss));
        }
        rec.end_probe();
    }
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    Recorder rec;
    relukan_layer_suite(options, NormMode::kConstant, rec);
    relukan_layer_suite(options, NormMode::kDynamic, rec);
    bspline_layer_suite(options, rec);
    network_suite(options, ModelKind::kReluKan, rec);
    network_suite(options, ModelKind::kBspline, rec);
    GradcheckReport report;
    report.groups = rec.take();
    report.tolerance = options.tolerance;
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace relukan
