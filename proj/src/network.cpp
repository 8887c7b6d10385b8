#include "relukan/network.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "relukan/errors.hpp"

namespace relukan {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

const char* to_string(ModelKind kind) noexcept {
    return kind == ModelKind::kReluKan ? "relukan" : "bspline";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "relukan") return ModelKind::kReluKan;
    if (name == "bspline") return ModelKind::kBspline;
    throw ParameterError("unknown model kind '" + name + "'");
}

WidthSpec WidthSpec::parse(const std::string& comma_list) {
    WidthSpec spec;
    std::stringstream in(comma_list);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            throw ParameterError("widths: '" + item + "' is not a positive integer");
        }
        spec.widths.push_back(value);
    }
    spec.validate();
    return spec;
}

void WidthSpec::validate() const {
    if (widths.size() < 2) throw ParameterError("widths: need at least two entries (input and output)");
    for (auto w : widths) {
        if (w == 0) throw ParameterError("widths: every entry must be >= 1");
    }
}

std::string WidthSpec::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(widths[i]);
    }
    return out;
}

Network Network::build(const NetworkOptions& options, const Rng& rng) {
    options.widths.validate();
    std::vector<Layer> layers;
    for (std::size_t t = 0; t < options.widths.layer_count(); ++t) {
        Rng stream = rng.substream(t);
        const std::size_t n_in = options.widths.widths[t];
        const std::size_t n_out = options.widths.widths[t + 1];
        if (options.kind == ModelKind::kReluKan) {
            ReluKanConfig cfg{n_in, n_out, options.grid, options.span, options.trainable_endpoints,
                              options.norm_mode};
            layers.emplace_back(ReluKanLayer::init(cfg, stream));
        } else {
            BsplineKanConfig cfg{n_in, n_out, options.grid, options.span};
            layers.emplace_back(BsplineKanLayer::init(cfg, stream));
        }
    }
    return Network(options, std::move(layers));
}

Network::Network(NetworkOptions options, std::vector<Layer> layers)
    : options_(std::move(options)), layers_(std::move(layers)) {
    options_.widths.validate();
    if (layers_.size() != options_.widths.layer_count()) {
        throw DimensionError("Network: " + std::to_string(layers_.size()) + " layers for widths " +
                             options_.widths.to_string());
    }
    for (std::size_t t = 0; t < layers_.size(); ++t) {
        const bool relu = std::holds_alternative<ReluKanLayer>(layers_[t]);
        if (relu != (options_.kind == ModelKind::kReluKan)) {
            throw ParameterError("Network: layer " + std::to_string(t) + " kind differs from network kind");
        }
        auto [n_in, n_out] = std::visit(
            [](const auto& l) { return std::pair{l.config().n_in, l.config().n_out}; }, layers_[t]);
        if (n_in != options_.widths.widths[t] || n_out != options_.widths.widths[t + 1]) {
            throw DimensionError("Network: layer " + std::to_string(t) + " maps " +
                                 std::to_string(n_in) + "->" + std::to_string(n_out) +
                                 ", widths require " + std::to_string(options_.widths.widths[t]) +
                                 "->" + std::to_string(options_.widths.widths[t + 1]));
        }
    }
}

Matrix Network::forward_batch(const Matrix& X, NetworkCache* cache) const {
    if (X.cols() != input_width()) {
        throw DimensionError("Network::forward: input has " + std::to_string(X.cols()) +
                             " columns, network expects " + std::to_string(input_width()));
    }
    if (cache) {
        // Existing per-layer caches are reused so their buffers survive across calls.
        cache->layers.resize(layers_.size());
        cache->hidden.resize(layers_.size() - 1);
    }
    Matrix h = X;
    for (std::size_t t = 0; t < layers_.size(); ++t) {
        Matrix out = std::visit(
            overloaded{
                [&](const ReluKanLayer& l) {
                    if (!cache) return l.forward_batch(h, nullptr);
                    if (!std::holds_alternative<ForwardCache>(cache->layers[t])) {
                        cache->layers[t] = ForwardCache{};
                    }
                    return l.forward_batch(h, &std::get<ForwardCache>(cache->layers[t]));
                },
                [&](const BsplineKanLayer& l) {
                    if (!cache) return l.forward_batch(h, nullptr);
                    if (!std::holds_alternative<BsplineCache>(cache->layers[t])) {
                        cache->layers[t] = BsplineCache{};
                    }
                    return l.forward_batch(h, &std::get<BsplineCache>(cache->layers[t]));
                },
            },
            layers_[t]);
        const bool last = t + 1 == layers_.size();
        if (!last) {
            if (cache) cache->hidden[t] = out;
            if (options_.squash_hidden) {
                for (double& v : out.data()) v = sigmoid(v);
            }
        }
        h = std::move(out);
    }
    return h;
}

std::vector<double> Network::forward(std::span<const double> x) const {
    Matrix y = forward_batch(Matrix::row_vector(x), nullptr);
    auto row = y.row(0);
    return {row.begin(), row.end()};
}

NetworkGrads Network::backward_batch(const NetworkCache& cache, const Matrix& grad_Y) const {
    if (cache.layers.size() != layers_.size() || cache.hidden.size() + 1 != layers_.size()) {
        throw ContractError("Network::backward: cache holds " + std::to_string(cache.layers.size()) +
                            " layers, network has " + std::to_string(layers_.size()));
    }
    // Per-layer parameter gradients collected back to front, then flattened.
    std::vector<std::vector<Matrix>> per_layer(layers_.size());
    Matrix upstream = grad_Y;
    for (std::size_t t = layers_.size(); t-- > 0;) {
        Matrix grad_in = std::visit(
            overloaded{
                [&](const ReluKanLayer& l) {
                    const auto* c = std::get_if<ForwardCache>(&cache.layers[t]);
                    if (!c) throw ContractError("Network::backward: cache kind mismatch at layer " + std::to_string(t));
                    ReluKanGrads g = l.backward_batch(*c, upstream);
                    auto& dst = per_layer[t];
                    for (auto& w : g.W) dst.push_back(std::move(w));
                    dst.push_back(std::move(g.S));
                    dst.push_back(std::move(g.E));
                    return std::move(g.x);
                },
                [&](const BsplineKanLayer& l) {
                    const auto* c = std::get_if<BsplineCache>(&cache.layers[t]);
                    if (!c) throw ContractError("Network::backward: cache kind mismatch at layer " + std::to_string(t));
                    BsplineGrads g = l.backward_batch(*c, upstream);
                    auto& dst = per_layer[t];
                    for (auto& w : g.coef) dst.push_back(std::move(w));
                    dst.push_back(std::move(g.base_weight));
                    dst.push_back(std::move(g.spline_weight));
                    return std::move(g.x);
                },
            },
            layers_[t]);
        if (t > 0 && options_.squash_hidden) {
            const Matrix& raw = cache.hidden[t - 1];
            auto src = raw.data();
            auto dst = grad_in.data();
            for (std::size_t n = 0; n < dst.size(); ++n) {
                const double s = sigmoid(src[n]);
                dst[n] *= s * (1.0 - s);
            }
        }
        upstream = std::move(grad_in);
    }
    NetworkGrads out;
    for (auto& layer : per_layer) {
        for (auto& m : layer) out.params.push_back(std::move(m));
    }
    out.x = std::move(upstream);
    return out;
}

std::vector<ParamSlot> Network::param_view() {
    std::vector<ParamSlot> slots;
    for (std::size_t t = 0; t < layers_.size(); ++t) {
        const std::string prefix = "layer" + std::to_string(t) + ".";
        std::visit(overloaded{
                       [&](ReluKanLayer& l) {
                           for (std::size_t c = 0; c < l.W().size(); ++c) {
                               slots.push_back({prefix + "W" + std::to_string(c), l.W()[c].data(), true});
                           }
                           const bool ends = l.config().trainable_endpoints;
                           slots.push_back({prefix + "S", l.S().data(), ends});
                           slots.push_back({prefix + "E", l.E().data(), ends});
                       },
                       [&](BsplineKanLayer& l) {
                           for (std::size_t c = 0; c < l.coef().size(); ++c) {
                               slots.push_back({prefix + "coef" + std::to_string(c), l.coef()[c].data(), true});
                           }
                           slots.push_back({prefix + "w_b", l.base_weight().data(), true});
                           slots.push_back({prefix + "w_s", l.spline_weight().data(), true});
                       },
                   },
                   layers_[t]);
    }
    return slots;
}

std::vector<Matrix> Network::zero_gradients() const {
    std::vector<Matrix> out;
    for (const auto& layer : layers_) {
        std::visit(overloaded{
                       [&](const ReluKanLayer& l) {
                           for (const auto& w : l.W()) out.emplace_back(w.rows(), w.cols());
                           out.emplace_back(l.S().rows(), l.S().cols());
                           out.emplace_back(l.E().rows(), l.E().cols());
                       },
                       [&](const BsplineKanLayer& l) {
                           for (const auto& c : l.coef()) out.emplace_back(c.rows(), c.cols());
                           out.emplace_back(l.base_weight().rows(), l.base_weight().cols());
                           out.emplace_back(l.spline_weight().rows(), l.spline_weight().cols());
                       },
                   },
                   layer);
    }
    return out;
}

std::size_t Network::parameter_count() const noexcept {
    std::size_t total = 0;
    for (const auto& layer : layers_) {
        total += std::visit([](const auto& l) { return l.parameter_count(); }, layer);
    }
    return total;
}

void Network::clamp_widths() noexcept {
    for (auto& layer : layers_) {
        if (auto* l = std::get_if<ReluKanLayer>(&layer); l && l->config().trainable_endpoints) {
            l->clamp_widths();
        }
    }
}

}  // namespace relukan
