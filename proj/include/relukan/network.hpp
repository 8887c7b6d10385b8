#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "relukan/bspline_layer.hpp"
#include "relukan/matrix.hpp"
#include "relukan/relu_kan_layer.hpp"
#include "relukan/rng.hpp"

namespace relukan {

enum class ModelKind { kReluKan, kBspline };

const char* to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(const std::string& name);

// [n_1, ..., n_L] describes L-1 layers; layer t maps n_t inputs to n_{t+1}.
struct WidthSpec {
    std::vector<std::size_t> widths;

    static WidthSpec parse(const std::string& comma_list);
    void validate() const;
    std::size_t layer_count() const noexcept { return widths.size() - 1; }
    std::size_t input_width() const noexcept { return widths.front(); }
    std::size_t output_width() const noexcept { return widths.back(); }
    std::string to_string() const;
    bool operator==(const WidthSpec&) const = default;
};

struct NetworkOptions {
    ModelKind kind = ModelKind::kReluKan;
    WidthSpec widths{{1, 1}};
    int grid = 5;
    int span = 3;
    bool trainable_endpoints = true;  // ReLU-KAN only
    NormMode norm_mode = NormMode::kConstant;
    // Apply sigmoid to hidden-layer outputs before the next layer. Off by default.
    bool squash_hidden = false;

    bool operator==(const NetworkOptions&) const = default;
};

using Layer = std::variant<ReluKanLayer, BsplineKanLayer>;
using LayerCache = std::variant<ForwardCache, BsplineCache>;

struct NetworkCache {
    std::vector<LayerCache> layers;
    std::vector<Matrix> hidden;  // raw outputs of layers 0..L-2 (pre-squash)
};

// One trainable tensor as seen by the optimizer.
struct ParamSlot {
    std::string name;  // e.g. "layer0.W2", "layer1.S", "layer0.coef0", "layer0.w_b"
    std::span<double> value;
    bool trainable = true;
};

// Gradients aligned with Network::param_view(); x is the input gradient.
struct NetworkGrads {
    std::vector<Matrix> params;
    Matrix x;
};

class Network {
public:
    // Layer t draws from rng.substream(t).
    static Network build(const NetworkOptions& options, const Rng& rng);

    Network(NetworkOptions options, std::vector<Layer> layers);

    const NetworkOptions& options() const noexcept { return options_; }
    ModelKind kind() const noexcept { return options_.kind; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }
    std::size_t input_width() const noexcept { return options_.widths.input_width(); }
    std::size_t output_width() const noexcept { return options_.widths.output_width(); }

    Matrix forward_batch(const Matrix& X, NetworkCache* cache) const;
    std::vector<double> forward(std::span<const double> x) const;
    NetworkGrads backward_batch(const NetworkCache& cache, const Matrix& grad_Y) const;

    // Order: by layer, then W^1..W^m, S, E (ReLU-KAN) or coef^1..coef^m,
    // w_b, w_s (B-spline). Frozen S/E appear with trainable = false.
    std::vector<ParamSlot> param_view();
    std::vector<Matrix> zero_gradients() const;
    std::size_t parameter_count() const noexcept;

    // Width repair on every ReLU-KAN layer with trainable endpoints.
    void clamp_widths() noexcept;

private:
    NetworkOptions options_;
    std::vector<Layer> layers_;
};

}  // namespace relukan
