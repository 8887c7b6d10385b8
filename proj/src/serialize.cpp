#include "relukan/serialize.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "relukan/errors.hpp"

namespace relukan {

std::string format_double(double value) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), ptr);
}

namespace {

class FormatError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

std::string next_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok)) throw FormatError(std::string("unexpected end of record reading ") + what);
    return tok;
}

void expect(std::istream& in, const std::string& keyword) {
    const std::string tok = next_token(in, keyword.c_str());
    if (tok != keyword) throw FormatError("expected '" + keyword + "', found '" + tok + "'");
}

template <typename T>
T read_number(std::istream& in, const char* what) {
    const std::string tok = next_token(in, what);
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw FormatError(std::string("bad number '") + tok + "' for " + what);
    }
    return value;
}

void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << ' ' << m.cols();
    for (double v : m.data()) out << ' ' << format_double(v);
    out << '\n';
}

Matrix read_matrix(std::istream& in) {
    const auto rows = read_number<std::size_t>(in, "rows");
    const auto cols = read_number<std::size_t>(in, "cols");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = read_number<double>(in, "matrix value");
    return m;
}

void expect_header(std::istream& in, const char* tag, int version) {
    expect(in, tag);
    const int found = read_number<int>(in, "version");
    if (found != version) {
        throw FormatError(std::string(tag) + ": unsupported version " + std::to_string(found));
    }
}

}  // namespace

void write_layer(std::ostream& out, const ReluKanLayer& layer) {
    const auto& c = layer.config();
    out << "RELUKAN_LAYER " << kLayerRecordVersion << '\n';
    out << "config " << c.n_in << ' ' << c.n_out << ' ' << c.grid << ' ' << c.span << ' '
        << (c.trainable_endpoints ? 1 : 0) << ' ' << to_string(c.norm_mode) << '\n';
    out << "S ";
    write_matrix(out, layer.S());
    out << "E ";
    write_matrix(out, layer.E());
    out << "W " << layer.W().size() << '\n';
    for (const auto& w : layer.W()) write_matrix(out, w);
    out << "END\n";
}

void write_layer(std::ostream& out, const BsplineKanLayer& layer) {
    const auto& c = layer.config();
    out << "BSPLINE_LAYER " << kLayerRecordVersion << '\n';
    out << "config " << c.n_in << ' ' << c.n_out << ' ' << c.grid << ' ' << c.order << '\n';
    out << "coef " << layer.coef().size() << '\n';
    for (const auto& m : layer.coef()) write_matrix(out, m);
    out << "w_b ";
    write_matrix(out, layer.base_weight());
    out << "w_s ";
    write_matrix(out, layer.spline_weight());
    out << "END\n";
}

ReluKanLayer read_relukan_layer(std::istream& in) {
    expect_header(in, "RELUKAN_LAYER", kLayerRecordVersion);
    expect(in, "config");
    ReluKanConfig c;
    c.n_in = read_number<std::size_t>(in, "n_in");
    c.n_out = read_number<std::size_t>(in, "n_out");
    c.grid = read_number<int>(in, "grid");
    c.span = read_number<int>(in, "span");
    c.trainable_endpoints = read_number<int>(in, "trainable_endpoints") != 0;
    c.norm_mode = norm_mode_from_string(next_token(in, "norm_mode"));
    expect(in, "S");
    Matrix S = read_matrix(in);
    expect(in, "E");
    Matrix E = read_matrix(in);
    expect(in, "W");
    const auto count = read_number<std::size_t>(in, "W count");
    std::vector<Matrix> W;
    for (std::size_t i = 0; i < count; ++i) W.push_back(read_matrix(in));
    expect(in, "END");
    return ReluKanLayer(c, std::move(S), std::move(E), std::move(W));
}

BsplineKanLayer read_bspline_layer(std::istream& in) {
    expect_header(in, "BSPLINE_LAYER", kLayerRecordVersion);
    expect(in, "config");
    BsplineKanConfig c;
    c.n_in = read_number<std::size_t>(in, "n_in");
    c.n_out = read_number<std::size_t>(in, "n_out");
    c.grid = read_number<int>(in, "grid");
    c.order = read_number<int>(in, "order");
    expect(in, "coef");
    const auto count = read_number<std::size_t>(in, "coef count");
    std::vector<Matrix> coef;
    for (std::size_t i = 0; i < count; ++i) coef.push_back(read_matrix(in));
    expect(in, "w_b");
    Matrix wb = read_matrix(in);
    expect(in, "w_s");
    Matrix ws = read_matrix(in);
    expect(in, "END");
    return BsplineKanLayer(c, std::move(coef), std::move(wb), std::move(ws));
}

void write_checkpoint(std::ostream& out, const Network& net) {
    const auto& o = net.options();
    out << "KAN_CHECKPOINT " << kCheckpointVersion << '\n'
        << "kind " << to_string(o.kind) << '\n'
        << "widths " << o.widths.to_string() << '\n'
        << "grid " << o.grid << '\n'
        << "span " << o.span << '\n'
        << "trainable_endpoints " << (o.trainable_endpoints ? 1 : 0) << '\n'
        << "norm_mode " << to_string(o.norm_mode) << '\n'
        << "squash_hidden " << (o.squash_hidden ? 1 : 0) << '\n'
        << "layers " << net.layers().size() << '\n';
    for (const auto& layer : net.layers()) {
        std::visit([&](const auto& l) { write_layer(out, l); }, layer);
    }
}

Network read_checkpoint(std::istream& in) {
    expect_header(in, "KAN_CHECKPOINT", kCheckpointVersion);
    NetworkOptions o;
    expect(in, "kind");
    o.kind = model_kind_from_string(next_token(in, "kind"));
    expect(in, "widths");
    o.widths = WidthSpec::parse(next_token(in, "widths"));
    expect(in, "grid");
    o.grid = read_number<int>(in, "grid");
    expect(in, "span");
    o.span = read_number<int>(in, "span");
    expect(in, "trainable_endpoints");
    o.trainable_endpoints = read_number<int>(in, "trainable_endpoints") != 0;
    expect(in, "norm_mode");
    o.norm_mode = norm_mode_from_string(next_token(in, "norm_mode"));
    expect(in, "squash_hidden");
    o.squash_hidden = read_number<int>(in, "squash_hidden") != 0;
    expect(in, "layers");
    const auto count = read_number<std::size_t>(in, "layer count");
    std::vector<Layer> layers;
    for (std::size_t t = 0; t < count; ++t) {
        if (o.kind == ModelKind::kReluKan) {
            layers.emplace_back(read_relukan_layer(in));
        } else {
            layers.emplace_back(read_bspline_layer(in));
        }
    }
    return Network(std::move(o), std::move(layers));
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot open '" + path.string() + "' for writing");
    write_checkpoint(out, net);
    if (!out) throw ParameterError("failed writing checkpoint '" + path.string() + "'");
}

Network load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open checkpoint '" + path.string() + "'");
    return read_checkpoint(in);
}

}  // namespace relukan
