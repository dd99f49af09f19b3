#include "hamlearn/models.hpp"

#include <cassert>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hamlearn/errors.hpp"
#include "hamlearn/rng.hpp"
#include "hamlearn/textio.hpp"

namespace hamlearn::models {

using json = nlohmann::json;

std::string to_string(Variant v) { return v == Variant::Separable ? "separable" : "chain"; }

Variant parse_variant(const std::string& s) {
    if (s == "separable") return Variant::Separable;
    if (s == "chain") return Variant::Chain;
    throw FormatError("unknown model variant '" + s + "'");
}

int ModelParams::param_count() const {
    int n = static_cast<int>(A.size() + b.size());
    for (const auto& l : layers) n += static_cast<int>(l.W.size() + l.b.size());
    return n;
}

void ModelParams::pack(std::span<double> out) const {
    size_t o = 0;
    for (double v : A) out[o++] = v;
    for (double v : b) out[o++] = v;
    for (const auto& l : layers) {
        for (double v : l.W) out[o++] = v;
        for (double v : l.b) out[o++] = v;
    }
    assert(o == out.size());
}

void ModelParams::unpack(std::span<const double> theta) {
    size_t o = 0;
    for (double& v : A) v = theta[o++];
    for (double& v : b) v = theta[o++];
    for (auto& l : layers) {
        for (double& v : l.W) v = theta[o++];
        for (double& v : l.b) v = theta[o++];
    }
    assert(o == theta.size());
}

void ModelParams::validate() const {
    const int asz = variant == Variant::Separable ? qdim : k;
    if (static_cast<int>(A.size()) != asz * asz)
        throw FormatError("model: A has wrong size");
    if (variant == Variant::Chain) {
        if (qdim != 3 * k) throw FormatError("model: chain variant requires qdim = 3k");
        if (static_cast<int>(b.size()) != k) throw FormatError("model: b has wrong size");
    } else if (!b.empty()) {
        throw FormatError("model: separable variant carries no b vector");
    }
    if (layers.empty()) throw FormatError("model: potential network has no layers");
    int prev = qdim;
    for (const auto& l : layers) {
        if (l.cols != prev || static_cast<int>(l.W.size()) != l.rows * l.cols ||
            static_cast<int>(l.b.size()) != l.rows)
            throw FormatError("model: layer shapes do not chain");
        prev = l.rows;
    }
    if (prev != 1) throw FormatError("model: potential output dimension must be 1");
    if (activation != "tanh") throw FormatError("model: unsupported activation '" + activation + "'");
}

namespace {

std::vector<Layer> init_layers(int in_dim, const std::vector<int>& hidden, Rng& rng) {
    std::vector<Layer> layers;
    std::vector<int> dims;
    dims.push_back(in_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(1);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Layer lay;
        lay.cols = dims[l];
        lay.rows = dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(lay.cols));
        lay.W.resize(static_cast<size_t>(lay.rows) * lay.cols);
        lay.b.assign(static_cast<size_t>(lay.rows), 0.0);
        for (double& w : lay.W) w = rng.uniform(-bound, bound);
        layers.push_back(std::move(lay));
    }
    return layers;
}

} // namespace

ModelParams init_separable(int n, const std::vector<int>& hidden, std::uint64_t seed) {
    ModelParams p;
    p.variant = Variant::Separable;
    p.qdim = n;
    p.k = 0;
    p.A.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) p.A[static_cast<size_t>(i) * n + i] = 1.0;
    Rng rng(seed);
    p.layers = init_layers(n, hidden, rng);
    p.validate();
    return p;
}

ModelParams init_chain(int k, const std::vector<int>& hidden, std::uint64_t seed) {
    ModelParams p;
    p.variant = Variant::Chain;
    p.qdim = 3 * k;
    p.k = k;
    p.A.assign(static_cast<size_t>(k) * k, 0.0);
    for (int i = 0; i < k; ++i) p.A[static_cast<size_t>(i) * k + i] = 1.0;
    p.b.assign(static_cast<size_t>(k), 0.0);
    Rng rng(seed);
    p.layers = init_layers(3 * k, hidden, rng);
    p.validate();
    return p;
}

ModelRef<double> make_value_ref(const ModelParams& params) {
    ModelRef<double> r;
    r.variant = params.variant;
    r.qdim = params.qdim;
    r.k = params.k;
    r.A = params.A;
    r.b = params.b;
    for (const auto& l : params.layers)
        r.layers.push_back({l.rows, l.cols, l.W, l.b});
    return r;
}

ModelRef<diff::Expr> make_param_ref(diff::Tape& tape, const ModelParams& params) {
    ModelRef<diff::Expr> r;
    r.variant = params.variant;
    r.qdim = params.qdim;
    r.k = params.k;
    int slot = 0;
    auto take = [&](const std::vector<double>& src, std::vector<diff::Expr>& dst) {
        dst.reserve(src.size());
        for (double v : src) dst.push_back(tape.param(slot++, v));
    };
    take(params.A, r.A);
    take(params.b, r.b);
    for (const auto& l : params.layers) {
        typename ModelRef<diff::Expr>::L lay;
        lay.rows = l.rows;
        lay.cols = l.cols;
        take(l.W, lay.W);
        take(l.b, lay.b);
        r.layers.push_back(std::move(lay));
    }
    return r;
}

GradientPair eval_with_input_grad(const ModelParams& params, std::span<const double> x) {
    const ModelRef<double> ref = make_value_ref(params);
    HamEval<double> ev = eval_hamiltonian<double>(ref, x);
    GradientPair g;
    g.value = ev.value;
    g.grad.reserve(x.size());
    g.grad.insert(g.grad.end(), ev.dq.begin(), ev.dq.end());
    g.grad.insert(g.grad.end(), ev.dp.begin(), ev.dp.end());
    return g;
}

double potential_forward(const ModelParams& params, std::span<const double> q) {
    if (static_cast<int>(q.size()) != params.qdim)
        throw std::invalid_argument("potential_forward: dimension mismatch");
    const ModelRef<double> ref = make_value_ref(params);
    return mlp_with_grad<double>(ref.layers, q).first;
}

double kinetic_separable(const ModelParams& params, std::span<const double> p) {
    const int n = params.qdim;
    // A is stored row-major; the column-major map therefore holds A^T.
    Eigen::Map<const Eigen::MatrixXd> At(params.A.data(), n, n);
    Eigen::Map<const Eigen::VectorXd> pv(p.data(), n);
    const Eigen::VectorXd t = At.transpose() * pv; // t = A p
    return 0.5 * t.squaredNorm();
}

Eigen::MatrixXd chain_scalar_mass(const ModelParams& params) {
    const int k = params.k;
    Eigen::MatrixXd A(k, k);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) A(r, c) = params.A[static_cast<size_t>(r) * k + c];
    Eigen::MatrixXd m = A.transpose() * A;
    for (int i = 0; i < k; ++i) m(i, i) += std::max(0.0, params.b[static_cast<size_t>(i)]);
    return m;
}

std::function<std::vector<double>(std::span<const double>)> make_model_field(
    const ModelParams& params) {
    auto ref = std::make_shared<const ModelRef<double>>(make_value_ref(params));
    return [ref](std::span<const double> x) { return model_field_t<double>(*ref, x); };
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

namespace {
constexpr int kModelFileVersion = 1;

void emit_array(std::ostringstream& os, const std::vector<double>& v) {
    os << "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) os << ",";
        os << fmt_g17(v[i]);
    }
    os << "]";
}
} // namespace

std::string serialize_model(const ModelParams& params,
                            const std::vector<std::pair<std::string, std::string>>& meta) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"format\": \"hamlearn-model\",\n";
    os << "  \"version\": " << kModelFileVersion << ",\n";
    if (!meta.empty()) {
        os << "  \"meta\": {";
        for (size_t i = 0; i < meta.size(); ++i) {
            if (i) os << ", ";
            os << "\"" << meta[i].first << "\": " << json(meta[i].second).dump();
        }
        os << "},\n";
    }
    os << "  \"variant\": \"" << to_string(params.variant) << "\",\n";
    os << "  \"qdim\": " << params.qdim << ",\n";
    os << "  \"k\": " << params.k << ",\n";
    os << "  \"activation\": \"" << params.activation << "\",\n";
    os << "  \"A\": ";
    emit_array(os, params.A);
    os << ",\n  \"b\": ";
    emit_array(os, params.b);
    os << ",\n  \"layers\": [\n";
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& lay = params.layers[l];
        os << "    {\"rows\": " << lay.rows << ", \"cols\": " << lay.cols << ", \"W\": ";
        emit_array(os, lay.W);
        os << ", \"b\": ";
        emit_array(os, lay.b);
        os << "}" << (l + 1 < params.layers.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
    std::string body = os.str();
    return body + "#checksum fnv1a64 " + to_hex(fnv1a64(body)) + "\n";
}

ModelParams deserialize_model(const std::string& text) {
    const size_t mark = text.rfind("#checksum fnv1a64 ");
    if (mark == std::string::npos)
        throw FormatError("model file: missing checksum line (truncated file?)");
    const std::string body = text.substr(0, mark);
    std::string hex = text.substr(mark + 18);
    while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r')) hex.pop_back();
    if (hex != to_hex(fnv1a64(body)))
        throw FormatError("model file: checksum mismatch (corrupted or truncated file)");

    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file: parse error: ") + e.what());
    }
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw FormatError("model file: missing version field");
    const int version = j["version"].get<int>();
    if (version != kModelFileVersion)
        throw FormatError("model file: unsupported version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kModelFileVersion) +
                          ")");
    ModelParams p;
    p.variant = parse_variant(j.at("variant").get<std::string>());
    p.qdim = j.at("qdim").get<int>();
    p.k = j.at("k").get<int>();
    p.activation = j.at("activation").get<std::string>();
    p.A = j.at("A").get<std::vector<double>>();
    p.b = j.at("b").get<std::vector<double>>();
    for (const auto& lj : j.at("layers")) {
        Layer lay;
        lay.rows = lj.at("rows").get<int>();
        lay.cols = lj.at("cols").get<int>();
        lay.W = lj.at("W").get<std::vector<double>>();
        lay.b = lj.at("b").get<std::vector<double>>();
        p.layers.push_back(std::move(lay));
    }
    p.validate();
    return p;
}

void save_model(const ModelParams& params, const std::string& path,
                const std::vector<std::pair<std::string, std::string>>& meta) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open model file for writing: " + path);
    f << serialize_model(params, meta);
}

ModelParams load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open model file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize_model(ss.str());
}

} // namespace hamlearn::models
