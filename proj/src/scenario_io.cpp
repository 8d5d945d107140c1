#include "attdet/scenario_io.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace attdet {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001B3ull;
    }
    return hash;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Path-tracking accessor over a json node; every failure names the key path.
class Cursor {
public:
    Cursor(const json& node, std::string path) : node_(&node), path_(std::move(path)) {}

    const json& raw() const { return *node_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(path_ + ": " + what);
    }

    void require_object() const {
        if (!node_->is_object()) fail("expected an object");
    }

    void require_array() const {
        if (!node_->is_array()) fail("expected an array");
    }

    void check_keys(std::initializer_list<const char*> allowed) const {
        require_object();
        const std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [key, value] : node_->items()) {
            if (!ok.count(key)) fail("unknown key '" + key + "'");
        }
    }

    bool has(const char* key) const { return node_->is_object() && node_->contains(key); }

    Cursor child(const char* key) const {
        require_object();
        if (!node_->contains(key)) fail("missing required key '" + std::string(key) + "'");
        return Cursor((*node_)[key], path_ + "." + key);
    }

    std::optional<Cursor> maybe(const char* key) const {
        if (!has(key)) return std::nullopt;
        return Cursor((*node_)[key], path_ + "." + key);
    }

    std::size_t size() const {
        require_array();
        return node_->size();
    }

    Cursor item(std::size_t i) const {
        require_array();
        return Cursor((*node_)[i], path_ + "[" + std::to_string(i + 1) + "]");
    }

    double number() const {
        if (!node_->is_number()) fail("expected a number");
        return node_->get<double>();
    }

    double number(const char* key) const { return child(key).number(); }

    double number_or(const char* key, double fallback) const {
        auto c = maybe(key);
        return c ? c->number() : fallback;
    }

    long integer(const char* key) const {
        Cursor c = child(key);
        if (!c.raw().is_number_integer()) c.fail("expected an integer");
        return c.raw().get<long>();
    }

    std::uint64_t uinteger_or(const char* key, std::uint64_t fallback) const {
        auto c = maybe(key);
        if (!c) return fallback;
        if (c->raw().is_number_unsigned()) return c->raw().get<std::uint64_t>();
        if (!c->raw().is_number_integer() || c->raw().get<long long>() < 0) {
            c->fail("expected a nonnegative integer");
        }
        return static_cast<std::uint64_t>(c->raw().get<long long>());
    }

    std::string text(const char* key) const {
        Cursor c = child(key);
        if (!c.raw().is_string()) c.fail("expected a string");
        return c.raw().get<std::string>();
    }

private:
    const json* node_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// matrix literals

MatrixEntry parse_entry(const Cursor& c) {
    if (c.raw().is_number()) return c.raw().get<double>();
    c.check_keys({"const", "sin", "pwc"});
    if (c.raw().size() != 1) c.fail("entry must be a number or exactly one of const/sin/pwc");
    if (c.has("const")) return c.number("const");
    if (c.has("sin")) {
        Cursor s = c.child("sin");
        s.check_keys({"c0", "terms"});
        SinusoidEntry entry;
        entry.offset = s.number_or("c0", 0.0);
        if (auto terms = s.maybe("terms")) {
            for (std::size_t i = 0; i < terms->size(); ++i) {
                Cursor term = terms->item(i);
                term.check_keys({"a", "w", "phi"});
                entry.terms.push_back(
                    {term.number("a"), term.number("w"), term.number_or("phi", 0.0)});
            }
        }
        return entry;
    }
    Cursor p = c.child("pwc");
    p.check_keys({"breaks", "values"});
    PiecewiseEntry entry;
    Cursor breaks = p.child("breaks");
    for (std::size_t i = 0; i < breaks.size(); ++i) entry.breaks.push_back(breaks.item(i).number());
    Cursor values = p.child("values");
    for (std::size_t i = 0; i < values.size(); ++i) entry.values.push_back(values.item(i).number());
    for (std::size_t i = 1; i < entry.breaks.size(); ++i) {
        if (entry.breaks[i] <= entry.breaks[i - 1]) p.fail("breaks must be strictly increasing");
    }
    if (entry.values.size() != entry.breaks.size() + 1) {
        p.fail("pwc needs exactly breaks+1 values");
    }
    return entry;
}

TimeVaryingMatrix parse_tv_matrix(const Cursor& c, Eigen::Index rows, Eigen::Index cols) {
    c.require_array();
    const auto actual_rows = static_cast<Eigen::Index>(c.size());
    if (rows >= 0 && actual_rows != rows) {
        c.fail("expected " + std::to_string(rows) + " row(s), found " +
               std::to_string(actual_rows));
    }
    if (actual_rows == 0) c.fail("matrix needs at least one row");
    Eigen::Index actual_cols = cols;
    for (std::size_t r = 0; r < c.size(); ++r) {
        Cursor row = c.item(r);
        row.require_array();
        if (actual_cols < 0) actual_cols = static_cast<Eigen::Index>(row.size());
        if (static_cast<Eigen::Index>(row.size()) != actual_cols) {
            row.fail("row length mismatch: expected " + std::to_string(actual_cols));
        }
    }
    TimeVaryingMatrix m(actual_rows, actual_cols);
    for (std::size_t r = 0; r < c.size(); ++r) {
        Cursor row = c.item(r);
        for (std::size_t col = 0; col < row.size(); ++col) {
            m.entry(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) =
                parse_entry(row.item(col));
        }
    }
    return m;
}

Matrix parse_const_matrix(const Cursor& c, Eigen::Index rows, Eigen::Index cols) {
    c.require_array();
    const auto actual_rows = static_cast<Eigen::Index>(c.size());
    if (rows >= 0 && actual_rows != rows) {
        c.fail("expected " + std::to_string(rows) + " row(s), found " +
               std::to_string(actual_rows));
    }
    Eigen::Index actual_cols = cols;
    if (actual_rows == 0) {
        if (cols < 0) c.fail("matrix needs at least one row");
        return Matrix(0, cols);
    }
    for (std::size_t r = 0; r < c.size(); ++r) {
        Cursor row = c.item(r);
        row.require_array();
        if (actual_cols < 0) actual_cols = static_cast<Eigen::Index>(row.size());
        if (static_cast<Eigen::Index>(row.size()) != actual_cols) {
            row.fail("row length mismatch: expected " + std::to_string(actual_cols));
        }
    }
    Matrix m(actual_rows, actual_cols);
    for (std::size_t r = 0; r < c.size(); ++r) {
        Cursor row = c.item(r);
        for (std::size_t col = 0; col < row.size(); ++col) m(static_cast<Eigen::Index>(r),
                                                            static_cast<Eigen::Index>(col)) =
            row.item(col).number();
    }
    return m;
}

Vector parse_vector(const Cursor& c, Eigen::Index size) {
    c.require_array();
    if (size >= 0 && static_cast<Eigen::Index>(c.size()) != size) {
        c.fail("expected " + std::to_string(size) + " element(s)");
    }
    Vector v(static_cast<Eigen::Index>(c.size()));
    for (std::size_t i = 0; i < c.size(); ++i) v[static_cast<Eigen::Index>(i)] = c.item(i).number();
    return v;
}

// ---------------------------------------------------------------------------
// signals

SignalSpec parse_signal_spec(const Cursor& c, const std::string& channel_tag) {
    c.check_keys(
        {"kind", "amplitude", "frequency", "phase", "decay", "onset", "window", "bucket", "seed"});
    SignalSpec spec;
    spec.kind = signal_kind_from_string(c.text("kind"));
    spec.amplitude = c.number_or("amplitude", 0.0);
    spec.frequency = c.number_or("frequency", 0.0);
    spec.phase = c.number_or("phase", 0.0);
    spec.decay = c.number_or("decay", 0.0);
    spec.onset = c.number_or("onset", 0.0);
    spec.window = c.number_or("window", 0.0);
    spec.bucket = c.number_or("bucket", 0.01);
    spec.seed = c.uinteger_or("seed", fnv1a(channel_tag));
    return spec;
}

VectorSignal parse_channel(const std::optional<Cursor>& c, Eigen::Index dim,
                           const std::string& channel_tag) {
    if (!c) return VectorSignal::zero(dim);
    if (c->raw().is_null()) return VectorSignal::zero(dim);
    if (c->raw().is_object()) {
        return VectorSignal::broadcast(parse_signal_spec(*c, channel_tag), dim);
    }
    c->require_array();
    if (static_cast<Eigen::Index>(c->size()) != dim) {
        c->fail("expected " + std::to_string(dim) + " component signal(s)");
    }
    VectorSignal signal;
    for (std::size_t i = 0; i < c->size(); ++i) {
        signal.components.push_back(
            parse_signal_spec(c->item(i), channel_tag + "[" + std::to_string(i) + "]"));
    }
    return signal;
}

json signal_to_json(const SignalSpec& spec) {
    json j;
    j["kind"] = to_string(spec.kind);
    j["amplitude"] = spec.amplitude;
    j["frequency"] = spec.frequency;
    j["phase"] = spec.phase;
    j["decay"] = spec.decay;
    j["onset"] = spec.onset;
    j["window"] = spec.window;
    j["bucket"] = spec.bucket;
    j["seed"] = spec.seed;
    return j;
}

json channel_to_json(const VectorSignal& signal) {
    json j = json::array();
    for (const auto& c : signal.components) j.push_back(signal_to_json(c));
    return j;
}

json entry_to_json(const MatrixEntry& entry) {
    if (const auto* value = std::get_if<double>(&entry)) return *value;
    if (const auto* sin = std::get_if<SinusoidEntry>(&entry)) {
        json terms = json::array();
        for (const auto& t : sin->terms) {
            terms.push_back({{"a", t.amplitude}, {"w", t.omega}, {"phi", t.phase}});
        }
        return json{{"sin", {{"c0", sin->offset}, {"terms", terms}}}};
    }
    const auto& pwc = std::get<PiecewiseEntry>(entry);
    return json{{"pwc", {{"breaks", pwc.breaks}, {"values", pwc.values}}}};
}

json tv_matrix_to_json(const TimeVaryingMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(entry_to_json(m.entry(r, c)));
        rows.push_back(row);
    }
    return rows;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

}  // namespace

ScenarioConfig parse_scenario_text(const std::string& text) {
    json root_json;
    try {
        root_json = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ConfigError(std::string("scenario parse error: ") + err.what());
    }
    const Cursor root(root_json, "scenario");
    root.check_keys({"plant", "nodes", "edges", "design", "sim", "disturbances"});

    ScenarioConfig config;

    const Cursor plant = root.child("plant");
    plant.check_keys({"n", "m", "A", "B", "x0"});
    config.plant.n = plant.integer("n");
    config.plant.m = plant.integer("m");
    if (config.plant.n < 1) plant.fail("n must be at least 1");
    if (config.plant.m < 0) plant.fail("m must be nonnegative");
    config.plant.a = parse_tv_matrix(plant.child("A"), config.plant.n, config.plant.n);
    config.plant.b = parse_tv_matrix(plant.child("B"), config.plant.n, config.plant.m);
    config.plant.x0 = plant.has("x0") ? parse_vector(plant.child("x0"), config.plant.n)
                                      : Vector::Zero(config.plant.n);

    if (auto sim = root.maybe("sim")) {
        sim->check_keys({"horizon", "step", "seed"});
        config.sim.horizon = sim->number_or("horizon", 10.0);
        config.sim.step = sim->number_or("step", 1e-3);
        config.sim.seed = sim->uinteger_or("seed", 0);
    }
    config.plant.horizon = config.sim.horizon;

    if (auto design = root.maybe("design")) {
        design->check_keys({"gamma", "grid_dt", "substep"});
        config.design.gamma = design->number_or("gamma", 1.0);
        config.design.grid_dt = design->number_or("grid_dt", 0.0);
        config.design.substep = design->number_or("substep", 0.0);
    }

    // Edges before nodes: baseline gain blocks follow the in-edge order.
    if (auto edges = root.maybe("edges")) {
        for (std::size_t e = 0; e < edges->size(); ++e) {
            Cursor ec = edges->item(e);
            ec.check_keys({"from", "to", "W", "H", "Z"});
            LinkModel link;
            link.source = static_cast<int>(ec.integer("from")) - 1;
            link.target = static_cast<int>(ec.integer("to")) - 1;
            link.w = parse_const_matrix(ec.child("W"), -1, config.plant.n);
            link.p = link.w.rows();
            link.h = ec.has("H") ? parse_const_matrix(ec.child("H"), link.p, -1)
                                 : Matrix::Zero(link.p, link.p);
            link.m_v = link.h.cols();
            link.z = ec.has("Z") ? parse_const_matrix(ec.child("Z"), link.p, link.p)
                                 : Matrix::Identity(link.p, link.p);
            config.edges.push_back(std::move(link));
        }
    }
    const Topology topology =
        Topology::build(static_cast<int>(root.child("nodes").size()), config.edges);

    const Cursor nodes = root.child("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        Cursor nc = nodes.item(i);
        nc.check_keys({"C", "D", "tracker", "weights", "xi", "attack", "gains"});
        NodeConfig node;
        node.sensor.c = parse_tv_matrix(nc.child("C"), -1, config.plant.n);
        node.sensor.p = node.sensor.c.rows();
        node.sensor.d = parse_tv_matrix(nc.child("D"), node.sensor.p, -1);
        node.sensor.m_v = node.sensor.d.cols();

        double beta = 0.5;
        double g = 1.0;
        Eigen::Index n_f = 1;
        std::optional<Matrix> f_inject;
        if (auto tc = nc.maybe("tracker")) {
            tc->check_keys({"beta", "g", "n_f", "F"});
            beta = tc->number_or("beta", 0.5);
            g = tc->number_or("g", 1.0);
            n_f = tc->has("n_f") ? tc->integer("n_f") : 1;
            if (n_f < 1) tc->fail("n_f must be at least 1");
            if (tc->has("F")) {
                f_inject = parse_const_matrix(tc->child("F"), config.plant.n, n_f);
            }
        }
        if (!(beta > 0.0) || !(g > 0.0)) nc.fail("tracker beta and g must be positive");
        node.tracker = build_tracker(beta, g, n_f);
        if (f_inject) {
            node.tracker.f_inject = *f_inject;
        } else {
            if (n_f > config.plant.n) {
                nc.fail("default F needs n_f <= n; provide tracker.F explicitly");
            }
            node.tracker.f_inject =
                Matrix::Identity(config.plant.n, config.plant.n).leftCols(n_f);
        }

        const Eigen::Index nf2 = 2 * n_f;
        node.weights.r = Matrix::Identity(config.plant.n, config.plant.n);
        node.weights.r_check = 2.0 * Matrix::Identity(nf2, nf2);
        node.weights.x = Matrix::Identity(config.plant.n, config.plant.n);
        node.weights.x_check = Matrix::Identity(nf2, nf2);
        if (auto wc = nc.maybe("weights")) {
            wc->check_keys({"R", "R_check", "X", "X_check"});
            if (wc->has("R")) {
                node.weights.r = parse_const_matrix(wc->child("R"), config.plant.n,
                                                    config.plant.n);
            }
            if (wc->has("R_check")) {
                node.weights.r_check = parse_const_matrix(wc->child("R_check"), nf2, nf2);
            }
            if (wc->has("X")) {
                node.weights.x = parse_const_matrix(wc->child("X"), config.plant.n,
                                                    config.plant.n);
            }
            if (wc->has("X_check")) {
                node.weights.x_check = parse_const_matrix(wc->child("X_check"), nf2, nf2);
            }
        }

        node.xi = nc.has("xi") ? parse_vector(nc.child("xi"), config.plant.n)
                               : Vector::Zero(config.plant.n);

        if (auto ac = nc.maybe("attack")) {
            node.attack = parse_channel(ac, n_f, "nodes[" + std::to_string(i + 1) + "].attack");
        }

        if (auto gc = nc.maybe("gains")) {
            gc->check_keys({"L", "K"});
            BaselineGainsConfig gains;
            gains.l = parse_const_matrix(gc->child("L"), config.plant.n, node.sensor.p);
            if (auto kc = gc->maybe("K")) {
                for (std::size_t k = 0; k < kc->size(); ++k) {
                    const auto& in = topology.in_edges[i];
                    const Eigen::Index p_edge =
                        k < in.size() ? config.edges[in[k]].p : Eigen::Index{-1};
                    gains.k.push_back(parse_const_matrix(kc->item(k), config.plant.n, p_edge));
                }
            }
            node.baseline_gains = std::move(gains);
        }
        config.nodes.push_back(std::move(node));
    }

    const auto disturbances = root.maybe("disturbances");
    std::optional<Cursor> w_cursor;
    std::optional<Cursor> v_cursor;
    std::optional<Cursor> ve_cursor;
    if (disturbances) {
        disturbances->check_keys({"w", "v", "v_edges"});
        w_cursor = disturbances->maybe("w");
        v_cursor = disturbances->maybe("v");
        ve_cursor = disturbances->maybe("v_edges");
    }
    config.w = parse_channel(w_cursor, config.plant.m, "w");
    for (std::size_t i = 0; i < config.nodes.size(); ++i) {
        std::optional<Cursor> channel;
        if (v_cursor) {
            if (v_cursor->size() != config.nodes.size()) {
                v_cursor->fail("v must list one channel per node (null for none)");
            }
            channel = v_cursor->item(i);
        }
        config.v_nodes.push_back(parse_channel(channel, config.nodes[i].sensor.m_v,
                                               "v[" + std::to_string(i + 1) + "]"));
    }
    for (std::size_t e = 0; e < config.edges.size(); ++e) {
        std::optional<Cursor> channel;
        if (ve_cursor) {
            if (ve_cursor->size() != config.edges.size()) {
                ve_cursor->fail("v_edges must list one channel per edge (null for none)");
            }
            channel = ve_cursor->item(e);
        }
        config.v_edges.push_back(parse_channel(channel, config.edges[e].m_v,
                                               "v_edges[" + std::to_string(e + 1) + "]"));
    }
    return config;
}

ScenarioConfig parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario_text(buffer.str());
}

std::string serialize_scenario(const ScenarioConfig& config) {
    json root;
    root["plant"] = {{"n", config.plant.n},
                     {"m", config.plant.m},
                     {"A", tv_matrix_to_json(config.plant.a)},
                     {"B", tv_matrix_to_json(config.plant.b)},
                     {"x0", vector_to_json(config.plant.x0)}};
    root["sim"] = {{"horizon", config.sim.horizon},
                   {"step", config.sim.step},
                   {"seed", config.sim.seed}};
    root["design"] = {{"gamma", config.design.gamma},
                      {"grid_dt", config.design.grid_dt},
                      {"substep", config.design.substep}};

    json nodes = json::array();
    for (const auto& node : config.nodes) {
        json nj;
        nj["C"] = tv_matrix_to_json(node.sensor.c);
        nj["D"] = tv_matrix_to_json(node.sensor.d);
        nj["tracker"] = {{"beta", node.tracker.beta},
                         {"g", node.tracker.g},
                         {"n_f", node.tracker.n_f},
                         {"F", matrix_to_json(node.tracker.f_inject)}};
        nj["weights"] = {{"R", matrix_to_json(node.weights.r)},
                         {"R_check", matrix_to_json(node.weights.r_check)},
                         {"X", matrix_to_json(node.weights.x)},
                         {"X_check", matrix_to_json(node.weights.x_check)}};
        nj["xi"] = vector_to_json(node.xi);
        if (node.attack) nj["attack"] = channel_to_json(*node.attack);
        if (node.baseline_gains) {
            json kj = json::array();
            for (const auto& k : node.baseline_gains->k) kj.push_back(matrix_to_json(k));
            nj["gains"] = {{"L", matrix_to_json(node.baseline_gains->l)}, {"K", kj}};
        }
        nodes.push_back(std::move(nj));
    }
    root["nodes"] = std::move(nodes);

    json edges = json::array();
    for (const auto& link : config.edges) {
        edges.push_back({{"from", link.source + 1},
                         {"to", link.target + 1},
                         {"W", matrix_to_json(link.w)},
                         {"H", matrix_to_json(link.h)},
                         {"Z", matrix_to_json(link.z)}});
    }
    root["edges"] = std::move(edges);

    json v = json::array();
    for (const auto& channel : config.v_nodes) v.push_back(channel_to_json(channel));
    json ve = json::array();
    for (const auto& channel : config.v_edges) ve.push_back(channel_to_json(channel));
    root["disturbances"] = {
        {"w", channel_to_json(config.w)}, {"v", std::move(v)}, {"v_edges", std::move(ve)}};
    return root.dump(2) + "\n";
}

bool scenario_equal(const ScenarioConfig& a, const ScenarioConfig& b) {
    return serialize_scenario(a) == serialize_scenario(b);
}

// ---------------------------------------------------------------------------
// CSV

void write_gain_csv(const std::filesystem::path& path, const GainSchedule& schedule) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write gain file: " + path.string());
    const Eigen::Index rows = schedule.partition().rows();
    const Eigen::Index cols = schedule.partition().cols();
    out << "t";
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) out << ",L[" << r << "][" << c << "]";
    }
    out << "\n";
    for (std::size_t k = 0; k < schedule.samples().size(); ++k) {
        out << format_double(schedule.grid().time(k));
        const Matrix& gain = schedule.samples()[k];
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) out << "," << format_double(gain(r, c));
        }
        out << "\n";
    }
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const std::filesystem::path& path,
                                               std::string& header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV file: " + path.string());
    header = line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            const std::size_t comma = line.find(',', start);
            const std::string cell =
                line.substr(start, comma == std::string::npos ? line.size() - start
                                                              : comma - start);
            row.push_back(std::stod(cell));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

GainSchedule read_gain_csv(const std::filesystem::path& path, const GainPartition& partition) {
    std::string header;
    const auto rows = read_csv_rows(path, header);
    if (rows.empty()) throw ConfigError("gain file has no samples: " + path.string());
    const auto expected =
        static_cast<std::size_t>(partition.rows()) * static_cast<std::size_t>(partition.cols());
    std::vector<Matrix> gains;
    std::vector<double> times;
    for (const auto& row : rows) {
        if (row.size() != expected + 1) {
            throw ConfigError("gain file column count does not match the scenario: " +
                              path.string());
        }
        times.push_back(row[0]);
        Matrix gain(partition.rows(), partition.cols());
        std::size_t idx = 1;
        for (Eigen::Index r = 0; r < partition.rows(); ++r) {
            for (Eigen::Index c = 0; c < partition.cols(); ++c) gain(r, c) = row[idx++];
        }
        gains.push_back(std::move(gain));
    }
    const double dt = times.size() > 1 ? times[1] - times[0] : 0.0;
    return GainSchedule(TimeGrid{times.front(), dt, times.size()}, std::move(gains), partition);
}

void write_trajectories_csv(const std::filesystem::path& path, const ValidatedScenario& scenario,
                            const SimResult& result) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trajectories file: " + path.string());

    out << "t";
    for (Eigen::Index d = 0; d < scenario.n(); ++d) out << ",x[" << d << "]";
    for (int i = 0; i < scenario.node_count(); ++i) {
        const std::string tag = "node" + std::to_string(i + 1) + ".";
        for (Eigen::Index d = 0; d < scenario.n(); ++d) out << "," << tag << "xhat[" << d << "]";
        for (Eigen::Index d = 0; d < scenario.n(); ++d) out << "," << tag << "e[" << d << "]";
        for (Eigen::Index d = 0; d < scenario.n(); ++d) out << "," << tag << "ehat[" << d << "]";
        for (Eigen::Index d = 0; d < 2 * scenario.n_f(i); ++d) {
            out << "," << tag << "epshat[" << d << "]";
        }
        for (Eigen::Index d = 0; d < scenario.n_f(i); ++d) out << "," << tag << "phi[" << d << "]";
        for (Eigen::Index d = 0; d < scenario.n_f(i); ++d) out << "," << tag << "f[" << d << "]";
        for (Eigen::Index d = 0; d < scenario.node(i).sensor.p; ++d) {
            out << "," << tag << "zeta[" << d << "]";
        }
        for (std::size_t e : scenario.in_edges(i)) {
            const auto& link = scenario.edge(e);
            for (Eigen::Index d = 0; d < link.p; ++d) {
                out << "," << tag << "zeta_from" << link.source + 1 << "[" << d << "]";
            }
        }
    }
    out << "\n";

    auto emit = [&out](const Vector& v) {
        for (Eigen::Index d = 0; d < v.size(); ++d) out << "," << format_double(v[d]);
    };
    for (std::size_t k = 0; k < result.grid.count; ++k) {
        out << format_double(result.grid.time(k));
        emit(result.x[k]);
        for (int i = 0; i < scenario.node_count(); ++i) {
            const auto& traj = result.nodes[static_cast<std::size_t>(i)];
            emit(traj.xhat[k]);
            emit(traj.e[k]);
            emit(traj.ehat[k]);
            emit(traj.epshat[k]);
            emit(traj.phi[k]);
            emit(traj.f[k]);
            emit(traj.zeta[k]);
            for (const auto& z : traj.zeta_edges[k]) emit(z);
        }
        out << "\n";
    }
}

SimResult read_trajectories_csv(const std::filesystem::path& path,
                                const ValidatedScenario& scenario) {
    std::string header;
    const auto rows = read_csv_rows(path, header);
    if (rows.empty()) throw ConfigError("trajectories file has no samples: " + path.string());

    SimResult result;
    result.seed = scenario.config().sim.seed;
    const double dt = rows.size() > 1 ? rows[1][0] - rows[0][0] : 0.0;
    result.grid = TimeGrid{rows.front()[0], dt, rows.size()};
    result.nodes.resize(static_cast<std::size_t>(scenario.node_count()));

    for (const auto& row : rows) {
        std::size_t idx = 1;
        auto take = [&row, &idx, &path](Eigen::Index size) {
            if (idx + static_cast<std::size_t>(size) > row.size()) {
                throw ConfigError("trajectories row too short: " + path.string());
            }
            Vector v(size);
            for (Eigen::Index d = 0; d < size; ++d) v[d] = row[idx++];
            return v;
        };
        result.x.push_back(take(scenario.n()));
        for (int i = 0; i < scenario.node_count(); ++i) {
            auto& traj = result.nodes[static_cast<std::size_t>(i)];
            traj.xhat.push_back(take(scenario.n()));
            traj.e.push_back(take(scenario.n()));
            traj.ehat.push_back(take(scenario.n()));
            traj.epshat.push_back(take(2 * scenario.n_f(i)));
            traj.phi.push_back(take(scenario.n_f(i)));
            traj.f.push_back(take(scenario.n_f(i)));
            traj.zeta.push_back(take(scenario.node(i).sensor.p));
            std::vector<Vector> zeta_edges;
            for (std::size_t e : scenario.in_edges(i)) {
                zeta_edges.push_back(take(scenario.edge(e).p));
            }
            traj.zeta_edges.push_back(std::move(zeta_edges));
        }
        if (idx != row.size()) {
            throw ConfigError("trajectories row longer than the scenario expects: " +
                              path.string());
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// reports

void write_metrics_json(const std::filesystem::path& path,
                        const std::vector<NodeReport>& reports) {
    json out = json::array();
    for (const auto& report : reports) {
        json detections = json::array();
        for (const auto& event : report.detections) {
            detections.push_back({{"onset", event.onset},
                                  {"confirmed_at", event.confirmed_at},
                                  {"end", event.end},
                                  {"peak", event.peak}});
        }
        out.push_back(
            {{"node", report.node},
             {"tracking",
              {{"integral", report.tracking.integral},
               {"tail_fraction", report.tracking.tail_fraction},
               {"settled", vector_to_json(report.tracking.settled)},
               {"verdict", report.tracking.converged ? "pass" : "fail"}}},
             {"hinf",
              {{"lhs", report.hinf.lhs},
               {"rhs", report.hinf.rhs},
               {"ratio", report.hinf.ratio},
               {"satisfied", report.hinf.satisfied}}},
             {"decay", {{"c", report.decay.c}, {"lambda_rate", report.decay.lambda_rate}}},
             {"detections", std::move(detections)}});
    }
    std::ofstream file(path);
    if (!file) throw Error("cannot write metrics file: " + path.string());
    file << out.dump(2) << "\n";
}

void write_feasibility_json(const std::filesystem::path& path, const DesignSummary& summary) {
    json riccati = json::array();
    for (std::size_t i = 0; i < summary.riccati_bounded.size(); ++i) {
        riccati.push_back({{"node", i + 1},
                           {"bounded", summary.riccati_bounded[i]},
                           {"alpha1", summary.alpha1[i]},
                           {"alpha2", summary.alpha2[i]},
                           {"error", summary.riccati_errors[i]}});
    }
    json local = json::array();
    for (std::size_t i = 0; i < summary.lmi_local_ok.size(); ++i) {
        local.push_back({{"node", i + 1}, {"ok", summary.lmi_local_ok[i]}});
    }
    const json out = {{"gamma", summary.lmi.gamma},
                      {"lmi",
                       {{"min_eigenvalue", summary.lmi.min_eigenvalue},
                        {"feasible", summary.lmi.feasible}}},
                      {"lmi_local", std::move(local)},
                      {"riccati", std::move(riccati)},
                      {"designed", summary.designed}};
    std::ofstream file(path);
    if (!file) throw Error("cannot write feasibility file: " + path.string());
    file << out.dump(2) << "\n";
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<GammaSweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write sweep file: " + path.string());
    out << "gamma,lmi_min_eigenvalue,lmi_feasible";
    if (!rows.empty()) {
        for (std::size_t i = 0; i < rows.front().riccati_bounded.size(); ++i) {
            out << ",node" << i + 1 << "_riccati_bounded";
        }
    }
    out << ",all_ok\n";
    for (const auto& row : rows) {
        out << format_double(row.gamma) << "," << format_double(row.lmi_min_eigenvalue) << ","
            << (row.lmi_feasible ? 1 : 0);
        bool all_ok = row.lmi_feasible;
        for (bool bounded : row.riccati_bounded) {
            out << "," << (bounded ? 1 : 0);
            all_ok = all_ok && bounded;
        }
        out << "," << (all_ok ? 1 : 0) << "\n";
    }
}

// ---------------------------------------------------------------------------
// run directory layout

std::filesystem::path gains_dir(const std::filesystem::path& run_dir) { return run_dir / "gains"; }

std::filesystem::path detector_gain_path(const std::filesystem::path& run_dir, int node) {
    return gains_dir(run_dir) / ("node_" + std::to_string(node + 1) + ".csv");
}

std::filesystem::path baseline_gain_path(const std::filesystem::path& run_dir, int node) {
    return gains_dir(run_dir) / ("node_" + std::to_string(node + 1) + "_baseline.csv");
}

void write_gain_set(const std::filesystem::path& run_dir, const ValidatedScenario& scenario,
                    const GainSet& gains) {
    std::filesystem::create_directories(gains_dir(run_dir));
    for (int i = 0; i < scenario.node_count(); ++i) {
        write_gain_csv(detector_gain_path(run_dir, i),
                       gains.detector[static_cast<std::size_t>(i)]);
        write_gain_csv(baseline_gain_path(run_dir, i),
                       gains.baseline[static_cast<std::size_t>(i)]);
    }
}

GainSet read_gain_set(const std::filesystem::path& run_dir, const ValidatedScenario& scenario) {
    GainSet gains;
    for (int i = 0; i < scenario.node_count(); ++i) {
        GainPartition detector;
        detector.row_blocks = {scenario.n(), 2 * scenario.n_f(i)};
        detector.col_blocks = {scenario.node(i).sensor.p};
        for (std::size_t e : scenario.in_edges(i)) {
            detector.col_blocks.push_back(scenario.edge(e).p);
        }
        GainPartition baseline = detector;
        baseline.row_blocks = {scenario.n()};
        gains.detector.push_back(read_gain_csv(detector_gain_path(run_dir, i), detector));
        gains.baseline.push_back(read_gain_csv(baseline_gain_path(run_dir, i), baseline));
    }
    return gains;
}

}  // namespace attdet
