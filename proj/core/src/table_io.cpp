#include "cylheat/table_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include "json.hpp"

#include "cylheat/errors.hpp"

namespace cylheat {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'Y', 'L', 'H', 'T', 'A', 'B', '1'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "table files are written little-endian");

class Arrays {
public:
    json put(const std::vector<double>& v) {
        json ref = {offset_, v.size()};
        data_.insert(data_.end(), v.begin(), v.end());
        offset_ += v.size();
        return ref;
    }
    json put_all(const std::vector<std::vector<double>>& vs) {
        json a = json::array();
        for (const auto& v : vs) a.push_back(put(v));
        return a;
    }
    const std::vector<double>& data() const { return data_; }

private:
    std::vector<double> data_;
    std::size_t offset_ = 0;
};

std::vector<double> take(const json& ref, const std::vector<double>& data) {
    const std::size_t off = ref.at(0).get<std::size_t>(), n = ref.at(1).get<std::size_t>();
    if (off + n > data.size()) throw ConfigError("table file: array reference out of range");
    return {data.begin() + static_cast<std::ptrdiff_t>(off), data.begin() + static_cast<std::ptrdiff_t>(off + n)};
}

std::vector<std::vector<double>> take_all(const json& refs, const std::vector<double>& data) {
    std::vector<std::vector<double>> out;
    for (const auto& r : refs) out.push_back(take(r, data));
    return out;
}

json model_json(const ModelParams& p) {
    return {{"alpha", p.alpha}, {"d", p.d},   {"beta", p.beta_declared}, {"b1", p.b1},
            {"b2", p.b2},       {"b3", p.b3_declared}, {"T", p.T}};
}

json field_json(const FieldSpec& f) {
    return {{"family", to_string(f.family)}, {"values", f.values},  {"frequency", f.frequency},
            {"phase", f.phase},              {"center", f.center}, {"expressions", f.expressions}};
}

json scheme_json(const QuadratureScheme& s) {
    return {{"space", {{"nodes", s.space.nodes}, {"core", s.space.core}, {"extent", s.space.extent}}},
            {"product",
             {{"cell_nodes", s.product.cell_nodes},
              {"near_nodes", s.product.near_nodes},
              {"tail_nodes", s.product.tail_nodes}}},
            {"generator",
             {{"epsilon_split", s.generator.epsilon_split},
              {"tail_radius", s.generator.tail_radius},
              {"inner_nodes", s.generator.inner_nodes},
              {"rel_tol", s.generator.rel_tol},
              {"max_rounds", s.generator.max_rounds},
              {"consistency_tol", s.generator.consistency_tol}}},
            {"time_nodes", s.time_nodes},
            {"time_power_cap", s.time_power_cap},
            {"per_decade", s.per_decade},
            {"t_min", s.t_min},
            {"fd_step", s.fd_step},
            {"tolerance", s.tolerance}};
}

QuadratureScheme scheme_from(const json& j) {
    QuadratureScheme s;
    s.space.nodes = j.at("space").at("nodes");
    s.space.core = j.at("space").at("core");
    s.space.extent = j.at("space").at("extent");
    s.product.cell_nodes = j.at("product").at("cell_nodes");
    s.product.near_nodes = j.at("product").at("near_nodes");
    s.product.tail_nodes = j.at("product").at("tail_nodes");
    const auto& g = j.at("generator");
    s.generator.epsilon_split = g.at("epsilon_split");
    s.generator.tail_radius = g.at("tail_radius");
    s.generator.inner_nodes = g.at("inner_nodes");
    s.generator.rel_tol = g.at("rel_tol");
    s.generator.max_rounds = g.at("max_rounds");
    s.generator.consistency_tol = g.at("consistency_tol");
    s.time_nodes = j.at("time_nodes");
    s.time_power_cap = j.at("time_power_cap");
    s.per_decade = j.at("per_decade");
    s.t_min = j.at("t_min");
    s.fd_step = j.at("fd_step");
    s.tolerance = j.at("tolerance");
    return s;
}

json slice_json(const SliceData& d, Arrays& arrays) {
    json times = json::array();
    for (const auto& st : d.times) {
        times.push_back({{"t", st.t},
                         {"fd_only", st.fd_only},
                         {"scale", st.scale},
                         {"terms", arrays.put_all(st.terms)},
                         {"phi", arrays.put_all(st.phi)},
                         {"s_nodes", st.s_nodes},
                         {"s_weights", st.s_weights},
                         {"s_sum", arrays.put_all(st.s_sum)}});
    }
    const auto& s = d.summary;
    return {{"kind", d.kind == SliceKind::Backward ? "backward" : "forward"},
            {"anchor", d.anchor},
            {"n_max", d.n_max},
            {"summary",
             {{"term_norms", s.term_norms},
              {"n_used", s.n_used},
              {"ratio_constant", s.ratio_constant},
              {"remainder", s.remainder},
              {"degraded", s.degraded}}},
            {"times", times}};
}

SliceData slice_from(const json& j, const std::vector<double>& data) {
    SliceData d;
    d.kind = j.at("kind") == "backward" ? SliceKind::Backward : SliceKind::Forward;
    d.anchor = j.at("anchor").get<std::vector<double>>();
    d.n_max = j.at("n_max");
    const auto& s = j.at("summary");
    d.summary.term_norms = s.at("term_norms").get<std::vector<double>>();
    d.summary.n_used = s.at("n_used");
    d.summary.ratio_constant = s.at("ratio_constant");
    d.summary.remainder = s.at("remainder");
    d.summary.degraded = s.at("degraded");
    for (const auto& tj : j.at("times")) {
        SliceTime st;
        st.t = tj.at("t");
        st.fd_only = tj.at("fd_only");
        st.scale = tj.at("scale").get<std::vector<double>>();
        st.terms = take_all(tj.at("terms"), data);
        st.phi = take_all(tj.at("phi"), data);
        st.s_nodes = tj.at("s_nodes").get<std::vector<double>>();
        st.s_weights = tj.at("s_weights").get<std::vector<double>>();
        st.s_sum = take_all(tj.at("s_sum"), data);
        d.times.push_back(std::move(st));
    }
    return d;
}

bool same_point(std::span<const double> a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-12 * (1.0 + std::abs(b[i]))) return false;
    return true;
}

}  // namespace

const BackwardSlice& ParametrixTable::backward_at(std::span<const double> y) const {
    for (const auto& s : backward)
        if (same_point(y, s.y())) return s;
    throw PreconditionError("no backward slice at the requested point");
}

const ForwardSlice& ParametrixTable::forward_at(std::span<const double> x) const {
    for (const auto& s : forward)
        if (same_point(x, s.x())) return s;
    throw PreconditionError("no forward slice at the requested point");
}

ParametrixTable build_table(std::shared_ptr<const ParametrixContext> ctx, const TableLayout& layout) {
    ParametrixTable table;
    table.ctx = std::move(ctx);
    for (const auto& y : layout.backward_points)
        table.backward.emplace_back(table.ctx, y, layout.backward_times, layout.series);
    SeriesOptions fwd = layout.series;
    fwd.time_derivative = false;
    for (const auto& x : layout.forward_points)
        table.forward.emplace_back(table.ctx, x, layout.forward_times, fwd);
    return table;
}

void save_table(const ParametrixTable& table, const std::string& path) {
    Arrays arrays;
    json slices = json::array();
    for (const auto& s : table.backward) slices.push_back(slice_json(s.data(), arrays));
    for (const auto& s : table.forward) slices.push_back(slice_json(s.data(), arrays));
    const json meta = {{"format_version", kFormatVersion},
                       {"model", model_json(table.ctx->params())},
                       {"field", field_json(table.ctx->field.spec())},
                       {"scheme", scheme_json(table.ctx->scheme)},
                       {"slices", slices}};
    const std::string text = meta.dump();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    os.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    os.write(reinterpret_cast<const char*>(&len), sizeof len);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    const auto& data = arrays.data();
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!os) throw ConfigError("write failed for " + path);
}

ParametrixTable load_table(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError(path + " is not a parametrix table");
    std::uint64_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof len);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    const json meta = json::parse(text);
    if (meta.at("format_version") != kFormatVersion) throw ConfigError("unsupported table format version");
    std::vector<double> data;
    double buf[512];
    while (is.read(reinterpret_cast<char*>(buf), sizeof buf) || is.gcount() > 0) {
        data.insert(data.end(), buf, buf + is.gcount() / static_cast<std::streamsize>(sizeof(double)));
        if (is.eof()) break;
    }
    const auto& m = meta.at("model");
    const auto params = ModelParams::make(m.at("alpha"), m.at("d"), m.at("beta"), m.at("b1"), m.at("b2"),
                                          m.at("b3"), m.at("T"));
    const auto& f = meta.at("field");
    FieldSpec spec;
    spec.family = field_family_from_string(f.at("family"));
    spec.values = f.at("values").get<std::vector<double>>();
    spec.frequency = f.at("frequency");
    spec.phase = f.at("phase").get<std::vector<double>>();
    spec.center = f.at("center").get<std::vector<double>>();
    spec.expressions = f.at("expressions").get<std::vector<std::string>>();
    ParametrixTable table;
    table.ctx = std::make_shared<ParametrixContext>(CoefficientField(params, spec), scheme_from(meta.at("scheme")));
    for (const auto& sj : meta.at("slices")) {
        auto d = slice_from(sj, data);
        if (d.kind == SliceKind::Backward)
            table.backward.emplace_back(table.ctx, std::move(d));
        else
            table.forward.emplace_back(table.ctx, std::move(d));
    }
    return table;
}

}  // namespace cylheat
