#include "restore/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace restore {

using nlohmann::json;

int Scenario::bus_index(const std::string& id) const {
    for (size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return static_cast<int>(i);
    return -1;
}

int Scenario::line_index(const std::string& id) const {
    for (size_t i = 0; i < lines.size(); ++i)
        if (lines[i].id == id) return static_cast<int>(i);
    return -1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write file: " + path);
    out << content;
}

namespace {

[[noreturn]] void fail_at(const std::string& where, const std::string& what) {
    throw ParseError("scenario: " + where + ": " + what);
}

double need_number(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) fail_at(where, std::string("missing field '") + key + "'");
    if (!j[key].is_number()) fail_at(where, std::string("field '") + key + "' must be a number");
    return j[key].get<double>();
}

std::string need_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) fail_at(where, std::string("missing field '") + key + "'");
    return j[key].get<std::string>();
}

// Scalars broadcast to the horizon; arrays must match it exactly.
std::vector<double> profile(const json& j, const char* key, int slots,
                            const std::string& where, double fallback = 0.0) {
    if (!j.contains(key)) return std::vector<double>(slots, fallback);
    const json& v = j[key];
    if (v.is_number()) return std::vector<double>(slots, v.get<double>());
    if (!v.is_array()) fail_at(where, std::string(key) + " must be a number or array");
    std::vector<double> out = v.get<std::vector<double>>();
    if (static_cast<int>(out.size()) == 1) return std::vector<double>(slots, out[0]);
    if (static_cast<int>(out.size()) != slots)
        fail_at(where, std::string(key) + " has " + std::to_string(out.size()) +
                           " entries, horizon has " + std::to_string(slots));
    return out;
}

} // namespace

Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scenario: invalid JSON: ") + e.what());
    }

    Scenario s;
    if (!doc.contains("horizon")) fail_at("top level", "missing 'horizon'");
    s.horizon_slots = static_cast<int>(need_number(doc["horizon"], "slots", "horizon"));
    s.slot_minutes = need_number(doc["horizon"], "slot_minutes", "horizon");
    if (s.horizon_slots < 1) fail_at("horizon", "slots must be >= 1");
    if (s.slot_minutes <= 0) fail_at("horizon", "slot_minutes must be > 0");

    if (doc.contains("limits")) {
        s.v_min = need_number(doc["limits"], "v_min", "limits");
        s.v_max = need_number(doc["limits"], "v_max", "limits");
    }
    if (s.v_min >= s.v_max) fail_at("limits", "v_min must be < v_max");

    if (doc.contains("weights")) {
        const json& w = doc["weights"];
        if (w.contains("w_re")) s.weights.w_re = w["w_re"].get<double>();
        if (w.contains("w_sw")) s.weights.w_sw = w["w_sw"].get<double>();
        if (w.contains("w_op")) s.weights.w_op = w["w_op"].get<double>();
    }
    s.max_steps = doc.contains("max_steps") ? doc["max_steps"].get<int>() : 1;
    if (s.max_steps < 1) fail_at("max_steps", "must be >= 1");
    if (doc.contains("big_m") && doc["big_m"].contains("voltage_margin"))
        s.big_m_voltage_margin = doc["big_m"]["voltage_margin"].get<double>();

    if (!doc.contains("buses") || !doc["buses"].is_array())
        fail_at("top level", "missing 'buses' array");
    for (const json& jb : doc["buses"]) {
        Bus b;
        b.id = need_string(jb, "id", "bus");
        const std::string where = "bus '" + b.id + "'";
        b.demand_p = profile(jb, "demand_p", s.horizon_slots, where);
        b.demand_q = profile(jb, "demand_q", s.horizon_slots, where);
        b.importance = jb.contains("importance") ? jb["importance"].get<double>() : 1.0;
        b.has_load_breaker =
            jb.contains("has_load_breaker") ? jb["has_load_breaker"].get<bool>() : true;
        b.is_critical = jb.contains("is_critical") ? jb["is_critical"].get<bool>() : false;
        if (b.is_critical && !jb.contains("importance")) b.importance = 100.0;
        for (double d : b.demand_p)
            if (d < 0) throw InvariantError(where + ": demand_p must be >= 0");
        if (b.importance <= 0) throw InvariantError(where + ": importance must be > 0");
        s.buses.push_back(std::move(b));
    }

    if (!doc.contains("lines") || !doc["lines"].is_array())
        fail_at("top level", "missing 'lines' array");
    for (const json& jl : doc["lines"]) {
        Line l;
        l.from = need_string(jl, "from", "line");
        l.to = need_string(jl, "to", "line");
        l.id = jl.contains("id") ? jl["id"].get<std::string>() : l.from + "-" + l.to;
        const std::string where = "line '" + l.id + "'";
        l.r = need_number(jl, "r", where);
        l.x = need_number(jl, "x", where);
        l.ampacity = need_number(jl, "ampacity", where);
        if (jl.contains("switch") && !jl["switch"].is_null()) {
            const json& js = jl["switch"];
            SwitchSpec sw;
            std::string kind = need_string(js, "kind", where + " switch");
            if (kind == "tie")
                sw.kind = SwitchKind::tie;
            else if (kind == "sectionalizing")
                sw.kind = SwitchKind::sectionalizing;
            else
                fail_at(where, "switch kind must be 'tie' or 'sectionalizing'");
            sw.remote = js.contains("remote") ? js["remote"].get<bool>() : true;
            sw.op_time_min = js.contains("op_time_min")
                                 ? js["op_time_min"].get<double>()
                                 : (sw.remote ? 0.5 : 30.0);
            if (sw.op_time_min <= 0)
                throw InvariantError(where + ": switch op_time_min must be > 0");
            l.switch_spec = sw;
        }
        if (l.r < 0 || l.x < 0) throw InvariantError(where + ": r and x must be >= 0");
        if (l.r == 0 && l.x == 0)
            throw InvariantError(where + ": r and x cannot both be zero");
        if (l.ampacity <= 0) throw InvariantError(where + ": ampacity must be > 0");
        if (l.from == l.to) throw InvariantError(where + ": from == to");
        s.lines.push_back(std::move(l));
    }

    if (doc.contains("generators")) {
        for (const json& jg : doc["generators"]) {
            Generator g;
            g.node = need_string(jg, "node", "generator");
            g.id = jg.contains("id") ? jg["id"].get<std::string>() : "gen@" + g.node;
            const std::string where = "generator '" + g.id + "'";
            std::string kind = need_string(jg, "kind", where);
            if (kind == "substation")
                g.kind = GeneratorKind::substation;
            else if (kind == "dispatchable_dg")
                g.kind = GeneratorKind::dispatchable_dg;
            else if (kind == "intermittent")
                g.kind = GeneratorKind::intermittent;
            else
                fail_at(where, "unknown generator kind '" + kind + "'");
            g.p_max = need_number(jg, "p_max", where);
            g.q_min = jg.contains("q_min") ? jg["q_min"].get<double>() : 0.0;
            g.q_max = jg.contains("q_max") ? jg["q_max"].get<double>() : 0.0;
            g.s_max = need_number(jg, "s_max", where);
            g.startup_slots =
                jg.contains("startup_slots") ? jg["startup_slots"].get<int>() : 0;
            g.initial_energy =
                jg.contains("initial_energy") ? jg["initial_energy"].get<double>() : 0.0;
            if (g.kind == GeneratorKind::intermittent) {
                g.forecast_p = profile(jg, "forecast_p", s.horizon_slots, where);
                if (g.q_min != 0.0 || g.q_max != 0.0)
                    throw InvariantError(where +
                                         ": intermittent units inject zero reactive power");
            }
            if (g.q_min > 0 || g.q_max < 0)
                throw InvariantError(where + ": q_min <= 0 <= q_max required");
            if (g.p_max > g.s_max + 1e-12)
                throw InvariantError(where + ": p_max must be <= s_max");
            if (g.startup_slots < 0)
                throw InvariantError(where + ": startup_slots must be >= 0");
            if (g.initial_energy < 0)
                throw InvariantError(where + ": initial_energy must be >= 0");
            if (s.bus_index(g.node) < 0)
                throw InvariantError(where + ": unknown node '" + g.node + "'");
            s.generators.push_back(std::move(g));
        }
    }

    if (doc.contains("fault")) {
        const json& jf = doc["fault"];
        if (jf.contains("elements"))
            s.faulted_elements = jf["elements"].get<std::vector<std::string>>();
    }
    for (const auto& el : s.faulted_elements)
        if (s.bus_index(el) < 0 && s.line_index(el) < 0)
            throw InvariantError("fault: unknown element '" + el + "'");

    // Stable ordering by id so identical documents yield identical models.
    std::sort(s.buses.begin(), s.buses.end(),
              [](const Bus& a, const Bus& b) { return a.id < b.id; });
    std::sort(s.lines.begin(), s.lines.end(),
              [](const Line& a, const Line& b) { return a.id < b.id; });
    std::sort(s.generators.begin(), s.generators.end(),
              [](const Generator& a, const Generator& b) { return a.id < b.id; });

    for (size_t i = 1; i < s.buses.size(); ++i)
        if (s.buses[i].id == s.buses[i - 1].id)
            throw InvariantError("duplicate bus id '" + s.buses[i].id + "'");
    for (size_t i = 1; i < s.lines.size(); ++i)
        if (s.lines[i].id == s.lines[i - 1].id)
            throw InvariantError("duplicate line id '" + s.lines[i].id + "'");
    for (const Line& l : s.lines) {
        if (s.bus_index(l.from) < 0)
            throw InvariantError("line '" + l.id + "': unknown bus '" + l.from + "'");
        if (s.bus_index(l.to) < 0)
            throw InvariantError("line '" + l.id + "': unknown bus '" + l.to + "'");
    }
    return s;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        for (int i = 0; i < n; ++i) parent[i] = i;
    }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

} // namespace

std::vector<Diagnostic> validate_scenario(const Scenario& s) {
    std::vector<Diagnostic> out;
    const int nb = static_cast<int>(s.buses.size());

    // Pre-fault closed topology: everything except normally-open ties.
    UnionFind uf(nb);
    bool cycle = false;
    for (const Line& l : s.lines) {
        if (l.is_tie()) continue;
        if (!uf.unite(s.bus_index(l.from), s.bus_index(l.to))) cycle = true;
    }
    if (cycle)
        out.push_back({"non-radial", "non-radial pre-fault topology (closed loop)"});

    std::vector<int> subs_in_comp(nb, 0);
    for (const Generator& g : s.generators)
        if (g.kind == GeneratorKind::substation)
            ++subs_in_comp[uf.find(s.bus_index(g.node))];
    for (int b = 0; b < nb; ++b) {
        if (uf.find(b) != b) continue;
        if (subs_in_comp[b] == 0)
            out.push_back({"unfed-component",
                           "bus '" + s.buses[b].id +
                               "' belongs to a component with no substation"});
        if (subs_in_comp[b] > 1)
            out.push_back({"multi-substation-component",
                           "component of bus '" + s.buses[b].id +
                               "' contains multiple substations pre-fault"});
    }

    for (const Bus& b : s.buses) {
        if (static_cast<int>(b.demand_p.size()) != s.horizon_slots ||
            static_cast<int>(b.demand_q.size()) != s.horizon_slots)
            out.push_back({"profile-length",
                           "bus '" + b.id + "' demand profile length mismatch"});
    }
    for (const Generator& g : s.generators) {
        if (g.kind == GeneratorKind::intermittent &&
            static_cast<int>(g.forecast_p.size()) != s.horizon_slots)
            out.push_back({"profile-length",
                           "generator '" + g.id + "' forecast length mismatch"});
    }

    // Step budget: at most (dispatchable DGs cut off by the fault) + 1.
    // Uses a self-contained connectivity pass; the zone machinery assumes an
    // already-validated scenario.
    if (!s.faulted_elements.empty()) {
        auto faulted = [&](const std::string& id) {
            for (const auto& el : s.faulted_elements)
                if (el == id) return true;
            return false;
        };
        UnionFind post(nb);
        for (const Line& l : s.lines) {
            if (l.is_tie()) continue;
            if (faulted(l.id) || faulted(l.from) || faulted(l.to)) continue;
            post.unite(s.bus_index(l.from), s.bus_index(l.to));
        }
        std::vector<bool> fed(nb, false);
        for (const Generator& g : s.generators)
            if (g.kind == GeneratorKind::substation && !faulted(g.node))
                fed[post.find(s.bus_index(g.node))] = true;
        int dgs_off = 0;
        for (const Generator& g : s.generators)
            if (g.kind == GeneratorKind::dispatchable_dg &&
                !fed[post.find(s.bus_index(g.node))])
                ++dgs_off;
        if (s.max_steps > dgs_off + 1)
            out.push_back(
                {"step-budget",
                 "max_steps=" + std::to_string(s.max_steps) +
                     " exceeds the bound (off-outage dispatchable DGs + 1 = " +
                     std::to_string(dgs_off + 1) + ")"});
    }
    return out;
}

} // namespace restore
