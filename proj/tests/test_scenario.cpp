#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "restore/scenario.hpp"
#include "restore/zones.hpp"

#include <functional>
#include <random>
#include <set>

using namespace restore;

namespace {

std::string fixture(const std::string& name) {
    return read_file(std::string(FIXTURES_DIR) + "/" + name);
}

Scenario fig1() { return parse_scenario(fixture("fig1.json")); }

} // namespace

TEST_CASE("smallest well-formed scenario") {
    const char* doc = R"({
      "horizon": {"slots": 1, "slot_minutes": 15},
      "buses": [{"id": "a", "demand_p": 0, "demand_q": 0},
                {"id": "b", "demand_p": 0.1, "demand_q": 0.02}],
      "lines": [{"from": "a", "to": "b", "r": 0.01, "x": 0.01, "ampacity": 1.0}],
      "generators": [{"node": "a", "kind": "substation", "p_max": 1, "s_max": 2}]
    })";
    Scenario s = parse_scenario(doc);
    CHECK(s.buses.size() == 2);
    CHECK(s.lines.size() == 1);
    CHECK(s.lines[0].id == "a-b");
    CHECK(s.buses[1].demand_p.size() == 1); // scalar broadcast to horizon
    CHECK(validate_scenario(s).empty());
}

TEST_CASE("missing resistance names the line") {
    const char* doc = R"({
      "horizon": {"slots": 1, "slot_minutes": 15},
      "buses": [{"id": "a"}, {"id": "b"}],
      "lines": [{"id": "L7", "from": "a", "to": "b", "x": 0.01, "ampacity": 1.0}]
    })";
    try {
        parse_scenario(doc);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("L7") != std::string::npos);
        CHECK(std::string(e.what()).find("'r'") != std::string::npos);
    }
}

TEST_CASE("invariant violations are named") {
    const char* doc = R"({
      "horizon": {"slots": 2, "slot_minutes": 15},
      "buses": [{"id": "a", "demand_p": [0.1, 0.2, 0.3]}],
      "lines": []
    })";
    CHECK_THROWS_AS(parse_scenario(doc), ParseError); // profile length 3 vs 2

    const char* bad_gen = R"({
      "horizon": {"slots": 1, "slot_minutes": 15},
      "buses": [{"id": "a"}],
      "lines": [],
      "generators": [{"node": "a", "kind": "dispatchable_dg", "p_max": 2, "s_max": 1}]
    })";
    CHECK_THROWS_AS(parse_scenario(bad_gen), InvariantError); // p_max > s_max
}

TEST_CASE("validation flags a pre-fault loop") {
    const char* doc = R"({
      "horizon": {"slots": 1, "slot_minutes": 15},
      "buses": [{"id": "a"}, {"id": "b"}, {"id": "c"}],
      "lines": [
        {"from": "a", "to": "b", "r": 0.01, "x": 0.01, "ampacity": 1},
        {"from": "b", "to": "c", "r": 0.01, "x": 0.01, "ampacity": 1},
        {"from": "c", "to": "a", "r": 0.01, "x": 0.01, "ampacity": 1}],
      "generators": [{"node": "a", "kind": "substation", "p_max": 1, "s_max": 2}]
    })";
    auto diags = validate_scenario(parse_scenario(doc));
    bool found = false;
    for (const auto& d : diags) found |= d.code == "non-radial";
    CHECK(found);
}

TEST_CASE("validation enforces the step budget against off-outage DG count") {
    Scenario s = fig1();
    CHECK(validate_scenario(s).empty()); // max_steps=2, one off-outage DG
    s.max_steps = 3;                     // DGs + 2
    auto diags = validate_scenario(s);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].code == "step-budget");
}

TEST_CASE("feeder without internal switches is one zone") {
    const char* doc = R"({
      "horizon": {"slots": 1, "slot_minutes": 15},
      "buses": [{"id": "a"}, {"id": "b"}, {"id": "c"}],
      "lines": [
        {"from": "a", "to": "b", "r": 0.01, "x": 0.01, "ampacity": 1},
        {"from": "b", "to": "c", "r": 0.01, "x": 0.01, "ampacity": 1}],
      "generators": [{"node": "a", "kind": "substation", "p_max": 1, "s_max": 2}]
    })";
    ZoneGraph zg = partition_zones(parse_scenario(doc));
    CHECK(zg.zones.size() == 1);
    CHECK(zg.zones[0].buses.size() == 3);
    CHECK(zg.edges.empty());
}

TEST_CASE("fig1 fixture zones match the hand partition") {
    Scenario s = fig1();
    ZoneGraph zg = partition_zones(s);
    // Zones, by construction: {b1}, {c1}, {fb1,sb}, {sa} in bus-sorted order.
    REQUIRE(zg.zones.size() == 4);
    auto zone_ids = [&](int z) {
        std::set<std::string> ids;
        for (int b : zg.zones[z].buses) ids.insert(s.buses[b].id);
        return ids;
    };
    CHECK(zone_ids(0) == std::set<std::string>{"b1"});
    CHECK(zone_ids(1) == std::set<std::string>{"c1"});
    CHECK(zone_ids(2) == std::set<std::string>{"fb1", "sb"});
    CHECK(zone_ids(3) == std::set<std::string>{"sa"});
    CHECK(zg.edges.size() == 4); // fa, T3, T5, S45
    // Each switchless line belongs to exactly one zone.
    CHECK(zg.zone_of_line[s.line_index("fb")] == 2);
    // Every bus belongs to exactly one zone.
    std::set<int> seen;
    for (size_t b = 0; b < s.buses.size(); ++b) {
        CHECK(zg.zone_of_bus[b] >= 0);
        seen.insert(zg.zone_of_bus[b]);
    }
    CHECK(seen.size() == 4);
}

TEST_CASE("random radial networks: zone count equals switch edges + 1 per feeder") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        // Random radial tree on n buses, random switch placement.
        int n = 6 + static_cast<int>(rng() % 15);
        std::string doc = R"({"horizon": {"slots": 1, "slot_minutes": 15}, "buses": [)";
        for (int i = 0; i < n; ++i) {
            doc += std::string(i ? "," : "") + R"({"id": "b)" + std::to_string(i) + R"("})";
        }
        doc += R"(], "lines": [)";
        int switches = 0;
        for (int i = 1; i < n; ++i) {
            int parent = static_cast<int>(rng() % i);
            bool sw = rng() % 3 == 0;
            switches += sw;
            doc += std::string(i > 1 ? "," : "") + R"({"from": "b)" +
                   std::to_string(parent) + R"(", "to": "b)" + std::to_string(i) +
                   R"(", "r": 0.01, "x": 0.01, "ampacity": 1)";
            if (sw) doc += R"(, "switch": {"kind": "sectionalizing"})";
            doc += "}";
        }
        doc += R"(], "generators": [{"node": "b0", "kind": "substation", "p_max": 1, "s_max": 2}]})";
        Scenario s = parse_scenario(doc);
        ZoneGraph zg = partition_zones(s);

        // Independent union-find oracle over switchless lines.
        std::vector<int> parent(n);
        for (int i = 0; i < n; ++i) parent[i] = i;
        std::function<int(int)> find = [&](int a) {
            return parent[a] == a ? a : parent[a] = find(parent[a]);
        };
        for (const Line& l : s.lines)
            if (!l.switch_spec)
                parent[find(s.bus_index(l.from))] = find(s.bus_index(l.to));
        std::set<int> roots;
        for (int i = 0; i < n; ++i) roots.insert(find(i));

        CHECK(static_cast<int>(zg.zones.size()) == static_cast<int>(roots.size()));
        CHECK(static_cast<int>(zg.zones.size()) == switches + 1);
        CHECK(zg.edges.size() == static_cast<size_t>(switches));
    }
}

TEST_CASE("parsing is deterministic") {
    std::string text = fixture("fig1.json");
    Scenario a = parse_scenario(text), b = parse_scenario(text);
    REQUIRE(a.buses.size() == b.buses.size());
    for (size_t i = 0; i < a.buses.size(); ++i) CHECK(a.buses[i].id == b.buses[i].id);
    ZoneGraph za = partition_zones(a), zb = partition_zones(b);
    CHECK(za.zone_of_bus == zb.zone_of_bus);
    CHECK(za.zone_of_line == zb.zone_of_line);
}

TEST_CASE("fig1 off-outage area matches the hand traversal") {
    Scenario s = fig1();
    ZoneGraph zg = partition_zones(s);
    OffOutageArea area = locate_off_outage(s, zg);
    std::set<std::string> nstar;
    for (int b : area.buses) nstar.insert(s.buses[b].id);
    CHECK(nstar == std::set<std::string>{"b1", "c1"});
    CHECK(area.zones == std::vector<int>{0, 1});
    std::set<std::string> ties;
    for (int li : area.available_ties) ties.insert(s.lines[li].id);
    CHECK(ties == std::set<std::string>{"T3", "T5"});
    REQUIRE(area.available_feeders.size() == 1);
    CHECK(area.available_feeders[0] == "sb");
    CHECK(area.quarantined_zones.empty());

    // Off-outage closure: no N* bus is reachable from a substation through
    // closed non-tie lines once the fault is isolated.
    for (int b : area.buses) CHECK(zg.zones[zg.zone_of_bus[b]].has_substation == false);
}

TEST_CASE("fault at the feeder head de-energizes the whole feeder") {
    const char* doc = R"({
      "horizon": {"slots": 1, "slot_minutes": 15},
      "max_steps": 1,
      "buses": [{"id": "s"}, {"id": "a", "demand_p": 0.1}, {"id": "b", "demand_p": 0.1}],
      "lines": [
        {"id": "head", "from": "s", "to": "a", "r": 0.01, "x": 0.01, "ampacity": 1,
         "switch": {"kind": "sectionalizing"}},
        {"from": "a", "to": "b", "r": 0.01, "x": 0.01, "ampacity": 1}],
      "generators": [{"node": "s", "kind": "substation", "p_max": 1, "s_max": 2}],
      "fault": {"elements": ["head"]}
    })";
    Scenario s = parse_scenario(doc);
    ZoneGraph zg = partition_zones(s);
    OffOutageArea area = locate_off_outage(s, zg);
    std::set<std::string> nstar;
    for (int b : area.buses) nstar.insert(s.buses[b].id);
    CHECK(nstar == std::set<std::string>{"a", "b"});
}

TEST_CASE("substation fault de-energizes every feeder it serves") {
    const char* doc = R"({
      "horizon": {"slots": 1, "slot_minutes": 15},
      "max_steps": 1,
      "buses": [{"id": "s601"}, {"id": "f1", "demand_p": 0.1}, {"id": "f2", "demand_p": 0.1}],
      "lines": [
        {"id": "B1", "from": "s601", "to": "f1", "r": 0.01, "x": 0.01, "ampacity": 1,
         "switch": {"kind": "sectionalizing"}},
        {"id": "B2", "from": "s601", "to": "f2", "r": 0.01, "x": 0.01, "ampacity": 1,
         "switch": {"kind": "sectionalizing"}}],
      "generators": [{"node": "s601", "kind": "substation", "p_max": 5, "s_max": 8}],
      "fault": {"elements": ["s601"]}
    })";
    Scenario s = parse_scenario(doc);
    ZoneGraph zg = partition_zones(s);
    OffOutageArea area = locate_off_outage(s, zg);
    std::set<std::string> nstar;
    for (int b : area.buses) nstar.insert(s.buses[b].id);
    CHECK(nstar == std::set<std::string>{"f1", "f2"});
    CHECK(area.quarantined_zones.size() == 1); // the faulted substation zone
    CHECK(area.available_ties.empty());
}

TEST_CASE("fault that isolates nothing is an error") {
    // Fault on a tie: removing it de-energizes nothing.
    Scenario s = fig1();
    s.faulted_elements = {"T3"};
    ZoneGraph zg = partition_zones(s);
    CHECK_THROWS_AS(locate_off_outage(s, zg), ModelError);
}
