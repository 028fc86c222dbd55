#include "dor/scenario.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace dor {

using njson = nlohmann::ordered_json;

namespace {

const njson& need(const njson& obj, const char* key, const std::string& where) {
    if (!obj.is_object())
        throw ScenarioError("SCHEMA_BAD_TYPE", where, "expected an object");
    if (!obj.contains(key))
        throw ScenarioError("SCHEMA_MISSING_KEY", where, std::string("missing key '") + key + "'");
    return obj.at(key);
}

std::string need_string(const njson& obj, const char* key, const std::string& where) {
    const njson& v = need(obj, key, where);
    if (!v.is_string())
        throw ScenarioError("SCHEMA_BAD_TYPE", where + "." + key, "expected a string");
    return v.get<std::string>();
}

double need_number(const njson& obj, const char* key, const std::string& where) {
    const njson& v = need(obj, key, where);
    if (!v.is_number())
        throw ScenarioError("SCHEMA_BAD_TYPE", where + "." + key, "expected a number");
    return v.get<double>();
}

std::vector<std::string> string_array(const njson& v, const std::string& where) {
    if (!v.is_array())
        throw ScenarioError("SCHEMA_BAD_TYPE", where, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string())
            throw ScenarioError("SCHEMA_BAD_TYPE", where, "expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

namespace {
ScenarioFile scenario_from_json(const njson& doc);
}  // namespace

ScenarioFile scenario_from_json_text(const std::string& text) {
    njson doc;
    try {
        doc = njson::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError("SCHEMA_PARSE", "byte " + std::to_string(e.byte), e.what());
    }
    try {
        return scenario_from_json(doc);
    } catch (const nlohmann::json::exception& e) {
        // wrong value type somewhere the schema walk did not anticipate
        throw ScenarioError("SCHEMA_BAD_TYPE", "$", e.what());
    }
}

namespace {

ScenarioFile scenario_from_json(const njson& doc) {
    ScenarioFile f;
    f.schema_version = need_string(doc, "schema_version", "$");
    if (f.schema_version != "1")
        throw ScenarioError("SCHEMA_VERSION", "$.schema_version",
                            "unsupported version '" + f.schema_version + "', expected \"1\"");

    for (const auto& a : need(doc, "agents", "$")) {
        ScenarioAgent agent;
        agent.id = need_string(a, "id", "$.agents[]");
        if (a.contains("kind")) agent.kind = a.at("kind").get<std::string>();
        f.agents.push_back(std::move(agent));
    }
    if (f.agents.empty()) throw ScenarioError("SCHEMA_BAD_TYPE", "$.agents", "no agents");

    const njson& locations = need(doc, "locations", "$");
    if (locations.is_array()) {
        f.locations = string_array(locations, "$.locations");
    } else {
        f.locations = string_array(need(locations, "shared", "$.locations"), "$.locations.shared");
        if (locations.contains("per_agent"))
            for (auto it = locations.at("per_agent").begin(); it != locations.at("per_agent").end();
                 ++it)
                f.agent_states[it.key()] =
                    string_array(it.value(), "$.locations.per_agent." + it.key());
    }

    const njson& actions = need(doc, "actions", "$");
    const njson& labels = need(actions, "labels", "$.actions");
    for (auto it = labels.begin(); it != labels.end(); ++it)
        f.agent_actions[it.key()] = string_array(it.value(), "$.actions.labels." + it.key());
    if (actions.contains("admissible")) {
        for (const auto& r : actions.at("admissible")) {
            AdmissibleRule rule;
            rule.agent = need_string(r, "agent", "$.actions.admissible[]");
            rule.location = need_string(r, "location", "$.actions.admissible[]");
            rule.allow = string_array(need(r, "allow", "$.actions.admissible[]"),
                                      "$.actions.admissible[].allow");
            f.admissible.push_back(std::move(rule));
        }
    }

    const njson& transitions = need(doc, "transitions", "$");
    const std::string mode = need_string(transitions, "mode", "$.transitions");
    if (mode == "factored") {
        f.factored = true;
        for (const auto& e : need(transitions, "entries", "$.transitions")) {
            FactoredEntry entry;
            entry.agent = need_string(e, "agent", "$.transitions.entries[]");
            entry.from = need_string(e, "from", "$.transitions.entries[]");
            entry.action = need_string(e, "action", "$.transitions.entries[]");
            entry.to = need_string(e, "to", "$.transitions.entries[]");
            entry.p = need_number(e, "p", "$.transitions.entries[]");
            if (e.contains("given"))
                for (auto it = e.at("given").begin(); it != e.at("given").end(); ++it)
                    entry.given[it.key()] = it.value().get<std::string>();
            f.factored_entries.push_back(std::move(entry));
        }
    } else if (mode == "joint") {
        f.factored = false;
        for (const auto& e : need(transitions, "entries", "$.transitions")) {
            JointEntry entry;
            entry.from = string_array(need(e, "from", "$.transitions.entries[]"),
                                      "$.transitions.entries[].from");
            entry.action = string_array(need(e, "action", "$.transitions.entries[]"),
                                        "$.transitions.entries[].action");
            entry.to = string_array(need(e, "to", "$.transitions.entries[]"),
                                    "$.transitions.entries[].to");
            entry.p = need_number(e, "p", "$.transitions.entries[]");
            f.joint_entries.push_back(std::move(entry));
        }
    } else {
        throw ScenarioError("SCHEMA_BAD_TYPE", "$.transitions.mode",
                            "mode must be 'factored' or 'joint', got '" + mode + "'");
    }

    const njson& unsafe = need(doc, "unsafe", "$");
    const std::string kind = need_string(unsafe, "kind", "$.unsafe");
    const njson params = unsafe.contains("params") ? unsafe.at("params") : njson::object();
    if (kind == "collision") {
        f.unsafe = UnsafeSpec::collision();
    } else if (kind == "explicit") {
        std::vector<std::vector<std::string>> states;
        for (const auto& s : need(params, "states", "$.unsafe.params"))
            states.push_back(string_array(s, "$.unsafe.params.states[]"));
        f.unsafe = UnsafeSpec::explicit_list(std::move(states));
    } else if (kind == "forbidden") {
        f.unsafe = UnsafeSpec::forbidden(
            need_string(params, "agent", "$.unsafe.params"),
            string_array(need(params, "locations", "$.unsafe.params"),
                         "$.unsafe.params.locations"));
    } else {
        throw ScenarioError("SCHEMA_BAD_TYPE", "$.unsafe.kind", "unknown kind '" + kind + "'");
    }

    const njson& trajectory = need(doc, "trajectory", "$");
    for (const auto& s : need(trajectory, "states", "$.trajectory"))
        f.trajectory_states.push_back(string_array(s, "$.trajectory.states[]"));
    for (const auto& a : need(trajectory, "actions", "$.trajectory"))
        f.trajectory_actions.push_back(string_array(a, "$.trajectory.actions[]"));
    if (trajectory.contains("violation")) f.trajectory_violation = trajectory.at("violation");
    f.horizon = trajectory.contains("horizon")
                    ? trajectory.at("horizon").get<std::size_t>()
                    : f.trajectory_states.size();
    if (f.horizon != f.trajectory_states.size())
        throw ScenarioError("SCHEMA_BAD_SHAPE", "$.trajectory.horizon",
                            "horizon " + std::to_string(f.horizon) + " does not match " +
                                std::to_string(f.trajectory_states.size()) + " states");

    if (doc.contains("graph")) {
        f.has_graph = true;
        for (const auto& e : need(doc.at("graph"), "edges", "$.graph")) {
            auto pair = string_array(e, "$.graph.edges[]");
            if (pair.size() != 2)
                throw ScenarioError("SCHEMA_BAD_TYPE", "$.graph.edges[]",
                                    "an edge needs exactly two agent ids");
            f.graph_edges.emplace_back(pair[0], pair[1]);
        }
    }

    if (doc.contains("metadata"))
        for (auto it = doc.at("metadata").begin(); it != doc.at("metadata").end(); ++it)
            f.metadata[it.key()] = it.value().get<std::string>();
    return f;
}

}  // namespace

std::string scenario_to_json_text(const ScenarioFile& f) {
    njson doc;
    doc["schema_version"] = f.schema_version;
    doc["agents"] = njson::array();
    for (const auto& a : f.agents) doc["agents"].push_back({{"id", a.id}, {"kind", a.kind}});
    if (f.agent_states.empty()) {
        doc["locations"] = f.locations;
    } else {
        doc["locations"]["shared"] = f.locations;
        for (const auto& [id, states] : f.agent_states)
            doc["locations"]["per_agent"][id] = states;
    }
    for (const auto& [id, labels] : f.agent_actions) doc["actions"]["labels"][id] = labels;
    if (!f.admissible.empty()) {
        doc["actions"]["admissible"] = njson::array();
        for (const auto& r : f.admissible)
            doc["actions"]["admissible"].push_back(
                {{"agent", r.agent}, {"location", r.location}, {"allow", r.allow}});
    }
    doc["transitions"]["mode"] = f.factored ? "factored" : "joint";
    doc["transitions"]["entries"] = njson::array();
    if (f.factored) {
        for (const auto& e : f.factored_entries) {
            njson entry{{"agent", e.agent}, {"from", e.from},
                        {"action", e.action}, {"to", e.to},
                        {"p", e.p}};
            if (!e.given.empty()) entry["given"] = e.given;
            doc["transitions"]["entries"].push_back(std::move(entry));
        }
    } else {
        for (const auto& e : f.joint_entries)
            doc["transitions"]["entries"].push_back(
                {{"from", e.from}, {"action", e.action}, {"to", e.to}, {"p", e.p}});
    }
    switch (f.unsafe.kind) {
        case UnsafeSpec::Kind::Collision:
            doc["unsafe"] = {{"kind", "collision"}, {"params", njson::object()}};
            break;
        case UnsafeSpec::Kind::ExplicitList:
            doc["unsafe"] = {{"kind", "explicit"},
                             {"params", {{"states", f.unsafe.explicit_states}}}};
            break;
        case UnsafeSpec::Kind::Forbidden:
            doc["unsafe"] = {{"kind", "forbidden"},
                             {"params",
                              {{"agent", f.unsafe.forbidden_agent},
                               {"locations", f.unsafe.forbidden_locations}}}};
            break;
    }
    doc["trajectory"]["horizon"] = f.horizon ? f.horizon : f.trajectory_states.size();
    doc["trajectory"]["states"] = f.trajectory_states;
    doc["trajectory"]["actions"] = f.trajectory_actions;
    doc["trajectory"]["violation"] = f.trajectory_violation;
    if (f.has_graph) {
        doc["graph"]["edges"] = njson::array();
        for (const auto& [a, b] : f.graph_edges) doc["graph"]["edges"].push_back({a, b});
    }
    doc["metadata"] = f.metadata;
    return doc.dump(2) + "\n";
}

namespace {

struct LabelResolver {
    const ScenarioFile& f;
    std::map<std::string, AgentIndex> agent_index;
    std::vector<std::vector<std::string>> states;   // per agent
    std::vector<std::vector<std::string>> actions;  // per agent

    explicit LabelResolver(const ScenarioFile& file) : f(file) {
        for (AgentIndex i = 0; i < f.agents.size(); ++i) {
            if (!agent_index.emplace(f.agents[i].id, i).second)
                throw ScenarioError("SCHEMA_UNKNOWN_AGENT", "$.agents",
                                    "duplicate agent id '" + f.agents[i].id + "'");
        }
        states.resize(f.agents.size());
        actions.resize(f.agents.size());
        for (AgentIndex i = 0; i < f.agents.size(); ++i) {
            const std::string& id = f.agents[i].id;
            auto st = f.agent_states.find(id);
            states[i] = st == f.agent_states.end() ? f.locations : st->second;
            if (states[i].empty())
                throw ScenarioError("SCHEMA_BAD_TYPE", "$.locations",
                                    "agent '" + id + "' has no states");
            for (const auto& s : states[i])
                if (!f.locations.empty() &&
                    std::find(f.locations.begin(), f.locations.end(), s) == f.locations.end())
                    throw ScenarioError("SCHEMA_UNKNOWN_LOCATION", "$.locations",
                                        "state '" + s + "' of agent '" + id +
                                            "' is not a listed location");
            auto ac = f.agent_actions.find(id);
            if (ac == f.agent_actions.end() || ac->second.empty())
                throw ScenarioError("SCHEMA_MISSING_KEY", "$.actions.labels",
                                    "agent '" + id + "' has no action labels");
            actions[i] = ac->second;
        }
    }

    AgentIndex agent(const std::string& id, const std::string& where) const {
        auto it = agent_index.find(id);
        if (it == agent_index.end())
            throw ScenarioError("SCHEMA_UNKNOWN_AGENT", where, "unknown agent '" + id + "'");
        return it->second;
    }

    std::uint32_t state(AgentIndex i, const std::string& label, const std::string& where) const {
        auto it = std::find(states[i].begin(), states[i].end(), label);
        if (it == states[i].end())
            throw ScenarioError("SCHEMA_UNKNOWN_LOCATION", where,
                                "unknown location '" + label + "' for agent '" + f.agents[i].id +
                                    "'");
        return static_cast<std::uint32_t>(it - states[i].begin());
    }

    std::uint32_t action(AgentIndex i, const std::string& label, const std::string& where) const {
        auto it = std::find(actions[i].begin(), actions[i].end(), label);
        if (it == actions[i].end())
            throw ScenarioError("SCHEMA_UNKNOWN_ACTION", where,
                                "unknown action '" + label + "' for agent '" + f.agents[i].id +
                                    "'");
        return static_cast<std::uint32_t>(it - actions[i].begin());
    }
};

Trajectory compile_trajectory(const ScenarioFile& f, const LabelResolver& r,
                              const IndexSpace& states, const IndexSpace& actions) {
    Trajectory tr;
    tr.violation = f.trajectory_violation;
    std::vector<std::uint32_t> digits(f.agents.size());
    for (const auto& row : f.trajectory_states) {
        if (row.size() != f.agents.size())
            throw ScenarioError("SCHEMA_BAD_SHAPE", "$.trajectory.states",
                                "state tuple arity does not match agent count");
        for (AgentIndex i = 0; i < row.size(); ++i)
            digits[i] = r.state(i, row[i], "$.trajectory.states");
        tr.states.push_back(states.encode(digits));
    }
    for (const auto& row : f.trajectory_actions) {
        if (row.size() != f.agents.size())
            throw ScenarioError("SCHEMA_BAD_SHAPE", "$.trajectory.actions",
                                "action tuple arity does not match agent count");
        for (AgentIndex i = 0; i < row.size(); ++i)
            digits[i] = r.action(i, row[i], "$.trajectory.actions");
        tr.actions.push_back(actions.encode(digits));
    }
    return tr;
}

}  // namespace

CompiledScenario compile_scenario(const ScenarioFile& f) {
    LabelResolver r(f);
    const std::size_t n = f.agents.size();

    CompiledScenario out;
    out.metadata = f.metadata;
    out.has_graph = f.has_graph;

    InteractionGraph graph;
    if (f.has_graph) {
        std::vector<std::pair<AgentIndex, AgentIndex>> edges;
        for (const auto& [a, b] : f.graph_edges)
            edges.emplace_back(r.agent(a, "$.graph.edges"), r.agent(b, "$.graph.edges"));
        graph = InteractionGraph(n, std::move(edges));
    } else {
        graph = InteractionGraph(n, {});
    }

    if (f.factored) {
        FactoredMmdpBuilder fb;
        std::vector<std::string> names;
        for (const auto& a : f.agents) names.push_back(a.id);
        fb.agents(names);
        for (AgentIndex i = 0; i < n; ++i) {
            fb.state_labels(i, r.states[i]);
            fb.action_labels(i, r.actions[i]);
        }
        for (const auto& rule : f.admissible) {
            AgentIndex i = r.agent(rule.agent, "$.actions.admissible");
            std::vector<std::uint32_t> allow;
            for (const auto& lbl : rule.allow)
                allow.push_back(r.action(i, lbl, "$.actions.admissible"));
            fb.admissible(i, r.state(i, rule.location, "$.actions.admissible"), allow);
        }
        fb.graph(graph);
        fb.unsafe(f.unsafe);

        // Group per (agent, own state, given-config, action); unconditioned
        // entries apply to every neighbor configuration.
        struct RowKey {
            AgentIndex agent;
            std::uint32_t from;
            std::string given;
            std::uint32_t action;
            bool operator<(const RowKey& o) const {
                return std::tie(agent, from, given, action) <
                       std::tie(o.agent, o.from, o.given, o.action);
            }
        };
        std::map<RowKey, std::vector<std::pair<std::uint32_t, double>>> rows;
        for (const auto& e : f.factored_entries) {
            AgentIndex i = r.agent(e.agent, "$.transitions.entries");
            RowKey key{i, r.state(i, e.from, "$.transitions.entries"), "",
                       r.action(i, e.action, "$.transitions.entries")};
            if (!e.given.empty()) {
                std::ostringstream os;
                for (const auto& [nb, loc] : e.given) {
                    AgentIndex j = r.agent(nb, "$.transitions.entries.given");
                    os << j << "=" << r.state(j, loc, "$.transitions.entries.given") << ";";
                }
                key.given = os.str();
            }
            rows[key].emplace_back(r.state(i, e.to, "$.transitions.entries"), e.p);
        }

        // Instantiate factor rows over every scope configuration.
        std::vector<std::uint32_t> ssizes;
        for (AgentIndex i = 0; i < n; ++i)
            ssizes.push_back(static_cast<std::uint32_t>(r.states[i].size()));
        for (AgentIndex i = 0; i < n; ++i) {
            std::vector<AgentIndex> scope = graph.neighbors(i);
            scope.push_back(i);
            std::sort(scope.begin(), scope.end());
            std::vector<std::uint32_t> scope_sizes;
            for (AgentIndex j : scope) scope_sizes.push_back(ssizes[j]);
            IndexSpace scope_space(scope_sizes);
            std::vector<std::uint32_t> sdig(scope.size());
            const std::size_t own = std::find(scope.begin(), scope.end(), i) - scope.begin();
            for (std::uint32_t cfg = 0; cfg < scope_space.size(); ++cfg) {
                scope_space.decode(cfg, sdig);
                std::ostringstream os;
                for (std::size_t j = 0; j < scope.size(); ++j)
                    if (scope[j] != i) os << scope[j] << "=" << sdig[j] << ";";
                const std::string given = os.str();
                for (std::uint32_t a = 0; a < r.actions[i].size(); ++a) {
                    auto it = rows.find(RowKey{i, sdig[own], given, a});
                    if (it == rows.end()) it = rows.find(RowKey{i, sdig[own], "", a});
                    if (it == rows.end()) continue;
                    try {
                        fb.factor(i, sdig, a, it->second);
                    } catch (const invariant_error& err) {
                        throw ScenarioError("VALIDATION_ROW_SUM", "$.transitions.entries",
                                            err.what());
                    }
                }
            }
        }

        try {
            out.factored = fb.finish();
        } catch (const invariant_error& err) {
            throw ScenarioError("SCHEMA_MISSING_TRANSITION", "$.transitions.entries", err.what());
        }
        out.trajectory = compile_trajectory(f, r, out.factored->joint.states(),
                                            out.factored->joint.actions());
    } else {
        MmdpBuilder mb;
        std::vector<std::string> names;
        for (const auto& a : f.agents) names.push_back(a.id);
        mb.agents(names);
        for (AgentIndex i = 0; i < n; ++i) {
            mb.state_labels(i, r.states[i]);
            mb.action_labels(i, r.actions[i]);
        }
        for (const auto& rule : f.admissible) {
            AgentIndex i = r.agent(rule.agent, "$.actions.admissible");
            std::vector<std::uint32_t> allow;
            for (const auto& lbl : rule.allow)
                allow.push_back(r.action(i, lbl, "$.actions.admissible"));
            mb.admissible(i, r.state(i, rule.location, "$.actions.admissible"), allow);
        }
        mb.unsafe(f.unsafe);
        std::vector<std::uint32_t> from(n), act(n), to(n);
        for (const auto& e : f.joint_entries) {
            if (e.from.size() != n || e.action.size() != n || e.to.size() != n)
                throw ScenarioError("SCHEMA_BAD_SHAPE", "$.transitions.entries",
                                    "joint entry arity does not match agent count");
            for (AgentIndex i = 0; i < n; ++i) {
                from[i] = r.state(i, e.from[i], "$.transitions.entries.from");
                act[i] = r.action(i, e.action[i], "$.transitions.entries.action");
                to[i] = r.state(i, e.to[i], "$.transitions.entries.to");
            }
            mb.transition_t(from, act, to, e.p);
        }
        try {
            out.joint_only = mb.finish();
        } catch (const std::invalid_argument& err) {
            throw ScenarioError("SCHEMA_BAD_UNSAFE", "$.unsafe", err.what());
        }
        out.trajectory =
            compile_trajectory(f, r, out.joint_only->states(), out.joint_only->actions());
    }
    return out;
}

CompiledScenario compile_and_validate(const ScenarioFile& file) {
    CompiledScenario compiled = compile_scenario(file);
    ValidationReport model_report = validate_mmdp(compiled.model());
    if (!model_report.ok()) {
        const auto& v = model_report.violations.front();
        throw ScenarioError("VALIDATION_" + v.code, v.where, v.message);
    }
    ValidationReport traj_report = validate_trajectory(compiled.model(), compiled.trajectory);
    if (!traj_report.ok()) {
        const auto& v = traj_report.violations.front();
        throw ScenarioError("VALIDATION_" + v.code, v.where, v.message);
    }
    return compiled;
}

CompiledScenario parse_scenario(const std::string& text) {
    return compile_and_validate(scenario_from_json_text(text));
}

namespace {

std::vector<std::string> number_labels(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(std::to_string(i));
    return out;
}

void move_entry(ScenarioFile& f, const char* agent, const char* from, const char* action,
                const char* to) {
    f.factored_entries.push_back({agent, from, {}, action, to, 1.0});
}

void stop_entry(ScenarioFile& f, const char* agent, const char* cell) {
    move_entry(f, agent, cell, "stop", cell);
}

ScenarioFile make_nhtsa1() {
    ScenarioFile f;
    f.agents = {{"1", "vehicle"}, {"2", "vehicle"}, {"P1", "pedestrian"}};
    f.locations = number_labels(12);
    f.agent_states = {{"1", {"0", "3", "6", "9"}}, {"2", {"1", "4", "7", "10"}}, {"P1", {"9"}}};
    f.agent_actions = {{"1", {"move_forward", "stop"}},
                       {"2", {"move_forward", "stop"}},
                       {"P1", {"stay"}}};
    f.admissible = {{"1", "9", {"stop"}}, {"2", "10", {"stop"}}};
    move_entry(f, "1", "0", "move_forward", "3");
    move_entry(f, "1", "3", "move_forward", "6");
    move_entry(f, "1", "6", "move_forward", "9");
    for (const char* c : {"0", "3", "6", "9"}) stop_entry(f, "1", c);
    move_entry(f, "2", "1", "move_forward", "4");
    move_entry(f, "2", "4", "move_forward", "7");
    move_entry(f, "2", "7", "move_forward", "10");
    for (const char* c : {"1", "4", "7", "10"}) stop_entry(f, "2", c);
    move_entry(f, "P1", "9", "stay", "9");
    f.unsafe = UnsafeSpec::collision();
    f.horizon = 4;
    f.trajectory_states = {{"0", "1", "9"}, {"3", "4", "9"}, {"6", "7", "9"}, {"9", "10", "9"}};
    f.trajectory_actions = {{"move_forward", "move_forward", "stay"},
                            {"move_forward", "move_forward", "stay"},
                            {"move_forward", "move_forward", "stay"}};
    f.metadata = {
        {"title", "nhtsa1"},
        {"source", "NHTSA pre-crash scenario: vehicle strikes stationary pedestrian"},
        {"description",
         "Two vehicles drive parallel lanes of a three-lane segment discretized into 12 cells "
         "(row-major, 3 columns). Vehicle 1 runs cells 0-3-6-9 and hits the pedestrian standing "
         "at cell 9; vehicle 2 runs 1-4-7-10. Stopping at 6 avoids the collision."},
        {"geometry", "derived: 4 rows x 3 lanes, cell = 3*row + lane; pinned by the DoR outcome"}};
    return f;
}

ScenarioFile make_nhtsa2() {
    ScenarioFile f;
    f.agents = {{"1", "vehicle"}, {"2", "vehicle"}, {"3", "vehicle"}};
    f.locations = number_labels(8);
    f.agent_states = {{"1", {"7", "6", "2"}}, {"2", {"2", "3"}}, {"3", {"0", "1", "2"}}};
    f.agent_actions = {{"1", {"move_forward", "forward_left", "stop"}},
                       {"2", {"move_forward", "stop"}},
                       {"3", {"move_forward", "stop"}}};
    f.admissible = {{"1", "7", {"move_forward", "stop"}}, {"1", "6", {"forward_left", "stop"}},
                    {"1", "2", {"stop"}},                 {"2", "2", {"move_forward"}},
                    {"2", "3", {"stop"}},                 {"3", "0", {"move_forward", "stop"}},
                    {"3", "1", {"move_forward", "stop"}}, {"3", "2", {"stop"}}};
    move_entry(f, "1", "7", "move_forward", "6");
    stop_entry(f, "1", "7");
    move_entry(f, "1", "6", "forward_left", "2");
    stop_entry(f, "1", "6");
    stop_entry(f, "1", "2");
    move_entry(f, "2", "2", "move_forward", "3");
    stop_entry(f, "2", "3");
    move_entry(f, "3", "0", "move_forward", "1");
    stop_entry(f, "3", "0");
    move_entry(f, "3", "1", "move_forward", "2");
    stop_entry(f, "3", "1");
    stop_entry(f, "3", "2");
    f.unsafe = UnsafeSpec::collision();
    f.horizon = 3;
    f.trajectory_states = {{"7", "2", "0"}, {"6", "3", "1"}, {"2", "3", "2"}};
    f.trajectory_actions = {{"move_forward", "move_forward", "move_forward"},
                            {"forward_left", "stop", "move_forward"}};
    f.metadata = {
        {"title", "nhtsa2"},
        {"source", "NHTSA pre-crash scenario: U-turn into oncoming traffic"},
        {"description",
         "Two-lane road discretized into 8 cells (columns 0-3 and 4-7). Vehicles 2 and 3 head up "
         "the left lane (0-1-2-3); vehicle 1 heads down the right lane (7-6) and swings across "
         "into cell 2, colliding with vehicle 3 arriving there. The safe alternative for vehicle "
         "1 is to hold at 6 until vehicle 3 has passed on to 3; vehicle 2 is already clear and "
         "never has an alternative action."},
        {"geometry", "derived: 4 rows x 2 lanes, lane cells 0-3 up / 7-4 down; pinned by the DoR "
                     "outcome"}};
    return f;
}

ScenarioFile make_nhtsa3() {
    ScenarioFile f;
    f.agents = {{"1", "vehicle"}, {"2", "vehicle"}};
    f.locations = number_labels(9);
    f.agent_states = {{"1", {"0", "4", "7", "8"}}, {"2", {"2", "5", "8"}}};
    f.agent_actions = {{"1", {"move_forward", "forward_right", "stop"}},
                       {"2", {"move_forward", "stop"}}};
    f.admissible = {{"1", "0", {"forward_right", "stop"}},
                    {"1", "4", {"move_forward", "forward_right", "stop"}},
                    {"1", "7", {"stop"}},
                    {"1", "8", {"stop"}},
                    {"2", "2", {"move_forward"}},
                    {"2", "5", {"move_forward"}},
                    {"2", "8", {"stop"}}};
    move_entry(f, "1", "0", "forward_right", "4");
    stop_entry(f, "1", "0");
    move_entry(f, "1", "4", "move_forward", "7");
    move_entry(f, "1", "4", "forward_right", "8");
    stop_entry(f, "1", "4");
    stop_entry(f, "1", "7");
    stop_entry(f, "1", "8");
    move_entry(f, "2", "2", "move_forward", "5");
    move_entry(f, "2", "5", "move_forward", "8");
    stop_entry(f, "2", "8");
    f.unsafe = UnsafeSpec::collision();
    f.horizon = 3;
    f.trajectory_states = {{"0", "2"}, {"4", "5"}, {"8", "8"}};
    f.trajectory_actions = {{"forward_right", "move_forward"}, {"forward_right", "move_forward"}};
    f.metadata = {
        {"title", "nhtsa3"},
        {"source", "NHTSA pre-crash scenario: merging vehicle strikes through traffic"},
        {"description",
         "3x3 grid (cell = 3*row + column). Vehicle 2 cruises up the rightmost column 2-5-8 with "
         "no alternative actions; vehicle 1 leaves the gas station at 0 and merges diagonally "
         "0-4-8 into vehicle 2's lane, colliding at 8. Staying in the middle column (4-7) or "
         "stopping would have avoided the crash."},
        {"geometry", "derived: 3 rows x 3 columns; pinned by the DoR outcome"}};
    return f;
}

ScenarioFile make_example1() {
    ScenarioFile f;
    f.agents = {{"1", "vehicle"}, {"2", "vehicle"}, {"3", "vehicle"}, {"4", "vehicle"}};
    f.locations = number_labels(8);
    f.agent_states = {
        {"1", {"1"}}, {"2", {"0", "2", "4", "5"}}, {"3", {"7", "5", "3"}}, {"4", {"6"}}};
    f.agent_actions = {{"1", {"stop"}},
                       {"2", {"move_forward", "forward_right", "stop"}},
                       {"3", {"move_forward", "stop"}},
                       {"4", {"stop"}}};
    f.admissible = {{"2", "0", {"move_forward", "stop"}},
                    {"2", "2", {"move_forward", "forward_right", "stop"}},
                    {"2", "4", {"stop"}},
                    {"2", "5", {"stop"}},
                    {"3", "7", {"move_forward", "stop"}},
                    {"3", "5", {"move_forward", "stop"}},
                    {"3", "3", {"stop"}}};
    stop_entry(f, "1", "1");
    move_entry(f, "2", "0", "move_forward", "2");
    stop_entry(f, "2", "0");
    move_entry(f, "2", "2", "move_forward", "4");
    move_entry(f, "2", "2", "forward_right", "5");
    stop_entry(f, "2", "2");
    stop_entry(f, "2", "4");
    stop_entry(f, "2", "5");
    move_entry(f, "3", "7", "move_forward", "5");
    stop_entry(f, "3", "7");
    move_entry(f, "3", "5", "move_forward", "3");
    stop_entry(f, "3", "5");
    stop_entry(f, "3", "3");
    stop_entry(f, "4", "6");
    f.unsafe = UnsafeSpec::collision();
    f.has_graph = true;
    f.graph_edges = {{"1", "2"}, {"2", "3"}, {"3", "4"}};
    f.horizon = 3;
    f.trajectory_states = {{"1", "0", "7", "6"}, {"1", "2", "7", "6"}, {"1", "5", "5", "6"}};
    f.trajectory_actions = {{"stop", "move_forward", "stop", "stop"},
                            {"stop", "forward_right", "move_forward", "stop"}};
    f.metadata = {
        {"title", "example1"},
        {"source", "two-lane road segment shared by four vehicles"},
        {"description",
         "Eight cells, two lanes (even cells up, odd cells down). Vehicles 1 and 4 are parked at "
         "1 and 6. Vehicle 2 climbs 0-2 and cuts right into cell 5 exactly as vehicle 3 comes "
         "down from 7, so they collide at 5. Either of them could have held position instead."},
        {"geometry", "derived: 4 rows x 2 lanes, cell = 2*row + lane"}};
    return f;
}

}  // namespace

ScenarioFile builtin_scenario(BuiltinScenario id) {
    switch (id) {
        case BuiltinScenario::Nhtsa1: return make_nhtsa1();
        case BuiltinScenario::Nhtsa2: return make_nhtsa2();
        case BuiltinScenario::Nhtsa3: return make_nhtsa3();
        case BuiltinScenario::Example1: return make_example1();
    }
    throw std::invalid_argument("builtin_scenario: unknown id");
}

std::optional<BuiltinScenario> builtin_by_name(const std::string& name) {
    if (name == "nhtsa1") return BuiltinScenario::Nhtsa1;
    if (name == "nhtsa2") return BuiltinScenario::Nhtsa2;
    if (name == "nhtsa3") return BuiltinScenario::Nhtsa3;
    if (name == "example1") return BuiltinScenario::Example1;
    return std::nullopt;
}

std::vector<std::string> builtin_names() { return {"nhtsa1", "nhtsa2", "nhtsa3", "example1"}; }

namespace {

std::string trim_number(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

}  // namespace

std::string serialize_report(const DorReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        njson doc;
        doc["scenario"] = report.scenario;
        doc["agents"] = njson::array();
        for (std::size_t i = 0; i < report.agents.size(); ++i)
            doc["agents"].push_back(
                {{"id", report.agents[i]}, {"phi", report.phi[i]}, {"psi", report.psi[i]}});
        doc["responsible_set"] = njson::array();
        for (std::size_t i = 0; i < report.agents.size(); ++i)
            if (report.responsible & (CoalitionMask(1) << i))
                doc["responsible_set"].push_back(report.agents[i]);
        doc["no_responsibility"] = report.no_responsibility;
        if (report.bound) doc["bound"] = *report.bound;
        if (report.uncertified_bound) doc["uncertified_bound"] = true;
        return doc.dump(2) + "\n";
    }

    std::ostringstream os;
    os << "Scenario\tAgent\tDoR\n";
    for (std::size_t i = 0; i < report.agents.size(); ++i)
        os << (i == 0 ? report.scenario : "") << "\t" << report.agents[i] << "\t"
           << trim_number(report.psi[i]) << "\n";
    if (report.no_responsibility) os << "(no responsibility: all shapley values are zero)\n";
    return os.str();
}

DorReport parse_report(const std::string& text) {
    njson doc = njson::parse(text);
    DorReport report;
    report.scenario = doc.at("scenario").get<std::string>();
    for (const auto& a : doc.at("agents")) {
        report.agents.push_back(a.at("id").get<std::string>());
        report.phi.push_back(a.at("phi").get<double>());
        report.psi.push_back(a.at("psi").get<double>());
    }
    for (const auto& id : doc.at("responsible_set")) {
        auto it = std::find(report.agents.begin(), report.agents.end(), id.get<std::string>());
        if (it != report.agents.end())
            report.responsible |= CoalitionMask(1) << (it - report.agents.begin());
    }
    report.no_responsibility = doc.at("no_responsibility").get<bool>();
    if (doc.contains("bound")) report.bound = doc.at("bound").get<double>();
    if (doc.contains("uncertified_bound")) report.uncertified_bound = true;
    return report;
}

}  // namespace dor
