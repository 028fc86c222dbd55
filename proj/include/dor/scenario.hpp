#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dor/attribution.hpp"
#include "dor/localq.hpp"
#include "dor/mmdp.hpp"

namespace dor {

/// Parse or compile failure. `code` is machine-readable (SCHEMA_* for
/// structural problems, VALIDATION_* when the compiled model or trajectory
/// fails its validator); `where` locates the offending field.
struct ScenarioError : std::runtime_error {
    std::string code;
    std::string where;

    ScenarioError(std::string c, std::string w, const std::string& message)
        : std::runtime_error(c + " at " + w + ": " + message),
          code(std::move(c)),
          where(std::move(w)) {}

    bool is_validation() const { return code.rfind("VALIDATION_", 0) == 0; }
};

struct ScenarioAgent {
    std::string id;
    std::string kind = "vehicle";
};

struct AdmissibleRule {
    std::string agent;
    std::string location;
    std::vector<std::string> allow;
};

struct FactoredEntry {
    std::string agent;
    std::string from;
    std::map<std::string, std::string> given;  // neighbor agent -> location; empty = any
    std::string action;
    std::string to;
    double p = 1.0;
};

struct JointEntry {
    std::vector<std::string> from;
    std::vector<std::string> action;
    std::vector<std::string> to;
    double p = 1.0;
};

/// In-memory form of the scenario document. Field names mirror the JSON
/// schema (schema_version, agents, locations, actions, transitions, unsafe,
/// trajectory, graph, metadata).
struct ScenarioFile {
    std::string schema_version = "1";
    std::vector<ScenarioAgent> agents;
    std::vector<std::string> locations;                            // shared label universe
    std::map<std::string, std::vector<std::string>> agent_states;  // optional restriction
    std::map<std::string, std::vector<std::string>> agent_actions;
    std::vector<AdmissibleRule> admissible;
    bool factored = true;
    std::vector<FactoredEntry> factored_entries;
    std::vector<JointEntry> joint_entries;
    UnsafeSpec unsafe;
    std::vector<std::vector<std::string>> trajectory_states;
    std::vector<std::vector<std::string>> trajectory_actions;
    bool trajectory_violation = true;
    std::size_t horizon = 0;  // stage count; must equal the number of states
    bool has_graph = false;
    std::vector<std::pair<std::string, std::string>> graph_edges;
    std::map<std::string, std::string> metadata;
};

/// A scenario compiled into models plus the observed trajectory. Factored
/// scenarios keep their factor structure for the local pipeline; the joint
/// expansion is always available.
struct CompiledScenario {
    std::optional<FactoredMmdp> factored;
    std::optional<Mmdp> joint_only;
    Trajectory trajectory;
    std::map<std::string, std::string> metadata;
    bool has_graph = false;

    const Mmdp& model() const { return factored ? factored->joint : *joint_only; }
    std::string title() const {
        auto it = metadata.find("title");
        return it == metadata.end() ? std::string("scenario") : it->second;
    }
};

/// Resolves labels and expands transitions. Throws ScenarioError (SCHEMA_*)
/// on unresolved labels or malformed entries; runs no validators.
CompiledScenario compile_scenario(const ScenarioFile& file);

/// compile_scenario plus both validators; validator violations are rethrown
/// as VALIDATION_<code>.
CompiledScenario compile_and_validate(const ScenarioFile& file);

/// Full strict path: JSON text -> ScenarioFile -> compiled, validated models.
CompiledScenario parse_scenario(const std::string& text);

ScenarioFile scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const ScenarioFile& file);

enum class BuiltinScenario { Nhtsa1, Nhtsa2, Nhtsa3, Example1 };

/// Embedded scenarios; ids "nhtsa1", "nhtsa2", "nhtsa3", "example1".
ScenarioFile builtin_scenario(BuiltinScenario id);
std::optional<BuiltinScenario> builtin_by_name(const std::string& name);
std::vector<std::string> builtin_names();

enum class ReportFormat { Json, Table };

/// JSON mode is stable-key-ordered and numerically round-trippable; table
/// mode prints Scenario/Agent/DoR columns.
std::string serialize_report(const DorReport& report, ReportFormat format);

/// Parses the JSON emitted by serialize_report (utilities are not part of
/// the wire format and come back empty).
DorReport parse_report(const std::string& text);

}  // namespace dor
