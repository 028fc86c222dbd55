#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dor/localq.hpp"
#include "dor/pipeline.hpp"
#include "dor/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitGuard = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

dor::ScenarioFile load_scenario_file(const std::string& ref) {
    const std::string prefix = "builtin:";
    if (ref.rfind(prefix, 0) == 0) {
        const std::string name = ref.substr(prefix.size());
        auto id = dor::builtin_by_name(name);
        if (!id) throw UsageError("unknown builtin scenario '" + name + "'");
        return dor::builtin_scenario(*id);
    }
    std::ifstream file(ref);
    if (!file) throw UsageError("cannot open scenario file '" + ref + "'");
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return dor::scenario_from_json_text(buffer.str());
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw UsageError("cannot write output file '" + out_path + "'");
    out << text;
}

void print_validation(const dor::ValidationReport& report, const std::string& what) {
    if (report.ok()) {
        std::cout << what << ": ok\n";
        return;
    }
    std::cout << what << ": " << report.violations.size() << " violation(s)\n";
    for (const auto& v : report.violations)
        std::cout << "  [" << v.code << "] " << v.where << ": " << v.message << "\n";
}

std::uint64_t cell_budget_from_env(std::uint64_t fallback) {
    if (const char* env = std::getenv("DOR_CELL_BUDGET")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && v > 0) return v;
        throw UsageError("DOR_CELL_BUDGET must be a positive integer");
    }
    return fallback;
}

std::string action_label(const dor::Mmdp& m, dor::AgentIndex agent, std::uint32_t local_action) {
    return m.action_labels(agent)[local_action];
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"degree-of-responsibility analysis for multi-agent MDP safety violations"};
    app.require_subcommand(1);

    std::string scenario_ref, out_path, format = "json", weights = "uniform";
    double epsilon = 1e-6;
    bool restrict_flag = false, stats_flag = false;
    std::uint32_t k_radius = 0, k_max = 0;
    std::uint64_t cell_budget = dor::QOptions{}.cell_budget;

    auto* validate_cmd = app.add_subcommand("validate", "run model and trajectory validators");
    validate_cmd->add_option("scenario", scenario_ref, "scenario path or builtin:<name>")
        ->required();

    auto* dor_cmd = app.add_subcommand("dor", "compute degrees of responsibility");
    dor_cmd->add_option("scenario", scenario_ref)->required();
    dor_cmd->add_flag("--restrict", restrict_flag,
                      "screen agents first and attribute over that set only");
    dor_cmd->add_option("--epsilon", epsilon, "screening threshold")->check(CLI::PositiveNumber);
    dor_cmd->add_option("--format", format)->check(CLI::IsMember({"json", "table"}));
    dor_cmd->add_option("--out", out_path, "write the report here instead of stdout");
    dor_cmd->add_flag("--stats", stats_flag, "print table size and runtime to stderr");
    dor_cmd->add_option("--cell-budget", cell_budget, "reachability table cell guard");

    auto* identify_cmd = app.add_subcommand("identify", "screen for responsible agents");
    identify_cmd->add_option("scenario", scenario_ref)->required();
    identify_cmd->add_option("--epsilon", epsilon)->check(CLI::PositiveNumber);

    auto* local_cmd = app.add_subcommand("local-dor", "k-hop local approximation of the DoR");
    local_cmd->add_option("scenario", scenario_ref)->required();
    local_cmd->add_option("--k", k_radius, "neighborhood radius")->required();
    local_cmd->add_option("--weights", weights)->check(CLI::IsMember({"uniform"}));
    local_cmd->add_option("--format", format)->check(CLI::IsMember({"json", "table"}));
    local_cmd->add_option("--out", out_path);
    local_cmd->add_flag("--stats", stats_flag);

    auto* decay_cmd = app.add_subcommand("decay-check", "fit an exponential-decay certificate");
    decay_cmd->add_option("scenario", scenario_ref)->required();
    decay_cmd->add_option("--k-max", k_max, "largest radius to check")->required();

    std::string dump_name;
    auto* list_cmd = app.add_subcommand("scenarios", "list builtin scenarios");
    list_cmd->add_option("--dump", dump_name, "print one builtin as a scenario json document");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (list_cmd->parsed()) {
            if (!dump_name.empty()) {
                auto id = dor::builtin_by_name(dump_name);
                if (!id) throw UsageError("unknown builtin scenario '" + dump_name + "'");
                std::cout << dor::scenario_to_json_text(dor::builtin_scenario(*id));
                return kExitOk;
            }
            for (const auto& name : dor::builtin_names()) {
                dor::ScenarioFile f = dor::builtin_scenario(*dor::builtin_by_name(name));
                std::cout << name << "\t" << f.agents.size() << " agents\t"
                          << f.metadata["source"] << "\n";
            }
            return kExitOk;
        }

        dor::ScenarioFile file = load_scenario_file(scenario_ref);

        if (validate_cmd->parsed()) {
            dor::CompiledScenario compiled = dor::compile_scenario(file);
            auto model_report = dor::validate_mmdp(compiled.model());
            auto traj_report = dor::validate_trajectory(compiled.model(), compiled.trajectory);
            print_validation(model_report, "model");
            print_validation(traj_report, "trajectory");
            return model_report.ok() && traj_report.ok() ? kExitOk : kExitValidation;
        }

        if (dor_cmd->parsed()) {
            dor::CompiledScenario compiled = dor::compile_and_validate(file);
            dor::PipelineOptions opts;
            opts.restrict_to_identified = restrict_flag;
            opts.epsilon = epsilon;
            opts.q_options.cell_budget = cell_budget_from_env(cell_budget);
            dor::PipelineStats stats;
            dor::DorReport report =
                dor::analyze(compiled.model(), compiled.trajectory, opts, compiled.title(),
                             &stats);
            write_output(dor::serialize_report(report, format == "json"
                                                           ? dor::ReportFormat::Json
                                                           : dor::ReportFormat::Table),
                         out_path);
            if (stats_flag)
                std::cerr << "[stats] qtable_cells=" << stats.qtable_cells
                          << " qtable_bytes=" << stats.qtable_bytes
                          << " elapsed_s=" << stats.elapsed_seconds << "\n";
            return kExitOk;
        }

        if (identify_cmd->parsed()) {
            dor::CompiledScenario compiled = dor::compile_and_validate(file);
            const dor::Mmdp& m = compiled.model();
            const auto horizon = static_cast<std::uint32_t>(compiled.trajectory.states.size());
            dor::QTable q = dor::compute_q(m, horizon);
            dor::CoalitionMask responsible =
                dor::identify_responsible(m, q, compiled.trajectory, epsilon);
            std::cout << "responsible_set:";
            for (dor::AgentIndex i = 0; i < m.agent_count(); ++i)
                if (responsible & (dor::CoalitionMask(1) << i)) std::cout << " " << m.agents()[i];
            std::cout << "\n";
            for (const auto& imp : dor::marginal_improvements(m, q, compiled.trajectory))
                std::cout << "agent=" << m.agents()[imp.agent] << " stage=" << imp.stage
                          << " improvement=" << imp.improvement
                          << " best_action=" << action_label(m, imp.agent, imp.best_action)
                          << "\n";
            return kExitOk;
        }

        if (local_cmd->parsed()) {
            dor::CompiledScenario compiled = dor::compile_and_validate(file);
            if (!compiled.factored || !compiled.has_graph)
                throw UsageError("local-dor needs a factored scenario with a graph section");
            const dor::FactoredMmdp& fm = *compiled.factored;
            const auto started = std::chrono::steady_clock::now();
            std::optional<dor::DecayCertificate> cert;
            try {
                cert = dor::certify_decay(fm, fm.graph.diameter());
            } catch (const dor::guard_error&) {
                // too large for exhaustive certification; report stays uncertified
            }
            dor::DorReport report = dor::local_dor(fm, compiled.trajectory, k_radius,
                                                   dor::WeightScheme::uniform(), cert,
                                                   compiled.title());
            write_output(dor::serialize_report(report, format == "json"
                                                           ? dor::ReportFormat::Json
                                                           : dor::ReportFormat::Table),
                         out_path);
            if (stats_flag) {
                double elapsed = std::chrono::duration<double>(
                                     std::chrono::steady_clock::now() - started)
                                     .count();
                std::cerr << "[stats] elapsed_s=" << elapsed << "\n";
            }
            return kExitOk;
        }

        if (decay_cmd->parsed()) {
            dor::CompiledScenario compiled = dor::compile_and_validate(file);
            if (!compiled.factored || !compiled.has_graph)
                throw UsageError("decay-check needs a factored scenario with a graph section");
            dor::DecayCertificate cert = dor::certify_decay(*compiled.factored, k_max);
            std::cout << "c=" << cert.c << " gamma=" << cert.gamma
                      << " certified=" << (cert.certified ? "true" : "false") << "\n";
            for (std::uint32_t k = 0; k <= cert.k_max; ++k)
                std::cout << "k=" << k << " worst_deviation=" << cert.worst_deviation[k]
                          << " envelope=" << cert.envelope(k) << "\n";
            return kExitOk;
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const dor::ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.is_validation() ? kExitValidation : kExitUsage;
    } catch (const dor::guard_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGuard;
    } catch (const dor::invariant_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
