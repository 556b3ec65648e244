#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relq/config.hpp"
#include "relq/errors.hpp"
#include "relq/json_format.hpp"
#include "relq/model.hpp"
#include "relq/report.hpp"

namespace {

struct Common {
    std::string model_path;
    std::string out;
    std::vector<std::string> overrides;
    std::vector<std::string> rules;
    std::string k0;
    int horizon = 500;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("model", c.model_path, "model file (JSON)")->required();
    cmd->add_option("--out", c.out, "write the JSON report here instead of stdout");
    cmd->add_option("--tol-override", c.overrides, "replace one tolerance, key=value (repeatable)");
    cmd->add_option("--seed", c.seed, "seed for the degenerate-k0 retry");
}

relq::Tolerances tolerances(const Common& c) {
    relq::Tolerances tol;
    if (const char* path = std::getenv("RELQ_CONFIG"); path && *path) tol = relq::load_tolerances(path, tol);
    for (const auto& o : c.overrides) relq::apply_override(tol, o);
    return tol;
}

void emit(const relq::Report& rep, const std::string& out) {
    const std::string text = relq::dump_canonical(rep.json);
    if (out.empty()) {
        std::cout << text;
    } else {
        std::ofstream f(out, std::ios::binary);
        if (!f) throw relq::UsageError("cli", "cannot write " + out);
        f << text;
    }
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rules versus commitment in linear-quadratic rational expectations models"};
    app.require_subcommand(1);

    Common c;
    std::string solution = "commitment";
    std::string csv;

    auto* analyze = app.add_subcommand("analyze", "full report: controllability, commitment, equilibria, experiments");
    add_common(analyze, c);
    analyze->add_option("--rule", c.rules, "ad hoc rule as comma-separated coefficients (repeatable)");
    analyze->add_option("--k0", c.k0, "initial predetermined state, comma-separated");
    analyze->add_option("--horizon", c.horizon, "simulation horizon");

    auto* enumerate = app.add_subcommand("enumerate", "every saddle-path equilibrium under a rule on k");
    add_common(enumerate, c);
    enumerate->add_option("--rule", c.rules, "coefficients on k (or k and q with zero q part)");

    auto* sim = app.add_subcommand("simulate", "simulate a solution and export the trajectory");
    add_common(sim, c);
    sim->add_option("--solution", solution, "bk or commitment")->check(CLI::IsMember({"bk", "commitment"}));
    sim->add_option("--rule", c.rules, "rule used for the bk solution");
    sim->add_option("--k0", c.k0, "initial predetermined state, comma-separated");
    sim->add_option("--horizon", c.horizon, "number of periods");
    sim->add_option("--csv", csv, "trajectory CSV path");

    auto* identify = app.add_subcommand("identify", "both identification experiments");
    add_common(identify, c);
    identify->add_option("--rule", c.rules, "augmented rule for the saddle-path experiment");
    identify->add_option("--k0", c.k0, "initial predetermined state, comma-separated");
    identify->add_option("--horizon", c.horizon, "simulation horizon");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (c.horizon < 1) throw relq::UsageError("cli", "--horizon must be at least 1");
        relq::RunOptions opt;
        opt.tol = tolerances(c);
        opt.horizon = c.horizon;
        opt.seed = c.seed;
        const relq::ModelSpec model = relq::load_model(c.model_path, opt.tol);
        for (const auto& r : c.rules) opt.rules.push_back(relq::parse_rule(r, model.n, model.m));
        if (!c.k0.empty()) opt.k0 = relq::parse_vector(c.k0, model.n, "k0");

        relq::Report rep;
        if (command == "analyze") {
            rep = relq::run_analyze(model, opt);
        } else if (command == "enumerate") {
            if (opt.rules.size() > 1) throw relq::UsageError("cli", "enumerate takes a single --rule");
            const auto rule = opt.rules.empty() ? relq::PolicyRule::zero(model.n, model.m) : opt.rules.front();
            rep = relq::run_enumerate(model, rule, opt);
        } else if (command == "simulate") {
            const auto kind = solution == "bk" ? relq::SolutionKind::bk : relq::SolutionKind::commitment;
            std::ofstream csv_file;
            if (!csv.empty()) {
                csv_file.open(csv, std::ios::binary);
                if (!csv_file) throw relq::UsageError("cli", "cannot write " + csv);
            }
            rep = relq::run_simulate(model, kind, opt, csv.empty() ? nullptr : &csv_file);
        } else {
            rep = relq::run_identify(model, opt);
        }
        emit(rep, c.out);
        if (rep.exit_code != 0) {
            std::cerr << command << ": finished with status " << rep.json["status"].get<std::string>() << '\n';
        }
        return rep.exit_code;
    } catch (const std::exception& e) {
        const auto rep = relq::error_report(command, e);
        if (const auto* err = dynamic_cast<const relq::Error*>(&e)) {
            std::cerr << "error [" << err->module() << "/" << relq::to_string(err->kind()) << "]: " << e.what() << '\n';
        } else {
            std::cerr << "error: " << e.what() << '\n';
        }
        try {
            emit(rep, c.out);
        } catch (const std::exception&) {
        }
        return rep.exit_code;
    }
}
