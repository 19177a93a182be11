// Command-line front end: catalog, fronts, run, report.
#include "rdlab/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

/// Exit codes: 0 all audits pass, 1 audit failure, 2 config error, 3 blow-up.
int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const rdlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const rdlab::BlowUpError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scalar and vector reaction-diffusion lab: fronts, terraces and energy audits"};
    app.require_subcommand(1);
    std::string config, out = "out";
    bool strict = false;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* o = sub->add_option("--config", config, "configuration file");
        if (needs_config) o->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->capture_default_str();
        sub->add_flag("--strict", strict, "halve every audit tolerance");
    };
    auto* cat = app.add_subcommand("catalog", "critical points and derived constants");
    auto* fr = app.add_subcommand("fronts", "solve the front database");
    auto* run = app.add_subcommand("run", "evolve with diagnostics and terrace analysis");
    auto* rep = app.add_subcommand("report", "print the audit summary of a finished run");
    add_common(cat, true);
    add_common(fr, true);
    add_common(run, true);
    add_common(rep, false);
    CLI11_PARSE(app, argc, argv);

    namespace fs = std::filesystem;
    return guarded([&]() -> int {
        if (*cat) {
            const auto e = rdlab::load_experiment(config, strict);
            const auto c = rdlab::catalog_for(e);
            std::ostringstream os;
            rdlab::write_catalog(os, c);
            rdlab::write_text(fs::path(out) / "catalog.txt", os.str());
            std::cout << os.str();
            return 0;
        }
        if (*fr) {
            const auto e = rdlab::load_experiment(config, strict);
            const auto c = rdlab::catalog_for(e);
            const auto recs = rdlab::build_front_db(e, c, fs::path(out) / "fronts");
            for (const auto& r : recs)
                std::cout << rdlab::vec_str(r.request.m_minus) << " -> " << rdlab::vec_str(r.request.m_plus) << " : "
                          << (r.solved ? "c = " + rdlab::fmt17(r.c) : "failed (" + r.message + ")") << "\n";
            return 0;
        }
        if (*run) {
            const auto e = rdlab::load_experiment(config, strict);
            const auto R = rdlab::run_experiment(e, out);
            for (const auto& [k, ok] : R.verdicts) std::cout << k << ": " << (ok ? "pass" : "fail") << "\n";
            std::cout << "overall: " << (R.exit_code == 0 ? "pass" : "fail") << "\n";
            return R.exit_code;
        }
        const fs::path summary = fs::path(out) / "summary.txt";
        std::ifstream f(summary);
        if (!f) throw rdlab::ConfigError("no summary at '" + summary.string() + "'; run first");
        const auto c = rdlab::Config::parse(f, summary.string());
        std::ifstream g(summary);
        std::string line;
        while (std::getline(g, line)) std::cout << line << "\n";
        return c.get_string("overall", "fail") == "pass" ? 0 : 1;
    });
}
