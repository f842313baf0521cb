// Command-line front end: simulate, harmonize, analyze.
#include <CLI11.hpp>
#include <exception>
#include <iostream>

#include "valstudy/error.hpp"
#include "valstudy/pipeline.hpp"

namespace {

void log(const std::string& msg) { std::cerr << "valstudy: " << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Survey-versus-register earnings validation study"};
    app.require_subcommand(1);

    std::string config, out_dir, in_panel, spells, survey;
    int threads = 0;

    auto* sim = app.add_subcommand("simulate", "Simulate a linked panel and write its oracle values");
    sim->add_option("--config", config, "Run configuration (JSON)")->required();
    sim->add_option("--out", out_dir, "Output directory")->required();
    sim->add_option("--threads", threads, "Worker threads (overrides config)")->check(CLI::PositiveNumber);

    auto* ana = app.add_subcommand("analyze", "Run restrictions, balancing and analyses on a panel CSV");
    ana->add_option("--config", config, "Run configuration (JSON)")->required();
    ana->add_option("--in", in_panel, "Panel CSV")->required();
    ana->add_option("--out", out_dir, "Output directory")->required();
    ana->add_option("--threads", threads, "Accepted for symmetry; analyses run in config order")
        ->check(CLI::PositiveNumber);

    auto* har = app.add_subcommand("harmonize", "Link survey responses to register spells");
    har->add_option("--config", config, "Run configuration (JSON)")->required();
    har->add_option("--spells", spells, "Register spell CSV")->required();
    har->add_option("--survey", survey, "Survey response CSV")->required();
    har->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        auto cfg = valstudy::load_run_config(config);
        if (threads > 0) cfg.threads = static_cast<unsigned>(threads);
        if (*sim) {
            log("simulating into " + out_dir);
            valstudy::cmd_simulate(cfg, out_dir);
        } else if (*ana) {
            log("analyzing " + in_panel);
            valstudy::cmd_analyze(cfg, in_panel, out_dir);
        } else {
            log("harmonizing " + survey + " with " + spells);
            valstudy::cmd_harmonize(cfg, spells, survey, out_dir);
        }
        log("done");
        return 0;
    } catch (const valstudy::Error& e) {
        log(std::string("error: ") + e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        log(std::string("error: ") + e.what());
        return 1;
    }
}
