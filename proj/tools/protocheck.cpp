#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "protocheck/report.hpp"

#ifndef PROTOCHECK_FIXTURE_DIR
#define PROTOCHECK_FIXTURE_DIR "fixtures"
#endif

int main(int argc, char** argv)
{
    using namespace protocheck;

    CLI::App app{"Bounded Dolev-Yao search, BAN inference and strand-space checks for authentication protocols"};
    std::string protocol;
    std::string engine = "search";
    std::string sessions;
    std::string format = "text";
    std::string idealization;
    std::string fixture_dir = PROTOCHECK_FIXTURE_DIR;
    RunConfig config;

    app.add_option("--protocol", protocol, "Protocol file or bundled fixture name (nspk, nsl)")->required();
    app.add_option("--engine", engine, "search | ban | strand | all")
        ->check(CLI::IsMember({"search", "ban", "strand", "all"}));
    app.add_option("--sessions", sessions, "Sessions per role, e.g. A=1,B=2");
    app.add_option("--max-depth", config.bounds.max_depth, "Maximum trace length")
        ->check(CLI::Range(std::size_t{1}, kMaxDepth));
    app.add_option("--state-budget", config.bounds.state_budget, "Give up after this many states")
        ->check(CLI::PositiveNumber);
    app.add_option("--workers", config.bounds.workers, "Successor-expansion threads")
        ->check(CLI::Range(1u, 256u));
    app.add_option("--format", format, "text | json")->check(CLI::IsMember({"text", "json"}));
    app.add_option("--idealization", idealization, "Idealized protocol for the ban engine");
    app.add_option("--fixtures", fixture_dir, "Directory searched for bundled fixture names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitInputError;
    }

    try {
        if (!sessions.empty())
            config.bounds.sessions = parse_session_bounds(sessions);
    } catch (const std::invalid_argument& e) {
        std::cerr << "protocheck: " << e.what() << "\n";
        return kExitInputError;
    }
    config.protocol = resolve_input(protocol, fixture_dir);
    config.engine = *engine_from_string(engine);
    config.format = *format_from_string(format);
    if (!idealization.empty())
        config.idealization = resolve_input(idealization, fixture_dir);

    RunReport report = run(config);
    if (config.format == Format::Json)
        std::cout << render_json(report);
    else
        std::cout << render_text(report);
    if (!report.error.empty())
        std::cerr << "protocheck: " << report.error << "\n";
    return report.exit_code;
}
