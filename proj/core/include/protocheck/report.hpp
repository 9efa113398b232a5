#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protocheck/ban.hpp"
#include "protocheck/model_checker.hpp"
#include "protocheck/protocol.hpp"

namespace protocheck {

enum class Engine { Search, Ban, Strand, All };
enum class Format { Text, Json };

std::optional<Engine> engine_from_string(std::string_view s);
std::optional<Format> format_from_string(std::string_view s);

/// Process exit codes.
enum ExitCode : int {
    kExitClean = 0,
    kExitInputError = 2,
    kExitBudget = 3,
    kExitViolation = 10,
};

struct RunConfig {
    std::string protocol;
    Engine engine = Engine::Search;
    Bounds bounds;
    Format format = Format::Text;
    std::optional<std::string> idealization;
};

/// Parses `A=1,B=2`. Throws std::invalid_argument on malformed input.
std::map<std::string, int> parse_session_bounds(std::string_view text);

/// `name` itself when it names a file, else `<fixture_dir>/<name>` with the
/// extensions `.proto.casper` and `.ban` tried in turn.
std::string resolve_input(const std::string& name, const std::string& fixture_dir);

struct SearchOutcome {
    enum class Verdict { Attack, Exhausted, BudgetExceeded };
    Verdict verdict = Verdict::Exhausted;
    std::vector<std::string> violated;
    std::vector<Event> trace;
    Bindings bindings;
    int witness_session = -1;
    std::string witness_role;
    SearchStats stats;
    /// Session count per role actually searched.
    std::map<std::string, int> sessions;
    std::size_t max_depth = 0;
};

struct StrandOutcome {
    enum class Verdict { Holds, Fails, HypothesesNotMet, NoResponder };
    Verdict verdict = Verdict::NoResponder;
    /// "attack" or "honest run".
    std::string source;
    std::size_t strands = 0;
    std::size_t edges = 0;
    std::vector<std::string> violations;
    std::string responder;
    std::string initiator;
    std::vector<std::string> witnesses;
    std::string note;
};

struct BanOutcome {
    std::size_t derived = 0;
    std::vector<ban::GoalVerdict> goals;
    /// Text of each unjustified assumption, by label.
    std::map<std::string, std::vector<std::string>> unjustified;
};

struct RunReport {
    std::string protocol;
    std::string intruder = "I";
    std::optional<SearchOutcome> search;
    std::optional<StrandOutcome> strand;
    std::optional<BanOutcome> ban;
    std::string error;
    int exit_code = kExitClean;
};

/// Runs the configured engines. Never throws for bad input; the error is
/// reported with exit code 2.
RunReport run(const RunConfig& config);

/// `1.1) A -> I : {Na, A}{PK(I)}` per event; runs are numbered by session
/// id, and a bare step number is used when every event is in session 0.
std::string render_trace(const std::vector<Event>& trace, const std::string& intruder);

/// Inverse of `render_trace`. Throws SyntaxError.
std::vector<Event> parse_trace(std::string_view text, const ProtocolSpec& spec);

std::string render_text(const RunReport& report);
/// Pretty-printed JSON; `with_timing` false drops wall-clock figures.
std::string render_json(const RunReport& report, bool with_timing = true);

}  // namespace protocheck
