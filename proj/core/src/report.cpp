#include "protocheck/report.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "protocheck/strand.hpp"
#include "protocheck/term_syntax.hpp"

namespace protocheck {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::optional<Engine> engine_from_string(std::string_view s)
{
    if (s == "search") return Engine::Search;
    if (s == "ban") return Engine::Ban;
    if (s == "strand") return Engine::Strand;
    if (s == "all") return Engine::All;
    return std::nullopt;
}

std::optional<Format> format_from_string(std::string_view s)
{
    if (s == "text") return Format::Text;
    if (s == "json") return Format::Json;
    return std::nullopt;
}

std::map<std::string, int> parse_session_bounds(std::string_view text)
{
    static const std::regex item_re(R"(\s*([A-Za-z_]\w*)\s*=\s*(\d+)\s*)");
    std::map<std::string, int> out;
    std::string s(text);
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos)
            comma = s.size();
        std::string item = s.substr(pos, comma - pos);
        std::smatch m;
        if (!std::regex_match(item, m, item_re))
            throw std::invalid_argument("bad session bound '" + item + "', expected role=count");
        int n = std::stoi(m[2]);
        if (n <= 0)
            throw std::invalid_argument("session count for '" + m[1].str() + "' must be positive");
        out[m[1]] = n;
        pos = comma + 1;
    }
    return out;
}

std::string resolve_input(const std::string& name, const std::string& fixture_dir)
{
    if (fs::is_regular_file(name))
        return name;
    for (const char* ext : {"", ".proto.casper", ".ban"}) {
        fs::path p = fs::path(fixture_dir) / (name + ext);
        if (fs::is_regular_file(p))
            return p.string();
    }
    return name;
}

namespace {

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string join(const std::vector<std::string>& items, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i)
            out += sep;
        out += items[i];
    }
    return out;
}

std::string event_label(const Event& e, bool single_run)
{
    if (single_run)
        return std::to_string(e.step);
    return std::to_string(e.session + 1) + "." + std::to_string(e.step);
}

bool single_run(const std::vector<Event>& trace)
{
    return std::all_of(trace.begin(), trace.end(), [](const Event& e) { return e.session == 0; });
}

std::string event_sender(const Event& e, const std::string& intruder)
{
    if (e.kind == EventKind::Send || e.as == intruder)
        return e.actor;
    return e.actor + "(" + e.as + ")";
}

SearchOutcome run_search(const CheckedSpec& spec, const Bounds& bounds)
{
    SearchOutcome out;
    out.max_depth = bounds.max_depth;
    for (const auto& e : spec.spec().system) {
        auto it = bounds.sessions.find(e.role);
        out.sessions[e.role] += it != bounds.sessions.end() ? it->second : e.sessions;
    }
    try {
        auto result = search(spec, bounds);
        if (auto* a = std::get_if<AttackReport>(&result)) {
            out.verdict = SearchOutcome::Verdict::Attack;
            for (const auto& g : a->violated)
                out.violated.push_back(to_string(g));
            out.trace = a->trace;
            out.bindings = a->bindings;
            out.witness_session = a->witness_session;
            out.stats = a->stats;
            out.witness_role = instantiate(spec, bounds).sessions.at(a->witness_session).role;
        } else {
            out.verdict = SearchOutcome::Verdict::Exhausted;
            out.stats = std::get<Exhausted>(result).stats;
        }
    } catch (const BudgetExceeded& e) {
        out.verdict = SearchOutcome::Verdict::BudgetExceeded;
        out.stats.states_explored = e.states();
    }
    return out;
}

StrandOutcome run_strand(const CheckedSpec& spec, const SearchOutcome& search)
{
    StrandOutcome out;
    const bool attack = search.verdict == SearchOutcome::Verdict::Attack;
    out.source = attack ? "attack" : "honest run";
    Bundle b = lift(attack ? search.trace : honest_run(spec), spec);
    out.strands = b.strands.size();
    out.edges = b.comm.size();
    out.violations = check_wellformed(b);

    std::optional<std::size_t> resp;
    for (std::size_t s = 0; s < b.strands.size(); ++s) {
        const Strand& st = b.strands[s];
        if (!st.regular() || st.role != b.responder_role || !st.complete)
            continue;
        if (!resp || (attack && st.session == search.witness_session))
            resp = s;
    }
    if (!resp) {
        out.verdict = StrandOutcome::Verdict::NoResponder;
        out.note = "no completed responder strand";
        return out;
    }
    out.responder = b.strands[*resp].name();
    try {
        auto r = responder_guarantee(b, *resp);
        if (auto* h = std::get_if<Holds>(&r)) {
            out.verdict = StrandOutcome::Verdict::Holds;
            out.initiator = b.strands[h->initiator].name();
        } else {
            out.verdict = StrandOutcome::Verdict::Fails;
            for (auto w : std::get<Fails>(r).witnesses)
                out.witnesses.push_back(b.strands[w].name());
        }
    } catch (const HypothesesNotMet& e) {
        out.verdict = StrandOutcome::Verdict::HypothesesNotMet;
        out.note = e.what();
    }
    return out;
}

BanOutcome run_ban(const std::string& path)
{
    std::string source;
    try {
        source = read_file(path);
    } catch (const std::exception& e) {
        throw InputError(e.what());
    }
    ban::IdealizedProtocol protocol;
    try {
        protocol = ban::parse_idealized(source);
    } catch (const SyntaxError& e) {
        throw InputError(path + ":" + e.what());
    }
    BanOutcome out;
    auto derived = ban::saturate(protocol);
    out.derived = derived.size();
    out.goals = ban::audit_goals(protocol, derived);
    for (const auto& a : protocol.assumptions)
        if (a.unjustified)
            out.unjustified[a.label].push_back(a.formula.text());
    return out;
}

}  // namespace

RunReport run(const RunConfig& config)
{
    RunReport report;
    report.protocol = config.protocol;
    const bool want_search = config.engine != Engine::Ban;
    const bool want_strand = config.engine == Engine::Strand || config.engine == Engine::All;
    const bool want_ban = config.engine == Engine::Ban ||
                          (config.engine == Engine::All && config.idealization.has_value());
    try {
        if (config.engine == Engine::Ban && !config.idealization)
            throw InputError("the ban engine needs --idealization");
        if (config.bounds.max_depth == 0 && want_search)
            throw InputError("--max-depth must be positive");
        if (config.bounds.state_budget == 0)
            throw InputError("--state-budget must be positive");

        std::optional<CheckedSpec> spec;
        {
            std::string source;
            try {
                source = read_file(config.protocol);
            } catch (const std::exception& e) {
                throw InputError(e.what());
            }
            try {
                spec = check_executability(parse_protocol(source));
            } catch (const SyntaxError& e) {
                throw InputError(config.protocol + ":" + e.what());
            } catch (const ExecutabilityError& e) {
                throw InputError(config.protocol + ": " + e.what());
            }
            report.intruder = spec->spec().intruder_id;
        }

        if (want_search) {
            try {
                report.search = run_search(*spec, config.bounds);
            } catch (const BoundsError& e) {
                throw InputError(e.what());
            }
        }
        if (want_strand) {
            if (report.search->verdict == SearchOutcome::Verdict::BudgetExceeded) {
                StrandOutcome s;
                s.note = "skipped: search budget exceeded";
                report.strand = s;
            } else {
                try {
                    report.strand = run_strand(*spec, *report.search);
                } catch (const std::runtime_error& e) {
                    StrandOutcome s;
                    s.note = e.what();
                    report.strand = s;
                }
            }
        }
        if (want_ban)
            report.ban = run_ban(*config.idealization);
    } catch (const InputError& e) {
        report.error = e.what();
        report.exit_code = kExitInputError;
        return report;
    }

    bool violation = false;
    bool budget = false;
    if (report.search) {
        violation |= report.search->verdict == SearchOutcome::Verdict::Attack;
        budget |= report.search->verdict == SearchOutcome::Verdict::BudgetExceeded;
    }
    if (report.strand)
        violation |= report.strand->verdict == StrandOutcome::Verdict::Fails ||
                     !report.strand->violations.empty();
    if (report.ban)
        for (const auto& g : report.ban->goals)
            violation |= g.flagged || !g.derivable;
    report.exit_code = violation ? kExitViolation : budget ? kExitBudget : kExitClean;
    return report;
}

std::string render_trace(const std::vector<Event>& trace, const std::string& intruder)
{
    const bool single = single_run(trace);
    std::string out;
    for (const auto& e : trace)
        out += event_label(e, single) + ") " + event_sender(e, intruder) + " -> " + e.to + " : " +
               to_string(e.message) + "\n";
    return out;
}

std::vector<Event> parse_trace(std::string_view text, const ProtocolSpec& spec)
{
    static const std::regex line_re(
        R"(^\s*(\d+)(?:\.(\d+))?\)\s+(\w+)(?:\((\w+)\))?\s+->\s+(\w+)\s+:\s+(.+?)\s*$)");
    const auto resolve = spec.ground_atoms();
    std::vector<Event> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::smatch m;
        if (!std::regex_match(line, m, line_re))
            throw SyntaxError("malformed trace line", line_no, 1);
        Event e;
        if (m[2].matched) {
            e.session = std::stoi(m[1]) - 1;
            e.step = std::stoi(m[2]);
        } else {
            e.session = 0;
            e.step = std::stoi(m[1]);
        }
        e.actor = m[3];
        if (m[4].matched) {
            e.kind = EventKind::Deliver;
            e.as = m[4];
        } else {
            e.kind = e.actor == spec.intruder_id ? EventKind::Deliver : EventKind::Send;
            e.as = e.actor;
        }
        e.to = m[5];
        e.message = parse_term(m[6].str(), resolve, line_no, static_cast<std::size_t>(m.position(6)) + 1);
        e.time = out.size();
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

std::string duration_text(std::chrono::microseconds us)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(1) << static_cast<double>(us.count()) / 1000.0 << " ms";
    return ss.str();
}

std::string bounds_text(const SearchOutcome& s)
{
    std::vector<std::string> parts;
    for (const auto& [role, n] : s.sessions)
        parts.push_back(role + "=" + std::to_string(n));
    return "sessions " + join(parts, ", ") + "; depth " + std::to_string(s.max_depth);
}

std::string strand_verdict_name(StrandOutcome::Verdict v)
{
    switch (v) {
    case StrandOutcome::Verdict::Holds: return "holds";
    case StrandOutcome::Verdict::Fails: return "fails";
    case StrandOutcome::Verdict::HypothesesNotMet: return "hypotheses_not_met";
    case StrandOutcome::Verdict::NoResponder: return "no_responder";
    }
    return "?";
}

std::string search_verdict_name(SearchOutcome::Verdict v)
{
    switch (v) {
    case SearchOutcome::Verdict::Attack: return "attack";
    case SearchOutcome::Verdict::Exhausted: return "exhausted";
    case SearchOutcome::Verdict::BudgetExceeded: return "budget_exceeded";
    }
    return "?";
}

}  // namespace

std::string render_text(const RunReport& r)
{
    std::ostringstream out;
    out << "protocol: " << r.protocol << "\n";
    if (!r.error.empty()) {
        out << "error: " << r.error << "\n";
        return out.str();
    }
    if (r.search) {
        const auto& s = *r.search;
        switch (s.verdict) {
        case SearchOutcome::Verdict::Attack:
            out << "search: attack found, " << s.trace.size() << " events\n";
            for (const auto& g : s.violated)
                out << "  violates " << g << "\n";
            {
                std::istringstream lines(render_trace(s.trace, r.intruder));
                std::string line;
                while (std::getline(lines, line))
                    out << "  " << line << "\n";
            }
            {
                std::vector<std::string> b;
                for (const auto& [var, val] : s.bindings)
                    b.push_back(var + " = " + to_string(val));
                out << "  witness: run " << s.witness_session + 1 << " (" << s.witness_role
                    << ") with " << join(b, ", ") << "\n";
            }
            break;
        case SearchOutcome::Verdict::Exhausted:
            out << "search: Exhausted: no attack within bounds (" << bounds_text(s) << ")\n";
            break;
        case SearchOutcome::Verdict::BudgetExceeded:
            out << "search: inconclusive, state budget exceeded after " << s.stats.states_explored
                << " states\n";
            break;
        }
        if (s.verdict != SearchOutcome::Verdict::BudgetExceeded)
            out << "  states explored: " << s.stats.states_explored << ", peak frontier: "
                << s.stats.peak_frontier << ", depth reached: " << s.stats.depth_reached
                << ", time: " << duration_text(s.stats.duration) << "\n";
    }
    if (r.strand) {
        const auto& s = *r.strand;
        if (s.source.empty()) {
            out << "strand: " << s.note << "\n";
        } else {
            out << "strand: bundle lifted from the " << s.source << ", " << s.strands << " strands, "
                << s.edges << " edges, "
                << (s.violations.empty() ? "well-formed" : "NOT well-formed") << "\n";
            for (const auto& v : s.violations)
                out << "  violation: " << v << "\n";
            switch (s.verdict) {
            case StrandOutcome::Verdict::Holds:
                out << "  responder guarantee holds for " << s.responder << ": " << s.initiator << "\n";
                break;
            case StrandOutcome::Verdict::Fails:
                out << "  responder guarantee fails for " << s.responder << "; initiator strands: "
                    << (s.witnesses.empty() ? std::string("none") : join(s.witnesses, ", ")) << "\n";
                break;
            case StrandOutcome::Verdict::HypothesesNotMet:
            case StrandOutcome::Verdict::NoResponder:
                out << "  " << s.note << "\n";
                break;
            }
        }
    }
    if (r.ban) {
        out << "ban: " << r.ban->derived << " formulas derived\n";
        for (const auto& g : r.ban->goals) {
            out << "  goal " << g.name << ": ";
            if (!g.derivable) {
                out << "not derivable\n";
                continue;
            }
            out << "derivable from assumptions " << join(g.assumptions, ", ");
            if (g.flagged) {
                std::vector<std::string> cited;
                for (const auto& label : g.unjustified) {
                    auto it = r.ban->unjustified.find(label);
                    std::string text = it == r.ban->unjustified.end() ? "" : join(it->second, "; ");
                    cited.push_back(label + " (" + text + ")");
                }
                out << "; FLAGGED, depends on unjustified assumption " << join(cited, ", ");
            }
            out << "\n";
        }
    }
    out << "exit code: " << r.exit_code << "\n";
    return out.str();
}

std::string render_json(const RunReport& r, bool with_timing)
{
    json j;
    j["protocol"] = r.protocol;
    j["exit_code"] = r.exit_code;
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    if (r.search) {
        const auto& s = *r.search;
        json sj;
        sj["verdict"] = search_verdict_name(s.verdict);
        json steps = json::array();
        const bool single = single_run(s.trace);
        for (std::size_t i = 0; i < s.trace.size(); ++i) {
            const Event& e = s.trace[i];
            steps.push_back({{"index", i + 1},
                             {"label", event_label(e, single)},
                             {"kind", e.kind == EventKind::Send ? "send" : "deliver"},
                             {"actor", e.actor},
                             {"as", e.as},
                             {"to", e.to},
                             {"message", to_string(e.message)}});
        }
        sj["steps"] = std::move(steps);
        sj["goal"] = s.violated.empty() ? json(nullptr) : json(s.violated.front());
        sj["violated"] = s.violated;
        json bindings = json::object();
        for (const auto& [var, val] : s.bindings)
            bindings[var] = to_string(val);
        sj["bindings"] = std::move(bindings);
        json bounds = json::object();
        for (const auto& [role, n] : s.sessions)
            bounds[role] = n;
        sj["bounds"] = {{"sessions", bounds}, {"max_depth", s.max_depth}};
        json stats = {{"states_explored", s.stats.states_explored},
                      {"peak_frontier", s.stats.peak_frontier},
                      {"depth_reached", s.stats.depth_reached}};
        if (with_timing)
            stats["duration_ms"] = static_cast<double>(s.stats.duration.count()) / 1000.0;
        sj["stats"] = std::move(stats);
        j["search"] = std::move(sj);
    }
    if (r.strand) {
        const auto& s = *r.strand;
        j["strand"] = {{"verdict", s.source.empty() ? std::string("skipped") : strand_verdict_name(s.verdict)},
                       {"source", s.source},
                       {"strands", s.strands},
                       {"edges", s.edges},
                       {"wellformed", s.violations.empty()},
                       {"violations", s.violations},
                       {"responder", s.responder},
                       {"initiator", s.initiator.empty() ? json(nullptr) : json(s.initiator)},
                       {"witnesses", s.witnesses},
                       {"note", s.note}};
    }
    if (r.ban) {
        json goals = json::array();
        for (const auto& g : r.ban->goals) {
            std::vector<std::string> formulas;
            for (const auto& f : g.formulas)
                formulas.push_back(f.text());
            goals.push_back({{"name", g.name},
                             {"formulas", formulas},
                             {"derivable", g.derivable},
                             {"assumptions", g.assumptions},
                             {"flagged", g.flagged},
                             {"unjustified", g.unjustified}});
        }
        j["ban"] = {{"derived", r.ban->derived}, {"goals", std::move(goals)}};
    }
    return j.dump(2) + "\n";
}

}  // namespace protocheck
