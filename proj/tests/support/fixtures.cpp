#include "fixtures.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "protocheck/term_syntax.hpp"

namespace testfix {

using namespace protocheck;

std::string fixture_path(const std::string& name) { return std::string(PROTOCHECK_FIXTURE_DIR) + "/" + name; }

std::string golden_path(const std::string& name) { return std::string(PROTOCHECK_GOLDEN_DIR) + "/" + name; }

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CheckedSpec load_spec(const std::string& name)
{
    return check_executability(parse_protocol(read_file(fixture_path(name))));
}

Bounds lowe_bounds()
{
    Bounds b;
    b.sessions = {{"A", 1}, {"B", 1}};
    b.max_depth = 12;
    return b;
}

std::vector<Event> lowe_trace()
{
    auto result = search(load_spec("nspk.proto.casper"), lowe_bounds());
    if (!std::holds_alternative<AttackReport>(result))
        throw std::runtime_error("no attack on the NSPK fixture");
    return std::get<AttackReport>(result).trace;
}

namespace {

Term rename(const Term& t, std::map<std::string, std::string>& names)
{
    switch (t.kind()) {
    case TermKind::Nonce: {
        auto [it, added] = names.try_emplace(t.name(), "N" + std::to_string(names.size() + 1));
        return Term::nonce(it->second);
    }
    case TermKind::Pair:
        return Term::pair(rename(t.left(), names), rename(t.right(), names));
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        return Term::encrypt(t.key(), rename(t.payload(), names));
    default:
        return t;
    }
}

}  // namespace

std::string canonical_trace(const std::vector<Event>& trace)
{
    std::map<std::string, std::string> names;
    std::map<int, int> sessions;
    std::ostringstream out;
    for (const auto& e : trace) {
        auto [it, added] = sessions.try_emplace(e.session, static_cast<int>(sessions.size()) + 1);
        out << (e.kind == EventKind::Send ? "send " : "deliver ") << it->second << '.' << e.step << ' '
            << e.actor << '(' << e.as << ") -> " << e.to << " : " << to_string(rename(e.message, names))
            << '\n';
    }
    return out.str();
}

std::string canonical_lowe()
{
    // A opens a run with I; I replays it to B as A; B's reply goes back
    // through A, who hands Nb to I; I completes B's run.
    return "send 1.1 A(A) -> I : {N1, A}{PK(I)}\n"
           "deliver 2.1 I(A) -> B : {N1, A}{PK(B)}\n"
           "send 2.2 B(B) -> A : {N1, N2}{PK(A)}\n"
           "deliver 1.2 I(I) -> A : {N1, N2}{PK(A)}\n"
           "send 1.3 A(A) -> I : {N2}{PK(I)}\n"
           "deliver 2.3 I(A) -> B : {N2}{PK(B)}\n";
}

}  // namespace testfix
