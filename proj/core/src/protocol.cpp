#include "protocheck/protocol.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "protocheck/intruder.hpp"

namespace protocheck {

namespace {

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

std::string trim(std::string_view s)
{
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_names(std::string_view s)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !out.empty())
        out.push_back(trim(cur));
    return out;
}

bool is_identifier(std::string_view s)
{
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
    });
}

enum class Section { None, FreeVariables, Protocol, Specification, Intruder, System };

struct Line {
    std::size_t number;
    std::string text;
};

struct Deferred {
    std::size_t line;
    std::size_t column;
    std::string text;
};

class ProtocolParser {
public:
    explicit ProtocolParser(std::string_view source) : source_(source) {}

    ProtocolSpec parse()
    {
        std::istringstream in{std::string(source_)};
        std::string raw;
        std::size_t number = 0;
        while (std::getline(in, raw)) {
            ++number;
            if (!raw.empty() && raw.back() == '\r')
                raw.pop_back();
            std::string t = trim(raw);
            if (t.empty() || t.starts_with("--"))
                continue;
            if (t.starts_with('#')) {
                header(t, number, raw);
                continue;
            }
            Line line{number, raw};
            switch (section_) {
            case Section::None:
                throw SyntaxError("text outside of any section", number, column_of(raw, 0));
            case Section::FreeVariables: free_variable(line); break;
            case Section::Protocol: step(line); break;
            case Section::Specification: goal(line); break;
            case Section::Intruder: intruder(line); break;
            case Section::System: system(line); break;
            }
        }
        if (!seen_protocol_)
            throw SyntaxError("no #Protocol description section", number == 0 ? 1 : number, 1);
        finish();
        return std::move(spec_);
    }

private:
    static std::size_t column_of(const std::string& raw, std::size_t offset)
    {
        std::size_t lead = 0;
        while (lead < raw.size() && std::isspace(static_cast<unsigned char>(raw[lead])))
            ++lead;
        return lead + offset + 1;
    }

    void header(const std::string& t, std::size_t number, const std::string& raw)
    {
        std::string name = trim(std::string_view(t).substr(1));
        std::string lower;
        for (char c : name)
            lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lower == "free variables")
            section_ = Section::FreeVariables;
        else if (lower == "protocol description") {
            section_ = Section::Protocol;
            seen_protocol_ = true;
        } else if (lower == "specification")
            section_ = Section::Specification;
        else if (lower == "intruder information")
            section_ = Section::Intruder;
        else if (lower == "system")
            section_ = Section::System;
        else
            throw SyntaxError("unknown section header '" + t + "'", number, column_of(raw, 0));
    }

    void free_variable(const Line& line)
    {
        auto colon = line.text.find(':');
        if (colon == std::string::npos)
            throw SyntaxError("expected 'names : Sort'", line.number, column_of(line.text, 0));
        auto names = split_names(std::string_view(line.text).substr(0, colon));
        std::string sort_text = trim(std::string_view(line.text).substr(colon + 1));
        auto sort = sort_from_string(sort_text);
        if (!sort)
            throw SyntaxError("unknown sort '" + sort_text + "'", line.number, colon + 2);
        for (const auto& n : names) {
            if (!is_identifier(n))
                throw SyntaxError("invalid variable name '" + n + "'", line.number,
                                  column_of(line.text, 0));
            if (spec_.sort_of(n))
                throw SyntaxError("variable '" + n + "' declared twice", line.number,
                                  column_of(line.text, 0));
            if (n == "PK" || n == "SK")
                throw SyntaxError("'" + n + "' is reserved", line.number, column_of(line.text, 0));
            spec_.free_variables.push_back({n, *sort});
        }
    }

    AtomResolver variable_resolver() const
    {
        return [this](std::string_view name) -> std::optional<Term> {
            if (auto s = spec_.sort_of(name))
                return Term::variable(std::string(name), *s);
            return std::nullopt;
        };
    }

    std::string role_name(const std::string& name, std::size_t line, std::size_t col) const
    {
        auto s = spec_.sort_of(name);
        if (!s)
            throw SyntaxError("undeclared variable '" + name + "'", line, col);
        if (*s != Sort::Agent)
            throw SyntaxError("'" + name + "' is not an Agent", line, col);
        return name;
    }

    Term pattern(const std::string& text, std::size_t line, std::size_t col) const
    {
        try {
            return parse_term(text, variable_resolver(), line, col);
        } catch (const SyntaxError& e) {
            const std::string& d = e.detail();
            if (d.starts_with("unknown identifier "))
                throw SyntaxError("undeclared variable " + d.substr(19), e.line(), e.column());
            throw;
        }
    }

    void step(const Line& line)
    {
        static const std::regex re(R"(^(\s*)(\d+)\s*\.\s*([A-Za-z_][A-Za-z0-9_']*)?\s*->\s*([A-Za-z_][A-Za-z0-9_']*)\s*:(.*)$)");
        std::smatch m;
        if (!std::regex_match(line.text, m, re))
            throw SyntaxError("expected 'n. A -> B : message'", line.number, column_of(line.text, 0));
        MessageStep st;
        st.index = std::stoi(m[2].str());
        auto col = [&](int g) { return static_cast<std::size_t>(m.position(g)) + 1; };
        if (m[3].matched)
            st.sender = role_name(m[3].str(), line.number, col(3));
        st.receiver = role_name(m[4].str(), line.number, col(4));
        std::string body = m[5].str();
        std::size_t lead = 0;
        while (lead < body.size() && std::isspace(static_cast<unsigned char>(body[lead])))
            ++lead;
        if (lead == body.size())
            throw SyntaxError("empty message", line.number, col(5));
        st.pattern = pattern(body.substr(lead), line.number, col(5) + lead);

        if (st.index == 0) {
            if (st.sender)
                throw SyntaxError("step 0 is environment input and has no sender", line.number, col(3));
            if (spec_.environment)
                throw SyntaxError("duplicate step number 0", line.number, col(2));
            for (const auto& a : atoms(st.pattern))
                if (a.kind() != TermKind::Variable || a.variable_sort() != Sort::Agent)
                    throw SyntaxError("environment input must be a list of agent variables",
                                      line.number, col(5));
            spec_.environment = std::move(st);
            return;
        }
        if (!st.sender)
            throw SyntaxError("missing sender", line.number, col(4));
        if (*st.sender == st.receiver)
            throw SyntaxError("sender and receiver are the same role", line.number, col(4));
        for (const auto& s : spec_.steps)
            if (s.index == st.index)
                throw SyntaxError("duplicate step number " + std::to_string(st.index), line.number,
                                  col(2));
        int expected = static_cast<int>(spec_.steps.size()) + 1;
        if (st.index != expected)
            throw SyntaxError("step " + std::to_string(st.index) + " out of sequence, expected " +
                                  std::to_string(expected),
                              line.number, col(2));
        spec_.steps.push_back(std::move(st));
    }

    void check_declared(const std::string& name, const Line& line, std::size_t col) const
    {
        if (!spec_.sort_of(name))
            throw SyntaxError("undeclared variable '" + name + "'", line.number, col);
    }

    void goal(const Line& line)
    {
        static const std::regex secret(R"(^\s*Secret\s*\(\s*(\w+)\s*,\s*(\w+)\s*,\s*\[([^\]]*)\]\s*\)\s*$)");
        static const std::regex agree(R"(^\s*Agreement\s*\(\s*(\w+)\s*,\s*(\w+)\s*,\s*\[([^\]]*)\]\s*\)\s*$)");
        std::smatch m;
        auto col = [&](int g) { return static_cast<std::size_t>(m.position(g)) + 1; };
        if (std::regex_match(line.text, m, secret)) {
            SecretGoal g{m[1].str(), m[2].str(), {}};
            check_declared(g.owner, line, col(1));
            check_declared(g.value, line, col(2));
            for (auto& p : split_names(m[3].str())) {
                if (p.empty())
                    continue;
                check_declared(p, line, col(3));
                g.peers.push_back(p);
            }
            spec_.goals.emplace_back(std::move(g));
            return;
        }
        if (std::regex_match(line.text, m, agree)) {
            AgreementGoal g{m[1].str(), m[2].str(), {}};
            check_declared(g.initiator, line, col(1));
            check_declared(g.responder, line, col(2));
            for (auto& d : split_names(m[3].str())) {
                if (d.empty())
                    continue;
                check_declared(d, line, col(3));
                g.data.push_back(d);
            }
            spec_.goals.emplace_back(std::move(g));
            return;
        }
        throw SyntaxError("expected Secret(...) or Agreement(...)", line.number,
                          column_of(line.text, 0));
    }

    void intruder(const Line& line)
    {
        auto eq = line.text.find('=');
        if (eq == std::string::npos)
            throw SyntaxError("expected 'Key = value'", line.number, column_of(line.text, 0));
        std::string key = trim(std::string_view(line.text).substr(0, eq));
        std::string value = trim(std::string_view(line.text).substr(eq + 1));
        std::size_t vcol = line.text.find_first_not_of(" \t", eq + 1) + 1;
        if (key == "Intruder") {
            if (!is_identifier(value))
                throw SyntaxError("invalid intruder name", line.number, vcol);
            spec_.intruder_id = value;
        } else if (key == "IntruderKnowledge") {
            if (value.size() < 2 || value.front() != '{' || value.back() != '}')
                throw SyntaxError("expected '{...}'", line.number, vcol);
            knowledge_ = Deferred{line.number, vcol + 1, value.substr(1, value.size() - 2)};
        } else {
            throw SyntaxError("unknown intruder field '" + key + "'", line.number,
                              column_of(line.text, 0));
        }
    }

    void system(const Line& line)
    {
        static const std::regex entry(R"(^\s*(\w+)\s*\(\s*(\w+)\s*\)\s*(?:x\s*(\d+))?\s*$)");
        static const std::regex agents(R"(^\s*Agents\s*=\s*(.*)$)");
        std::smatch m;
        if (std::regex_match(line.text, m, agents)) {
            for (auto& a : split_names(m[1].str())) {
                if (!is_identifier(a))
                    throw SyntaxError("invalid agent name '" + a + "'", line.number,
                                      static_cast<std::size_t>(m.position(1)) + 1);
                spec_.extra_agents.push_back(a);
            }
            return;
        }
        if (!std::regex_match(line.text, m, entry))
            throw SyntaxError("expected 'Role(agent) x count'", line.number, column_of(line.text, 0));
        SystemEntry e{m[1].str(), m[2].str(), m[3].matched ? std::stoi(m[3].str()) : 1};
        system_lines_.push_back({line.number, static_cast<std::size_t>(m.position(1)) + 1, e.role});
        spec_.system.push_back(std::move(e));
    }

    void finish()
    {
        auto roles = spec_.roles();
        for (const auto& d : system_lines_)
            if (std::find(roles.begin(), roles.end(), d.text) == roles.end())
                throw SyntaxError("'" + d.text + "' is not a role of the protocol", d.line, d.column);
        for (const auto& g : spec_.goals) {
            auto check_role = [&](const std::string& r) {
                if (std::find(roles.begin(), roles.end(), r) == roles.end())
                    throw SyntaxError("goal " + to_string(g) + " references unknown role '" + r + "'",
                                      1, 1);
            };
            std::visit(
                [&](const auto& goal) {
                    using G = std::decay_t<decltype(goal)>;
                    if constexpr (std::is_same_v<G, SecretGoal>) {
                        check_role(goal.owner);
                    } else {
                        check_role(goal.initiator);
                        check_role(goal.responder);
                    }
                },
                g);
        }
        if (spec_.environment) {
            const auto& r = spec_.environment->receiver;
            if (std::find(roles.begin(), roles.end(), r) == roles.end())
                throw SyntaxError("environment input to unknown role '" + r + "'", 1, 1);
        }
        if (knowledge_) {
            auto resolve = spec_.ground_atoms();
            std::string cur;
            int depth = 0;
            std::size_t start = 0;
            const std::string& text = knowledge_->text;
            auto flush = [&](std::size_t end) {
                std::string item = text.substr(start, end - start);
                std::size_t lead = item.find_first_not_of(" \t");
                if (lead == std::string::npos)
                    return;
                spec_.intruder_knowledge.push_back(
                    parse_term(trim(item), resolve, knowledge_->line, knowledge_->column + start + lead));
            };
            for (std::size_t i = 0; i < text.size(); ++i) {
                char c = text[i];
                if (c == '{' || c == '(')
                    ++depth;
                else if (c == '}' || c == ')')
                    --depth;
                else if (c == ',' && depth == 0) {
                    flush(i);
                    start = i + 1;
                }
            }
            flush(text.size());
        }
    }

    std::string_view source_;
    ProtocolSpec spec_;
    Section section_ = Section::None;
    bool seen_protocol_ = false;
    std::optional<Deferred> knowledge_;
    std::vector<Deferred> system_lines_;
};

}  // namespace

std::optional<Sort> ProtocolSpec::sort_of(std::string_view name) const
{
    for (const auto& v : free_variables)
        if (v.name == name)
            return v.sort;
    return std::nullopt;
}

Term ProtocolSpec::variable(std::string_view name) const
{
    auto s = sort_of(name);
    if (!s)
        throw std::invalid_argument("undeclared variable '" + std::string(name) + "'");
    return Term::variable(std::string(name), *s);
}

std::vector<std::string> ProtocolSpec::roles() const
{
    std::vector<std::string> out;
    auto add = [&](const std::string& r) {
        if (std::find(out.begin(), out.end(), r) == out.end())
            out.push_back(r);
    };
    for (const auto& s : steps) {
        add(*s.sender);
        add(s.receiver);
    }
    if (environment)
        add(environment->receiver);
    return out;
}

std::vector<std::string> ProtocolSpec::agents() const
{
    std::vector<std::string> out;
    auto add = [&](const std::string& a) {
        if (std::find(out.begin(), out.end(), a) == out.end())
            out.push_back(a);
    };
    for (const auto& e : system)
        if (e.agent != intruder_id)
            add(e.agent);
    for (const auto& a : extra_agents)
        if (a != intruder_id)
            add(a);
    add(intruder_id);
    return out;
}

AtomResolver ProtocolSpec::ground_atoms() const
{
    return ground_resolver(agents());
}

std::string to_string(const Goal& goal)
{
    return std::visit(
        [](const auto& g) -> std::string {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, SecretGoal>)
                return "Secret(" + g.owner + ", " + g.value + ", [" + join(g.peers, ", ") + "])";
            else
                return "Agreement(" + g.initiator + ", " + g.responder + ", [" + join(g.data, ", ") +
                       "])";
        },
        goal);
}

std::string to_string(const MessageStep& step)
{
    std::string out = std::to_string(step.index) + ". ";
    if (step.sender)
        out += *step.sender + " ";
    out += "-> " + step.receiver + " : " + to_string(step.pattern);
    return out;
}

ProtocolSpec parse_protocol(std::string_view source)
{
    return ProtocolParser(source).parse();
}

std::string print_protocol(const ProtocolSpec& spec)
{
    std::ostringstream out;
    out << "#Free variables\n";
    for (std::size_t i = 0; i < spec.free_variables.size();) {
        std::size_t j = i;
        std::vector<std::string> names;
        while (j < spec.free_variables.size() &&
               spec.free_variables[j].sort == spec.free_variables[i].sort)
            names.push_back(spec.free_variables[j++].name);
        out << join(names, ", ") << " : " << to_string(spec.free_variables[i].sort) << "\n";
        i = j;
    }
    out << "\n#Protocol description\n";
    if (spec.environment)
        out << to_string(*spec.environment) << "\n";
    for (const auto& s : spec.steps)
        out << to_string(s) << "\n";
    out << "\n#Specification\n";
    for (const auto& g : spec.goals)
        out << to_string(g) << "\n";
    out << "\n#Intruder Information\n";
    out << "Intruder = " << spec.intruder_id << "\n";
    if (!spec.intruder_knowledge.empty()) {
        std::vector<std::string> items;
        for (const auto& t : spec.intruder_knowledge) {
            std::string s = to_string(t);
            if (t.kind() == TermKind::Pair)
                s = "(" + s + ")";
            items.push_back(s);
        }
        out << "IntruderKnowledge = {" << join(items, ", ") << "}\n";
    }
    out << "\n#System\n";
    if (!spec.extra_agents.empty())
        out << "Agents = " << join(spec.extra_agents, ", ") << "\n";
    for (const auto& e : spec.system)
        out << e.role << "(" << e.agent << ") x " << e.sessions << "\n";
    return out.str();
}

ExecutabilityError::ExecutabilityError(int step, std::string role, const std::string& message)
    : std::runtime_error("step " + std::to_string(step) + ": " + message),
      step_(step),
      role_(std::move(role))
{
}

const RoleInfo& CheckedSpec::role(std::string_view name) const
{
    for (const auto& r : roles_)
        if (r.name == name)
            return r;
    throw std::invalid_argument("unknown role '" + std::string(name) + "'");
}

std::optional<std::string> CheckedSpec::fresh_owner(std::string_view variable) const
{
    if (auto it = fresh_owner_.find(variable); it != fresh_owner_.end())
        return it->second;
    return std::nullopt;
}

namespace {

bool is_freshable(Sort s) { return s == Sort::Nonce || s == Sort::SymmetricKey; }

void variables_in(const Term& t, std::vector<Term>& out)
{
    for (const auto& a : atoms(t)) {
        if (a.kind() == TermKind::Variable) {
            if (std::find(out.begin(), out.end(), a) == out.end())
                out.push_back(a);
        } else if (a.kind() == TermKind::PubKey || a.kind() == TermKind::PrivKey) {
            if (a.owner().kind() == TermKind::Variable &&
                std::find(out.begin(), out.end(), a.owner()) == out.end())
                out.push_back(a.owner());
        }
    }
}

}  // namespace

CheckedSpec check_executability(ProtocolSpec spec)
{
    CheckedSpec checked;

    std::set<std::string> seen;
    if (spec.environment) {
        std::vector<Term> vars;
        variables_in(spec.environment->pattern, vars);
        for (const auto& v : vars)
            seen.insert(v.name());
    }
    for (const auto& st : spec.steps) {
        std::vector<Term> vars;
        variables_in(st.pattern, vars);
        for (const auto& v : vars) {
            if (seen.insert(v.name()).second && is_freshable(v.variable_sort()))
                checked.fresh_owner_.emplace(v.name(), *st.sender);
        }
    }

    // Roles are replayed independently; the earliest offending step wins.
    std::optional<ExecutabilityError> first_error;
    for (const auto& role : spec.roles()) {
        RoleInfo info;
        info.name = role;
        KnowledgeSet known;
        std::set<std::string> agents_known;
        auto learn_agents = [&](const Term& t) {
            if (t.kind() == TermKind::Variable && t.variable_sort() == Sort::Agent)
                agents_known.insert(t.name());
        };
        Term self = spec.variable(role);
        known.insert(self);
        known.insert(Term::priv_key(self));
        info.initial.push_back(role);
        agents_known.insert(role);
        if (spec.environment && spec.environment->receiver == role) {
            known.insert(spec.environment->pattern);
            known = analz_close(std::move(known));
            for (const auto& t : known.terms())
                learn_agents(t);
            std::vector<Term> vars;
            variables_in(spec.environment->pattern, vars);
            for (const auto& v : vars)
                info.initial.push_back(v.name());
        }
        for (std::size_t i = 0; i < spec.steps.size(); ++i) {
            const auto& st = spec.steps[i];
            if (st.receiver == role) {
                info.steps.push_back(i);
                known.insert(st.pattern);
                known = analz_close(std::move(known));
                for (const auto& t : known.terms())
                    learn_agents(t);
            } else if (st.sender && *st.sender == role) {
                info.steps.push_back(i);
                std::vector<Term> vars;
                variables_in(st.pattern, vars);
                for (const auto& v : vars) {
                    auto owner = checked.fresh_owner(v.name());
                    if (owner && *owner == role && !known.contains(v)) {
                        known.insert(v);
                        info.fresh.push_back(v.name());
                    }
                }
                for (const auto& a : agents_known)
                    known.insert(Term::pub_key(spec.variable(a)));
                known = analz_close(std::move(known));
                if (!can_synthesize(known, st.pattern)) {
                    if (!first_error || st.index < first_error->step())
                        first_error.emplace(st.index, role,
                                            "role " + role + " cannot build " + to_string(st.pattern));
                    break;
                }
            }
        }
        checked.roles_.push_back(std::move(info));
    }
    if (first_error)
        throw *first_error;
    checked.spec_ = std::move(spec);
    return checked;
}

}  // namespace protocheck
