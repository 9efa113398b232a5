#include "protocheck/model_checker.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <thread>
#include <tuple>
#include <unordered_set>

#include "protocheck/term_syntax.hpp"

namespace protocheck {

BudgetExceeded::BudgetExceeded(std::size_t states, std::size_t budget)
    : std::runtime_error("state budget of " + std::to_string(budget) + " exceeded after " +
                         std::to_string(states) + " states"),
      states_(states)
{
}

namespace {

bool is_role(const ProtocolSpec& spec, const std::string& name)
{
    auto roles = spec.roles();
    return std::find(roles.begin(), roles.end(), name) != roles.end();
}

std::vector<Term> pattern_variables(const Term& t)
{
    std::vector<Term> out;
    for (const auto& a : atoms(t)) {
        const Term* v = nullptr;
        if (a.kind() == TermKind::Variable)
            v = &a;
        else if ((a.kind() == TermKind::PubKey || a.kind() == TermKind::PrivKey) &&
                 a.owner().kind() == TermKind::Variable)
            v = &a.owner();
        if (v && std::find(out.begin(), out.end(), *v) == out.end())
            out.push_back(*v);
    }
    return out;
}

std::vector<Term> environment_variables(const ProtocolSpec& spec, const std::string& role)
{
    if (!spec.environment || spec.environment->receiver != role)
        return {};
    return pattern_variables(spec.environment->pattern);
}

Term apply_bindings(const Term& pattern, const Bindings& b)
{
    return normalize(substitute(pattern, [&](const Term& v) -> std::optional<Term> {
        if (auto it = b.find(v.name()); it != b.end())
            return it->second;
        return std::nullopt;
    }));
}

std::string capitalized(const std::string& s)
{
    std::string out = s;
    if (!out.empty())
        out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

Term fresh_value(const GlobalState& state, const SessionInstance& s, const Term& var)
{
    int same_role = 0;
    for (const auto& o : state.sessions)
        same_role += o.role == s.role;
    std::string name = capitalized(var.name());
    if (same_role > 1)
        name += std::to_string(s.ordinal);
    if (var.variable_sort() == Sort::SymmetricKey)
        return Term::sym_key(name);
    return Term::nonce(name);
}

bool unstarted(const SessionInstance& s) { return s.pc == 0 && s.bindings.size() <= 1; }

/// Assignments of `vars` drawn from per-sort candidate lists, in lexicographic order.
void for_each_assignment(const std::vector<Term>& vars,
                         const std::function<std::vector<Term>(const Term&)>& candidates,
                         Bindings& current, const std::function<void(const Bindings&)>& visit,
                         std::size_t i = 0)
{
    if (i == vars.size()) {
        visit(current);
        return;
    }
    for (const auto& c : candidates(vars[i])) {
        current.insert_or_assign(vars[i].name(), c);
        for_each_assignment(vars, candidates, current, visit, i + 1);
    }
    current.erase(vars[i].name());
}

struct Candidates {
    std::vector<Term> agents;
    std::vector<Term> nonces;
    std::vector<Term> sym_keys;
    std::vector<Term> pub_keys;
};

Candidates candidates_from(const ProtocolSpec& spec, const KnowledgeSet& k)
{
    Candidates c;
    for (const auto& a : spec.agents()) {
        c.agents.push_back(Term::agent(a));
        c.pub_keys.push_back(Term::pub_key(Term::agent(a)));
    }
    for (const auto& t : knowledge_parts(k)) {
        switch (t.kind()) {
        case TermKind::Nonce: c.nonces.push_back(t); break;
        case TermKind::SymKey: c.sym_keys.push_back(t); break;
        case TermKind::PubKey:
        case TermKind::PrivKey:
            if (std::find(c.pub_keys.begin(), c.pub_keys.end(), t) == c.pub_keys.end())
                c.pub_keys.push_back(t);
            break;
        default: break;
        }
    }
    return c;
}

auto event_order(const Event& e)
{
    return std::make_tuple(e.session, e.kind, e.step, e.to, e.as, to_string(e.message));
}

}  // namespace

GlobalState instantiate(const CheckedSpec& checked, const Bounds& bounds)
{
    const auto& spec = checked.spec();
    if (bounds.max_depth > kMaxDepth)
        throw BoundsError("max depth " + std::to_string(bounds.max_depth) + " exceeds limit " +
                          std::to_string(kMaxDepth));
    auto agents = spec.agents();
    if (agents.size() <= 1)
        throw BoundsError("no honest agents declared");
    for (const auto& [role, n] : bounds.sessions) {
        if (!is_role(spec, role))
            throw BoundsError("unknown role '" + role + "' in session bounds");
        if (n < 0)
            throw BoundsError("negative session count for role '" + role + "'");
        bool has_entry = std::any_of(spec.system.begin(), spec.system.end(),
                                     [&](const SystemEntry& e) { return e.role == role; });
        if (!has_entry && n > 0)
            throw BoundsError("role '" + role + "' has no #System entry naming its agent");
    }

    GlobalState state;
    int total = 0;
    std::map<std::string, int> ordinals;
    for (const auto& entry : spec.system) {
        int count = entry.sessions;
        if (auto it = bounds.sessions.find(entry.role); it != bounds.sessions.end())
            count = it->second;
        for (int i = 0; i < count; ++i) {
            if (++total > kMaxSessions)
                throw BoundsError("more than " + std::to_string(kMaxSessions) + " sessions");
            SessionInstance s;
            s.id = static_cast<int>(state.sessions.size());
            s.role = entry.role;
            s.self = entry.agent;
            s.ordinal = ++ordinals[entry.role];
            s.bindings.emplace(entry.role, Term::agent(entry.agent));
            s.completed = checked.role(entry.role).steps.empty();
            state.sessions.push_back(std::move(s));
        }
    }

    state.intruder = initial_intruder_knowledge(spec);
    return state;
}

KnowledgeSet initial_intruder_knowledge(const ProtocolSpec& spec)
{
    KnowledgeSet k;
    for (const auto& a : spec.agents()) {
        k.insert(Term::agent(a));
        k.insert(Term::pub_key(Term::agent(a)));
    }
    k.insert(Term::priv_key(Term::agent(spec.intruder_id)));
    for (const auto& t : spec.intruder_knowledge)
        k.insert(t);
    return analz_close(std::move(k));
}

bool match_pattern(const Term& pattern, const Term& term, Bindings& bindings)
{
    if (pattern.is_ground())
        return pattern == term;
    switch (pattern.kind()) {
    case TermKind::Variable: {
        auto [it, inserted] = bindings.emplace(pattern.name(), term);
        return inserted || it->second == term;
    }
    case TermKind::PubKey:
    case TermKind::PrivKey:
        return term.kind() == pattern.kind() && match_pattern(pattern.owner(), term.owner(), bindings);
    case TermKind::Pair:
        return term.kind() == TermKind::Pair && match_pattern(pattern.left(), term.left(), bindings) &&
               match_pattern(pattern.right(), term.right(), bindings);
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        return term.kind() == pattern.kind() && match_pattern(pattern.key(), term.key(), bindings) &&
               match_pattern(pattern.payload(), term.payload(), bindings);
    default:
        return false;
    }
}

std::vector<GlobalState> successors(const CheckedSpec& checked, const GlobalState& state)
{
    const auto& spec = checked.spec();
    const auto roles = spec.roles();
    std::vector<GlobalState> out;
    std::optional<Candidates> cands;

    for (const auto& s : state.sessions) {
        if (s.completed)
            continue;
        if (unstarted(s)) {
            bool shadowed = std::any_of(state.sessions.begin(), state.sessions.begin() + s.id,
                                        [&](const SessionInstance& o) {
                                            return o.role == s.role && o.self == s.self && unstarted(o);
                                        });
            if (shadowed)
                continue;
        }
        const RoleInfo& role = checked.role(s.role);
        const MessageStep& step = spec.steps[role.steps[s.pc]];
        const bool sending = step.sender && *step.sender == s.role;

        if (!cands)
            cands = candidates_from(spec, state.intruder);
        const Term self = Term::agent(s.self);
        auto candidates = [&](const Term& var) -> std::vector<Term> {
            switch (var.variable_sort()) {
            case Sort::Agent: {
                bool role_var = std::find(roles.begin(), roles.end(), var.name()) != roles.end();
                std::vector<Term> out_agents;
                for (const auto& a : cands->agents)
                    if (!(role_var && a == self))
                        out_agents.push_back(a);
                return out_agents;
            }
            case Sort::Nonce: return cands->nonces;
            case Sort::SymmetricKey: return cands->sym_keys;
            case Sort::PublicKey: return cands->pub_keys;
            }
            return {};
        };

        std::vector<Term> env_unbound;
        for (const auto& v : environment_variables(spec, s.role))
            if (!s.bindings.contains(v.name()))
                env_unbound.push_back(v);

        Bindings work = s.bindings;
        if (sending) {
            for_each_assignment(env_unbound, candidates, work, [&](const Bindings& b) {
                GlobalState next = state;
                SessionInstance& ns = next.sessions[s.id];
                ns.bindings = b;
                for (const auto& v : pattern_variables(step.pattern)) {
                    if (ns.bindings.contains(v.name()))
                        continue;
                    auto owner = checked.fresh_owner(v.name());
                    if (!owner || *owner != s.role)
                        throw std::logic_error("unbound variable '" + v.name() + "' at send");
                    ns.bindings.emplace(v.name(), fresh_value(next, ns, v));
                    ++next.nonce_counter;
                }
                Term msg = apply_bindings(step.pattern, ns.bindings);
                Event e;
                e.kind = EventKind::Send;
                e.actor = s.self;
                e.as = s.self;
                e.to = ns.bindings.at(step.receiver).name();
                e.message = msg;
                e.time = state.trace.size();
                e.session = s.id;
                e.step = step.index;
                next.intruder = observe(std::move(next.intruder), msg);
                ++ns.pc;
                ns.completed = ns.pc == role.steps.size();
                next.trace.push_back(std::move(e));
                out.push_back(std::move(next));
            });
        } else {
            std::vector<Term> vars = env_unbound;
            for (const auto& v : pattern_variables(step.pattern))
                if (!s.bindings.contains(v.name()) &&
                    std::find(vars.begin(), vars.end(), v) == vars.end())
                    vars.push_back(v);
            for_each_assignment(vars, candidates, work, [&](const Bindings& b) {
                Term msg = apply_bindings(step.pattern, b);
                if (!msg.is_ground() || !can_synthesize(state.intruder, msg))
                    return;
                GlobalState next = state;
                SessionInstance& ns = next.sessions[s.id];
                ns.bindings = b;
                Event e;
                e.kind = EventKind::Deliver;
                e.actor = spec.intruder_id;
                e.as = b.at(*step.sender).name();
                e.to = s.self;
                e.message = msg;
                e.time = state.trace.size();
                e.session = s.id;
                e.step = step.index;
                ++ns.pc;
                ns.completed = ns.pc == role.steps.size();
                next.trace.push_back(std::move(e));
                out.push_back(std::move(next));
            });
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const GlobalState& a, const GlobalState& b) {
        return event_order(a.trace.back()) < event_order(b.trace.back());
    });
    return out;
}

std::optional<SessionInstance> goal_witness(const CheckedSpec& checked, const GlobalState& state,
                                            const Goal& goal)
{
    const auto& spec = checked.spec();
    auto honest = [&](const Bindings& b, const std::string& var) {
        auto it = b.find(var);
        return it != b.end() && it->second.kind() == TermKind::Agent &&
               it->second.name() != spec.intruder_id;
    };
    return std::visit(
        [&](const auto& g) -> std::optional<SessionInstance> {
            using G = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<G, SecretGoal>) {
                if (!is_role(spec, g.owner))
                    throw std::invalid_argument("goal references unknown role '" + g.owner + "'");
                for (const auto& s : state.sessions) {
                    if (s.role != g.owner || !s.completed)
                        continue;
                    if (!std::all_of(g.peers.begin(), g.peers.end(),
                                     [&](const std::string& p) { return honest(s.bindings, p); }))
                        continue;
                    auto v = s.bindings.find(g.value);
                    if (v != s.bindings.end() && state.intruder.contains(v->second))
                        return s;
                }
                return std::nullopt;
            } else {
                if (!is_role(spec, g.initiator))
                    throw std::invalid_argument("goal references unknown role '" + g.initiator + "'");
                if (!is_role(spec, g.responder))
                    throw std::invalid_argument("goal references unknown role '" + g.responder + "'");
                for (const auto& s2 : state.sessions) {
                    if (s2.role != g.responder || !s2.completed || !honest(s2.bindings, g.initiator))
                        continue;
                    const std::string& partner = s2.bindings.at(g.initiator).name();
                    bool matched = std::any_of(
                        state.sessions.begin(), state.sessions.end(), [&](const SessionInstance& s1) {
                            if (s1.role != g.initiator || s1.self != partner)
                                return false;
                            auto peer = s1.bindings.find(g.responder);
                            if (peer == s1.bindings.end() || peer->second != Term::agent(s2.self))
                                return false;
                            return std::all_of(g.data.begin(), g.data.end(), [&](const std::string& d) {
                                auto a = s1.bindings.find(d);
                                auto b = s2.bindings.find(d);
                                return a != s1.bindings.end() && b != s2.bindings.end() &&
                                       a->second == b->second;
                            });
                        });
                    if (!matched)
                        return s2;
                }
                return std::nullopt;
            }
        },
        goal);
}

bool check_goal(const CheckedSpec& spec, const GlobalState& state, const Goal& goal)
{
    return goal_witness(spec, state, goal).has_value();
}

std::string state_key(const GlobalState& state)
{
    std::string key;
    for (const auto& s : state.sessions) {
        key += std::to_string(s.id);
        key += '@';
        key += std::to_string(s.pc);
        for (const auto& [var, val] : s.bindings) {
            key += ';';
            key += var;
            key += '=';
            key += to_string(val);
        }
        key += '|';
    }
    key += '#';
    for (const auto& t : state.intruder.terms()) {
        key += to_string(t);
        key += '\n';
    }
    return key;
}

namespace {

struct Expanded {
    GlobalState state;
    std::string key;
    std::vector<std::size_t> violated;
};

std::vector<Expanded> expand(const CheckedSpec& spec, const GlobalState& state,
                             const std::vector<Goal>& goals)
{
    std::vector<Expanded> out;
    for (auto& next : successors(spec, state)) {
        Expanded e{std::move(next), {}, {}};
        e.key = state_key(e.state);
        for (std::size_t g = 0; g < goals.size(); ++g)
            if (check_goal(spec, e.state, goals[g]))
                e.violated.push_back(g);
        out.push_back(std::move(e));
    }
    return out;
}

AttackReport make_report(const CheckedSpec& spec, const GlobalState& state,
                         const std::vector<Goal>& goals, const std::vector<std::size_t>& violated)
{
    AttackReport r;
    for (auto g : violated)
        r.violated.push_back(goals[g]);
    r.trace = state.trace;
    auto w = goal_witness(spec, state, goals[violated.front()]);
    r.bindings = w->bindings;
    r.witness_session = w->id;
    return r;
}

}  // namespace

SearchResult search(const CheckedSpec& spec, const Bounds& bounds, const std::vector<Goal>& goals)
{
    const auto start = std::chrono::steady_clock::now();
    SearchStats stats;
    auto finish = [&]() {
        stats.duration =
            std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
    };

    GlobalState init = instantiate(spec, bounds);
    std::unordered_set<std::string> visited;
    visited.insert(state_key(init));
    stats.states_explored = 1;
    stats.peak_frontier = 1;
    {
        std::vector<std::size_t> violated;
        for (std::size_t g = 0; g < goals.size(); ++g)
            if (check_goal(spec, init, goals[g]))
                violated.push_back(g);
        if (!violated.empty()) {
            finish();
            auto r = make_report(spec, init, goals, violated);
            r.stats = stats;
            return r;
        }
    }

    std::vector<GlobalState> frontier{std::move(init)};
    const unsigned workers = std::max(1u, bounds.workers);
    for (std::size_t depth = 0; depth < bounds.max_depth && !frontier.empty(); ++depth) {
        std::vector<std::vector<Expanded>> expanded(frontier.size());
        if (workers == 1 || frontier.size() == 1) {
            for (std::size_t i = 0; i < frontier.size(); ++i)
                expanded[i] = expand(spec, frontier[i], goals);
        } else {
            std::vector<std::thread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    for (std::size_t i = w; i < frontier.size(); i += workers)
                        expanded[i] = expand(spec, frontier[i], goals);
                });
            }
            for (auto& t : pool)
                t.join();
        }

        stats.depth_reached = depth + 1;
        std::vector<GlobalState> next;
        for (auto& group : expanded) {
            for (auto& e : group) {
                if (!visited.insert(e.key).second)
                    continue;
                if (++stats.states_explored > bounds.state_budget)
                    throw BudgetExceeded(stats.states_explored, bounds.state_budget);
                if (!e.violated.empty()) {
                    finish();
                    auto r = make_report(spec, e.state, goals, e.violated);
                    r.stats = stats;
                    return r;
                }
                next.push_back(std::move(e.state));
            }
        }
        stats.peak_frontier = std::max(stats.peak_frontier, next.size());
        frontier = std::move(next);
    }
    finish();
    return Exhausted{stats};
}

SearchResult search(const CheckedSpec& spec, const Bounds& bounds)
{
    return search(spec, bounds, spec.spec().goals);
}

GlobalState replay(const CheckedSpec& spec, const Bounds& bounds, const std::vector<Event>& trace)
{
    GlobalState state = instantiate(spec, bounds);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        bool found = false;
        for (auto& next : successors(spec, state)) {
            if (next.trace.back() == trace[i]) {
                state = std::move(next);
                found = true;
                break;
            }
        }
        if (!found)
            throw std::runtime_error("event " + std::to_string(i + 1) + " (" +
                                     to_string(trace[i].message) + ") is not enabled");
    }
    return state;
}

std::vector<Event> honest_run(const CheckedSpec& checked)
{
    const auto& spec = checked.spec();
    Bounds bounds;
    // First #System entry of each role gets one session.
    std::map<std::string, std::string> agent_of;
    ProtocolSpec narrowed = spec;
    narrowed.system.clear();
    for (const auto& e : spec.system) {
        if (agent_of.emplace(e.role, e.agent).second)
            narrowed.system.push_back({e.role, e.agent, 1});
    }
    CheckedSpec one = check_executability(std::move(narrowed));
    GlobalState state = instantiate(one, bounds);

    auto session_of = [&](const std::string& role) -> const SessionInstance& {
        for (const auto& s : state.sessions)
            if (s.role == role)
                return s;
        throw std::runtime_error("no #System entry for role '" + role + "'");
    };

    for (const auto& step : spec.steps) {
        const int sender = session_of(*step.sender).id;
        const int receiver = session_of(step.receiver).id;
        const std::string receiver_agent = agent_of.at(step.receiver);
        auto agrees = [&](const SessionInstance& s) {
            for (const auto& [var, val] : s.bindings) {
                auto it = agent_of.find(var);
                if (it != agent_of.end() && val != Term::agent(it->second))
                    return false;
            }
            return true;
        };
        bool sent = false;
        for (auto& next : successors(one, state)) {
            const Event& e = next.trace.back();
            if (e.kind == EventKind::Send && e.session == sender && e.to == receiver_agent &&
                agrees(next.sessions[sender])) {
                state = std::move(next);
                sent = true;
                break;
            }
        }
        if (!sent)
            throw std::runtime_error("honest run stuck at step " + std::to_string(step.index));
        const Term msg = state.trace.back().message;
        bool delivered = false;
        for (auto& next : successors(one, state)) {
            const Event& e = next.trace.back();
            if (e.kind == EventKind::Deliver && e.session == receiver && e.message == msg &&
                agrees(next.sessions[receiver])) {
                state = std::move(next);
                delivered = true;
                break;
            }
        }
        if (!delivered)
            throw std::runtime_error("honest run cannot deliver step " + std::to_string(step.index));
    }
    return state.trace;
}

}  // namespace protocheck
