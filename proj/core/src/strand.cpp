#include "protocheck/strand.hpp"

#include <algorithm>
#include <climits>
#include <map>
#include <set>

#include "protocheck/intruder.hpp"
#include "protocheck/term_syntax.hpp"

namespace protocheck {

std::string_view to_string(PenetratorType type)
{
    switch (type) {
    case PenetratorType::Text: return "Text";
    case PenetratorType::Flush: return "Flush";
    case PenetratorType::Tee: return "Tee";
    case PenetratorType::Concat: return "Concat";
    case PenetratorType::Separate: return "Separate";
    case PenetratorType::KeyEmit: return "KeyEmit";
    case PenetratorType::Decrypt: return "Decrypt";
    case PenetratorType::Encrypt: return "Encrypt";
    }
    return "?";
}

std::string Strand::name() const
{
    if (penetrator)
        return std::string(to_string(*penetrator));
    std::string out = label + "[";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i)
            out += ", ";
        out += params[i].kind() == TermKind::Variable ? "_" : to_string(params[i]);
    }
    return out + "]";
}

std::string to_string(Node n)
{
    return "(" + std::to_string(n.strand + 1) + "," + std::to_string(n.index + 1) + ")";
}

std::vector<Node> Bundle::nodes() const
{
    std::vector<Node> out;
    for (std::size_t s = 0; s < strands.size(); ++s)
        for (std::size_t i = 0; i < strands[s].trace.size(); ++i)
            out.push_back({s, i});
    return out;
}

void link_strands(Bundle& b)
{
    b.succ.clear();
    for (std::size_t s = 0; s < b.strands.size(); ++s)
        for (std::size_t i = 1; i < b.strands[s].trace.size(); ++i)
            b.succ.push_back({{s, i - 1}, {s, i}});
}

namespace {

constexpr int kUnreachable = INT_MAX / 4;

SignedTerm plus(Term t) { return {Sign::Plus, std::move(t)}; }
SignedTerm minus(Term t) { return {Sign::Minus, std::move(t)}; }

class Lifter {
public:
    Lifter(const CheckedSpec& spec) : spec_(spec)
    {
        const auto& ps = spec.spec();
        initial_ = initial_intruder_knowledge(ps).terms();
        for (const auto& t : initial_)
            if (t.is_key())
                b_.penetrator_keys.insert(t);
        auto roles = ps.roles();
        if (!roles.empty())
            b_.initiator_role = roles[0];
        if (roles.size() > 1)
            b_.responder_role = roles[1];
        for (const auto& v : ps.free_variables)
            b_.parameters.push_back(v.name);
        if (!b_.responder_role.empty())
            b_.responder_fresh = spec.role(b_.responder_role).fresh;
    }

    Bundle run(const std::vector<Event>& trace)
    {
        for (const auto& e : trace) {
            std::size_t s = regular_strand(e);
            Strand& st = b_.strands[s];
            if (e.kind == EventKind::Send) {
                st.trace.push_back(plus(e.message));
            } else {
                st.trace.push_back(minus(e.message));
                Node dst{s, st.trace.size() - 1};
                Node src = produce(e.message);
                connect(src, dst);
            }
        }
        finish_regular();
        std::sort(b_.comm.begin(), b_.comm.end());
        link_strands(b_);
        return std::move(b_);
    }

private:
    enum class Via { None, Pool, Initial, Separate, Decrypt };

    struct Option {
        int cost = kUnreachable;
        Via via = Via::None;
        Node node;
        Term from = Term::agent("?");
    };

    std::size_t regular_strand(const Event& e)
    {
        auto it = strand_of_.find(e.session);
        if (it != strand_of_.end())
            return it->second;
        Strand st;
        st.session = e.session;
        st.role = role_of_session(e);
        b_.strands.push_back(std::move(st));
        self_[b_.strands.size() - 1] = e.kind == EventKind::Send ? e.actor : e.to;
        strand_of_[e.session] = b_.strands.size() - 1;
        return b_.strands.size() - 1;
    }

    std::string role_of_session(const Event& e) const
    {
        for (const auto& step : spec_.spec().steps) {
            if (step.index != e.step)
                continue;
            return e.kind == EventKind::Send ? *step.sender : step.receiver;
        }
        throw LiftError("event refers to unknown step " + std::to_string(e.step));
    }

    void finish_regular()
    {
        const auto& ps = spec_.spec();
        auto roles = ps.roles();
        for (std::size_t s = 0; s < b_.strands.size(); ++s) {
            Strand& st = b_.strands[s];
            if (!st.regular())
                continue;
            if (!roles.empty() && st.role == roles[0])
                st.label = "Init";
            else if (roles.size() > 1 && st.role == roles[1])
                st.label = "Resp";
            else
                st.label = st.role;
            const RoleInfo& role = spec_.role(st.role);
            Bindings bindings;
            bindings.emplace(st.role, Term::agent(self_.at(s)));
            for (std::size_t i = 0; i < st.trace.size() && i < role.steps.size(); ++i) {
                const auto& step = ps.steps[role.steps[i]];
                if (!match_pattern(step.pattern, st.trace[i].term, bindings))
                    throw LiftError("strand " + std::to_string(s + 1) + " does not follow role " +
                                    st.role + " at step " + std::to_string(step.index));
            }
            for (const auto& v : ps.free_variables) {
                auto it = bindings.find(v.name);
                st.params.push_back(it != bindings.end() ? it->second : Term::variable(v.name, v.sort));
            }
            st.complete = st.trace.size() == role.steps.size();
        }
    }

    Node add_penetrator(PenetratorType type, std::vector<SignedTerm> trace)
    {
        Strand st;
        st.penetrator = type;
        st.trace = std::move(trace);
        b_.strands.push_back(std::move(st));
        return {b_.strands.size() - 1, 0};
    }

    // Joins a positive node to a negative one. A positive node that already
    // feeds an edge is duplicated through a Tee strand.
    void connect(Node src, Node dst)
    {
        auto it = out_edge_.find(src);
        if (it == out_edge_.end()) {
            out_edge_[src] = b_.comm.size();
            b_.comm.push_back({src, dst});
            return;
        }
        const Term& g = b_.at(src).term;
        Node tee = add_penetrator(PenetratorType::Tee, {minus(g), plus(g), plus(g)});
        Edge& old = b_.comm[it->second];
        Node old_dst = old.to;
        old.to = tee;
        Node first{tee.strand, 1}, second{tee.strand, 2};
        out_edge_[first] = b_.comm.size();
        b_.comm.push_back({first, old_dst});
        out_edge_[second] = b_.comm.size();
        b_.comm.push_back({second, dst});
    }

    // Cheapest way to hold each analyzable term: unused positive nodes are
    // free, everything else costs one penetrator strand per step.
    void compute_available()
    {
        avail_.clear();
        auto offer = [&](const Term& t, Option o) {
            auto& cur = avail_[t];
            if (o.cost < cur.cost)
                cur = std::move(o);
        };
        for (const auto& t : initial_)
            offer(t, {1, Via::Initial, {}, t});
        for (const auto& n : b_.nodes()) {
            const SignedTerm& st = b_.at(n);
            if (st.sign != Sign::Plus)
                continue;
            offer(st.term, {out_edge_.contains(n) ? 1 : 0, Via::Pool, n, st.term});
        }
        bool changed = true;
        while (changed) {
            changed = false;
            std::vector<std::pair<Term, int>> snapshot;
            for (const auto& [t, o] : avail_)
                snapshot.emplace_back(t, o.cost);
            for (const auto& [t, cost] : snapshot) {
                auto relax = [&](const Term& target, int c, Via via) {
                    auto& cur = avail_[target];
                    if (c < cur.cost) {
                        cur = {c, via, {}, t};
                        changed = true;
                    }
                };
                if (t.kind() == TermKind::Pair) {
                    relax(t.left(), cost + 1, Via::Separate);
                    relax(t.right(), cost + 1, Via::Separate);
                } else if (t.is_encryption()) {
                    auto inv = inverse_key(t.key());
                    if (!inv)
                        continue;
                    auto k = avail_.find(*inv);
                    if (k == avail_.end() || k->second.cost >= kUnreachable)
                        continue;
                    relax(t.payload(), cost + k->second.cost + 1, Via::Decrypt);
                }
            }
        }
        synth_.clear();
    }

    int available_cost(const Term& t) const
    {
        auto it = avail_.find(t);
        return it == avail_.end() ? kUnreachable : it->second.cost;
    }

    int synth_cost(const Term& t)
    {
        if (auto it = synth_.find(t); it != synth_.end())
            return it->second;
        int best = available_cost(t);
        if (t.kind() == TermKind::Pair)
            best = std::min(best, synth_cost(t.left()) + synth_cost(t.right()) + 1);
        else if (t.is_encryption())
            best = std::min(best, synth_cost(t.key()) + synth_cost(t.payload()) + 1);
        best = std::min(best, kUnreachable);
        synth_[t] = best;
        return best;
    }

    Node produce(const Term& t)
    {
        compute_available();
        if (synth_cost(t) >= kUnreachable)
            throw LiftError("no penetrator derivation for " + to_string(t));
        return build(t);
    }

    Node build(const Term& t)
    {
        const int best = synth_cost(t);
        if (available_cost(t) == best)
            return realize(t);
        if (t.kind() == TermKind::Pair) {
            Node l = build(t.left());
            Node r = build(t.right());
            Node c = add_penetrator(PenetratorType::Concat, {minus(t.left()), minus(t.right()), plus(t)});
            connect(l, c);
            connect(r, {c.strand, 1});
            return {c.strand, 2};
        }
        Node k = build(t.key());
        Node h = build(t.payload());
        Node e = add_penetrator(PenetratorType::Encrypt, {minus(t.key()), minus(t.payload()), plus(t)});
        connect(k, e);
        connect(h, {e.strand, 1});
        return {e.strand, 2};
    }

    Node realize(const Term& t)
    {
        const Option o = avail_.at(t);
        switch (o.via) {
        case Via::Pool:
            return o.node;
        case Via::Initial:
            return add_penetrator(t.is_key() ? PenetratorType::KeyEmit : PenetratorType::Text, {plus(t)});
        case Via::Separate: {
            const Term& p = o.from;
            Node src = realize(p);
            Node s = add_penetrator(PenetratorType::Separate, {minus(p), plus(p.left()), plus(p.right())});
            connect(src, s);
            return {s.strand, p.left() == t ? 1u : 2u};
        }
        case Via::Decrypt: {
            const Term& c = o.from;
            const Term inv = dual(c.key());
            Node key = realize(inv);
            Node src = realize(c);
            Node d = add_penetrator(PenetratorType::Decrypt, {minus(inv), minus(c), plus(t)});
            connect(key, d);
            connect(src, {d.strand, 1});
            return {d.strand, 2};
        }
        case Via::None:
            break;
        }
        throw LiftError("no penetrator derivation for " + to_string(t));
    }

    const CheckedSpec& spec_;
    Bundle b_;
    TermSet initial_;
    std::map<int, std::size_t> strand_of_;
    std::map<std::size_t, std::string> self_;
    std::map<Node, std::size_t> out_edge_;
    std::map<Term, Option> avail_;
    std::map<Term, int> synth_;
};

std::map<Node, std::vector<Node>> adjacency(const Bundle& b)
{
    std::map<Node, std::vector<Node>> adj;
    for (const auto& e : b.comm)
        adj[e.from].push_back(e.to);
    for (const auto& e : b.succ)
        adj[e.from].push_back(e.to);
    return adj;
}

bool valid_node(const Bundle& b, Node n)
{
    return n.strand < b.strands.size() && n.index < b.strands[n.strand].trace.size();
}

std::string template_violation(const Bundle& b, std::size_t s)
{
    const Strand& st = b.strands[s];
    const auto& tr = st.trace;
    auto signs = [&](std::initializer_list<Sign> want) {
        if (tr.size() != want.size())
            return false;
        std::size_t i = 0;
        for (Sign w : want)
            if (tr[i++].sign != w)
                return false;
        return true;
    };
    bool ok = false;
    using enum Sign;
    switch (*st.penetrator) {
    case PenetratorType::Text: ok = signs({Plus}); break;
    case PenetratorType::Flush: ok = signs({Minus}); break;
    case PenetratorType::KeyEmit:
        ok = signs({Plus}) && b.penetrator_keys.contains(tr[0].term);
        break;
    case PenetratorType::Tee:
        ok = signs({Minus, Plus, Plus}) && tr[1].term == tr[0].term && tr[2].term == tr[0].term;
        break;
    case PenetratorType::Concat:
        ok = signs({Minus, Minus, Plus}) && tr[2].term == normalize(Term::pair(tr[0].term, tr[1].term));
        break;
    case PenetratorType::Separate:
        ok = signs({Minus, Plus, Plus}) && tr[0].term.kind() == TermKind::Pair &&
             tr[1].term == tr[0].term.left() && tr[2].term == tr[0].term.right();
        break;
    case PenetratorType::Decrypt:
        ok = signs({Minus, Minus, Plus}) && tr[1].term.is_encryption() &&
             inverse_key(tr[1].term.key()) == tr[0].term && tr[2].term == tr[1].term.payload();
        break;
    case PenetratorType::Encrypt:
        ok = signs({Minus, Minus, Plus}) && tr[0].term.is_key() && tr[2].term.is_encryption() &&
             tr[2].term.key() == tr[0].term && tr[2].term.payload() == tr[1].term;
        break;
    }
    if (ok)
        return {};
    return "strand " + std::to_string(s + 1) + " does not match the " +
           std::string(to_string(*st.penetrator)) + " template";
}

}  // namespace

Bundle lift(const std::vector<Event>& trace, const CheckedSpec& spec)
{
    return Lifter(spec).run(trace);
}

std::vector<std::string> check_wellformed(const Bundle& b)
{
    std::vector<std::string> out;
    std::map<Node, int> incoming, outgoing;
    for (const auto& e : b.comm) {
        const std::string name = to_string(e.from) + " -> " + to_string(e.to);
        if (!valid_node(b, e.from) || !valid_node(b, e.to)) {
            out.push_back("edge " + name + " refers to a missing node");
            continue;
        }
        if (b.at(e.from).sign != Sign::Plus || b.at(e.to).sign != Sign::Minus)
            out.push_back("edge " + name + " does not run from a positive to a negative node");
        if (b.at(e.from).term != b.at(e.to).term)
            out.push_back("edge " + name + " joins unequal terms");
        ++incoming[e.to];
        ++outgoing[e.from];
    }
    std::set<Edge> succ;
    for (const auto& e : b.succ) {
        const std::string name = to_string(e.from) + " => " + to_string(e.to);
        if (!valid_node(b, e.from) || !valid_node(b, e.to)) {
            out.push_back("edge " + name + " refers to a missing node");
            continue;
        }
        if (e.from.strand != e.to.strand || e.from.index + 1 != e.to.index)
            out.push_back("edge " + name + " does not join consecutive nodes of one strand");
        succ.insert(e);
    }
    for (const auto& n : b.nodes()) {
        const SignedTerm& st = b.at(n);
        if (st.sign == Sign::Minus && incoming[n] != 1)
            out.push_back("negative node " + to_string(n) + " has " + std::to_string(incoming[n]) +
                          " incoming edges");
        if (st.sign == Sign::Plus && outgoing[n] > 1)
            out.push_back("positive node " + to_string(n) + " feeds " + std::to_string(outgoing[n]) +
                          " edges");
        if (n.index > 0 && !succ.contains({{n.strand, n.index - 1}, n}))
            out.push_back("node " + to_string(n) + " lacks its => predecessor edge");
    }
    for (std::size_t s = 0; s < b.strands.size(); ++s)
        if (!b.strands[s].regular())
            if (auto v = template_violation(b, s); !v.empty())
                out.push_back(v);

    // Cycle check by iterative DFS colouring.
    auto adj = adjacency(b);
    std::map<Node, int> colour;
    for (const auto& root : b.nodes()) {
        if (colour[root] != 0)
            continue;
        std::vector<std::pair<Node, std::size_t>> stack{{root, 0}};
        colour[root] = 1;
        while (!stack.empty()) {
            auto& [n, i] = stack.back();
            const auto& next = adj[n];
            if (i == next.size()) {
                colour[n] = 2;
                stack.pop_back();
                continue;
            }
            Node m = next[i++];
            if (!valid_node(b, m))
                continue;
            if (colour[m] == 1) {
                out.push_back("cycle through node " + to_string(m));
                continue;
            }
            if (colour[m] == 0) {
                colour[m] = 1;
                stack.emplace_back(m, 0);
            }
        }
    }
    return out;
}

bool originates(const Bundle& b, const Term& t, Node n)
{
    if (!valid_node(b, n))
        return false;
    const SignedTerm& st = b.at(n);
    if (st.sign != Sign::Plus || !subterm(t, st.term))
        return false;
    for (std::size_t i = 0; i < n.index; ++i)
        if (subterm(t, b.strands[n.strand].trace[i].term))
            return false;
    return true;
}

bool uniquely_originates(const Bundle& b, const Term& t)
{
    int count = 0;
    for (const auto& n : b.nodes())
        count += originates(b, t, n);
    return count == 1;
}

bool precedes(const Bundle& b, Node a, Node c)
{
    auto adj = adjacency(b);
    std::set<Node> seen;
    std::vector<Node> stack{a};
    while (!stack.empty()) {
        Node n = stack.back();
        stack.pop_back();
        for (const auto& m : adj[n]) {
            if (m == c)
                return true;
            if (seen.insert(m).second)
                stack.push_back(m);
        }
    }
    return false;
}

std::vector<Node> minimal_nodes(const Bundle& b, const std::function<bool(Node)>& pred)
{
    std::vector<Node> members;
    for (const auto& n : b.nodes())
        if (pred(n))
            members.push_back(n);
    std::set<Node> dominated;
    auto adj = adjacency(b);
    for (const auto& m : members) {
        std::set<Node> seen;
        std::vector<Node> stack{m};
        while (!stack.empty()) {
            Node n = stack.back();
            stack.pop_back();
            for (const auto& next : adj[n])
                if (seen.insert(next).second)
                    stack.push_back(next);
        }
        for (const auto& n : seen)
            dominated.insert(n);
    }
    std::vector<Node> out;
    for (const auto& m : members)
        if (!dominated.contains(m))
            out.push_back(m);
    return out;
}

GuaranteeResult responder_guarantee(const Bundle& b, std::size_t resp)
{
    if (resp >= b.strands.size())
        throw std::invalid_argument("no strand " + std::to_string(resp + 1));
    const Strand& r = b.strands[resp];
    if (!r.regular() || r.role != b.responder_role || !r.complete)
        throw std::invalid_argument("strand " + std::to_string(resp + 1) +
                                    " is not a completed responder strand");
    auto index_of = [&](const std::string& var) -> std::size_t {
        auto it = std::find(b.parameters.begin(), b.parameters.end(), var);
        if (it == b.parameters.end())
            throw std::invalid_argument("bundle has no parameter '" + var + "'");
        return static_cast<std::size_t>(it - b.parameters.begin());
    };
    const Term& initiator = r.params[index_of(b.initiator_role)];
    if (initiator.kind() == TermKind::Agent &&
        b.penetrator_keys.contains(Term::priv_key(initiator)))
        throw HypothesesNotMet("hypotheses not met: " + to_string(Term::priv_key(initiator)) +
                               " is known to the penetrator");
    for (const auto& v : b.responder_fresh) {
        const Term& value = r.params[index_of(v)];
        if (!uniquely_originates(b, value))
            throw HypothesesNotMet("hypotheses not met: " + to_string(value) +
                                   " does not originate uniquely");
    }

    const std::size_t responder = index_of(b.responder_role);
    Fails fails;
    for (std::size_t s = 0; s < b.strands.size(); ++s) {
        const Strand& st = b.strands[s];
        if (!st.regular() || st.role != b.initiator_role)
            continue;
        if (st.params == r.params)
            return Holds{s};
        bool agrees = true;
        for (std::size_t i = 0; i < st.params.size(); ++i)
            if (i != responder && st.params[i] != r.params[i])
                agrees = false;
        if (agrees)
            fails.witnesses.push_back(s);
    }
    return fails;
}

std::string export_bundle(const Bundle& b)
{
    std::string out;
    for (std::size_t s = 0; s < b.strands.size(); ++s) {
        out += "strand " + std::to_string(s + 1) + " " + b.strands[s].name() + "\n";
        for (const auto& st : b.strands[s].trace)
            out += (st.sign == Sign::Plus ? "+ " : "- ") + to_string(st.term) + "\n";
        out += "\n";
    }
    out += "edges\n";
    for (const auto& e : b.comm)
        out += to_string(e.from) + " -> " + to_string(e.to) + "\n";
    return out;
}

}  // namespace protocheck
