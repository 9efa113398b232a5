#include <functional>
#include <map>
#include <queue>
#include <random>
#include <variant>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "protocheck/strand.hpp"
#include "protocheck/term_syntax.hpp"

using namespace protocheck;

namespace {

const CheckedSpec& nspk()
{
    static const CheckedSpec spec = testfix::load_spec("nspk.proto.casper");
    return spec;
}

Bundle honest_bundle() { return lift(honest_run(nspk()), nspk()); }
Bundle lowe_bundle() { return lift(testfix::lowe_trace(), nspk()); }

std::size_t strand_named(const Bundle& b, const std::string& name)
{
    for (std::size_t i = 0; i < b.strands.size(); ++i)
        if (b.strands[i].name() == name)
            return i;
    throw std::runtime_error("no strand " + name);
}

// B's nonce: the second parameter-nonce of the responder strand.
Term responder_nonce(const Bundle& b)
{
    std::size_t r = strand_named(b, "Resp[A, B, Na, Nb]");
    return b.strands[r].trace[1].term.payload().right();
}

// Reachability over → and ⇒, independent of `precedes`.
std::set<Node> reachable_from(const Bundle& b, Node start)
{
    std::map<Node, std::vector<Node>> next;
    for (const auto& e : b.comm)
        next[e.from].push_back(e.to);
    for (const auto& e : b.succ)
        next[e.from].push_back(e.to);
    std::set<Node> seen;
    std::queue<Node> q;
    q.push(start);
    while (!q.empty()) {
        Node n = q.front();
        q.pop();
        for (const auto& m : next[n])
            if (seen.insert(m).second)
                q.push(m);
    }
    return seen;
}

bool originates_by_definition(const Bundle& b, const Term& t, Node n)
{
    const auto& trace = b.strands[n.strand].trace;
    if (trace[n.index].sign != Sign::Plus || !subterm(t, trace[n.index].term))
        return false;
    for (std::size_t i = 0; i < n.index; ++i)
        if (subterm(t, trace[i].term))
            return false;
    return true;
}

// Every NSPK and NSL trace up to `depth` events, each lifted.
std::vector<Bundle> all_lifted_bundles(const CheckedSpec& spec, std::size_t depth, int b_sessions)
{
    Bounds bounds = testfix::lowe_bounds();
    bounds.sessions["B"] = b_sessions;
    std::vector<Bundle> out;
    std::function<void(const GlobalState&)> walk = [&](const GlobalState& s) {
        out.push_back(lift(s.trace, spec));
        if (s.trace.size() == depth)
            return;
        for (const auto& n : successors(spec, s))
            walk(n);
    };
    walk(instantiate(spec, bounds));
    return out;
}

}  // namespace

TEST(Lift, LoweAttack)
{
    auto b = lowe_bundle();
    std::size_t resp = strand_named(b, "Resp[A, B, Na, Nb]");
    std::size_t init = strand_named(b, "Init[A, I, Na, Nb]");
    EXPECT_TRUE(b.strands[resp].complete);
    EXPECT_TRUE(b.strands[init].complete);
    EXPECT_EQ(b.strands[resp].trace.size(), 3u);
    EXPECT_EQ(b.strands[resp].trace[0].sign, Sign::Minus);

    // {Na, A}PK(I) reaches B re-encrypted: Decrypt feeds Encrypt feeds Resp.
    Node first_recv{resp, 0};
    Node enc_out{}, dec_out{};
    for (const auto& e : b.comm)
        if (e.to == first_recv)
            enc_out = e.from;
    ASSERT_EQ(b.strands[enc_out.strand].penetrator, PenetratorType::Encrypt);
    for (const auto& e : b.comm)
        if (e.to == Node{enc_out.strand, 1})
            dec_out = e.from;
    ASSERT_EQ(b.strands[dec_out.strand].penetrator, PenetratorType::Decrypt);
    Node ciphertext{dec_out.strand, 1};
    bool from_init = false;
    for (const auto& e : b.comm)
        if (e.to == ciphertext && e.from == Node{init, 0})
            from_init = true;
    EXPECT_TRUE(from_init);
}

TEST(Lift, HonestRunNeedsNoPenetrator)
{
    auto b = honest_bundle();
    ASSERT_EQ(b.strands.size(), 2u);
    EXPECT_EQ(b.strands[0].name(), "Init[A, B, Na, Nb]");
    EXPECT_EQ(b.strands[1].name(), "Resp[A, B, Na, Nb]");
    EXPECT_EQ(b.comm.size(), 3u);
    EXPECT_EQ(b.succ.size(), 4u);
}

TEST(Lift, EmptyTrace)
{
    auto b = lift({}, nspk());
    EXPECT_TRUE(b.strands.empty());
    EXPECT_TRUE(b.comm.empty());
    EXPECT_TRUE(check_wellformed(b).empty());
}

TEST(Export, Goldens)
{
    EXPECT_EQ(export_bundle(honest_bundle()), testfix::read_file(testfix::golden_path("honest.bundle")));
    EXPECT_EQ(export_bundle(lowe_bundle()), testfix::read_file(testfix::golden_path("lowe.bundle")));
}

TEST(Wellformed, FixtureBundles)
{
    EXPECT_TRUE(check_wellformed(honest_bundle()).empty());
    EXPECT_TRUE(check_wellformed(lowe_bundle()).empty());
}

TEST(Wellformed, MissingIncomingEdge)
{
    auto b = honest_bundle();
    std::erase_if(b.comm, [](const Edge& e) { return e.to == Node{1, 0}; });
    auto v = check_wellformed(b);
    ASSERT_FALSE(v.empty());
    EXPECT_NE(v[0].find("(2,1)"), std::string::npos) << v[0];
}

TEST(Wellformed, UnequalTerms)
{
    auto b = honest_bundle();
    b.strands[1].trace[0].term = Term::aenc(Term::pub_key(Term::agent("B")), Term::nonce("x"));
    auto v = check_wellformed(b);
    ASSERT_FALSE(v.empty());
    bool named = false;
    for (const auto& s : v)
        named |= s.find("unequal terms") != std::string::npos && s.find("(2,1)") != std::string::npos;
    EXPECT_TRUE(named);
}

TEST(Wellformed, NonConsecutiveSuccession)
{
    auto b = honest_bundle();
    b.succ.push_back({{0, 0}, {0, 2}});
    EXPECT_FALSE(check_wellformed(b).empty());
}

TEST(Wellformed, CycleIsReported)
{
    auto b = honest_bundle();
    // (1,1) -> (2,1) => (2,2) -> (1,1)
    b.comm.push_back({{1, 1}, {0, 0}});
    auto v = check_wellformed(b);
    bool cycle = false;
    for (const auto& s : v)
        cycle |= s.find("cycle") != std::string::npos;
    EXPECT_TRUE(cycle);
}

TEST(Wellformed, PenetratorTemplateMismatch)
{
    auto b = lowe_bundle();
    std::size_t enc = 0;
    while (b.strands[enc].penetrator != PenetratorType::Encrypt)
        ++enc;
    b.strands[enc].trace[2].term = Term::nonce("other");
    EXPECT_FALSE(check_wellformed(b).empty());
}

TEST(Wellformed, EveryLiftedBundleUpToDepthSix)
{
    for (const char* name : {"nspk.proto.casper", "nsl.proto.casper"}) {
        auto spec = testfix::load_spec(name);
        auto bundles = all_lifted_bundles(spec, 6, 1);
        EXPECT_GT(bundles.size(), 50u);
        for (const auto& b : bundles) {
            auto v = check_wellformed(b);
            EXPECT_TRUE(v.empty()) << name << ": " << (v.empty() ? "" : v[0]) << "\n" << export_bundle(b);
        }
    }
    for (const auto& b : all_lifted_bundles(nspk(), 5, 2))
        EXPECT_TRUE(check_wellformed(b).empty());
}

TEST(Wellformed, ReceivedTermsAreSentTerms)
{
    for (const auto& b : all_lifted_bundles(nspk(), 6, 1)) {
        std::multiset<Term> sent, received;
        for (const auto& e : b.comm) {
            sent.insert(b.at(e.from).term);
            received.insert(b.at(e.to).term);
        }
        std::multiset<Term> plus, minus;
        for (const auto& n : b.nodes())
            (b.at(n).sign == Sign::Plus ? plus : minus).insert(b.at(n).term);
        EXPECT_TRUE(std::includes(plus.begin(), plus.end(), minus.begin(), minus.end()));
        EXPECT_EQ(received, minus);
    }
}

TEST(Originates, ResponderNonce)
{
    auto b = honest_bundle();
    Term nb = responder_nonce(b);
    Term na = b.strands[1].trace[0].term.payload().left();
    EXPECT_TRUE(originates(b, nb, {1, 1}));
    EXPECT_FALSE(originates(b, nb, {1, 2}));
    EXPECT_FALSE(originates(b, na, {1, 1}));
}

TEST(Originates, AgreesWithBruteForceScan)
{
    for (const auto& b : {honest_bundle(), lowe_bundle()}) {
        TermSet terms;
        for (const auto& n : b.nodes())
            for (const auto& p : syntactic_subterms(b.at(n).term))
                terms.insert(p);
        for (const auto& n : b.nodes())
            for (const auto& t : terms)
                EXPECT_EQ(originates(b, t, n), originates_by_definition(b, t, n))
                    << to_string(t) << " at " << to_string(n);
    }
}

TEST(UniquelyOriginates, Examples)
{
    auto b = honest_bundle();
    Term nb = responder_nonce(b);
    EXPECT_TRUE(uniquely_originates(b, nb));
    EXPECT_FALSE(uniquely_originates(b, Term::nonce("nowhere")));

    for (int i = 0; i < 2; ++i) {
        Strand text;
        text.penetrator = PenetratorType::Text;
        text.trace = {{Sign::Plus, nb}};
        b.strands.push_back(text);
    }
    EXPECT_FALSE(uniquely_originates(b, nb));
}

TEST(ResponderGuarantee, HoldsOnHonestRun)
{
    auto b = honest_bundle();
    auto r = responder_guarantee(b, 1);
    ASSERT_TRUE(std::holds_alternative<Holds>(r));
    EXPECT_EQ(b.strands[std::get<Holds>(r).initiator].name(), "Init[A, B, Na, Nb]");
}

TEST(ResponderGuarantee, FailsOnLoweAttack)
{
    auto b = lowe_bundle();
    auto r = responder_guarantee(b, strand_named(b, "Resp[A, B, Na, Nb]"));
    ASSERT_TRUE(std::holds_alternative<Fails>(r));
    const auto& w = std::get<Fails>(r).witnesses;
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(b.strands[w[0]].name(), "Init[A, I, Na, Nb]");
}

TEST(ResponderGuarantee, HypothesesNotMet)
{
    auto b = honest_bundle();
    b.penetrator_keys.insert(Term::priv_key(Term::agent("A")));
    EXPECT_THROW(responder_guarantee(b, 1), HypothesesNotMet);

    auto twice = honest_bundle();
    Strand text;
    text.penetrator = PenetratorType::Text;
    text.trace = {{Sign::Plus, responder_nonce(twice)}};
    twice.strands.push_back(text);
    EXPECT_THROW(responder_guarantee(twice, 1), HypothesesNotMet);
}

TEST(ResponderGuarantee, RejectsNonResponder)
{
    auto b = honest_bundle();
    EXPECT_THROW(responder_guarantee(b, 0), std::invalid_argument);
    auto partial = lift(testfix::lowe_trace(), nspk());
    partial.strands[strand_named(partial, "Resp[A, B, Na, Nb]")].complete = false;
    EXPECT_THROW(responder_guarantee(partial, strand_named(partial, "Resp[A, B, Na, Nb]")),
                 std::invalid_argument);
}

// S = { n : Nb ⊑ term(n), t0 ⋢ term(n) } with t0 the term where Nb
// originates. Its minimal nodes are positive and regular.
TEST(MinimalNodes, PositiveAndRegularOnBothBundles)
{
    for (const auto& b : {honest_bundle(), lowe_bundle()}) {
        Term nb = responder_nonce(b);
        std::size_t resp = strand_named(b, "Resp[A, B, Na, Nb]");
        Term t0 = b.strands[resp].trace[1].term;
        auto in_s = [&](Node n) { return subterm(nb, b.at(n).term) && !subterm(t0, b.at(n).term); };
        auto mins = minimal_nodes(b, in_s);
        ASSERT_FALSE(mins.empty());

        // Exhaustive: recompute minimality from raw reachability.
        std::set<Node> expected;
        for (const auto& n : b.nodes()) {
            if (!in_s(n))
                continue;
            bool minimal = true;
            for (const auto& m : b.nodes())
                if (m != n && in_s(m) && reachable_from(b, m).contains(n))
                    minimal = false;
            if (minimal)
                expected.insert(n);
        }
        EXPECT_EQ(std::set<Node>(mins.begin(), mins.end()), expected);
        for (const auto& n : mins) {
            EXPECT_EQ(b.at(n).sign, Sign::Plus) << to_string(n);
            EXPECT_TRUE(b.strands[n.strand].regular()) << to_string(n);
        }
    }
}

TEST(MinimalNodes, EmptyAndSingleton)
{
    auto b = lowe_bundle();
    EXPECT_TRUE(minimal_nodes(b, [](Node) { return false; }).empty());
    Node only{3, 0};
    EXPECT_EQ(minimal_nodes(b, [&](Node n) { return n == only; }), std::vector<Node>{only});
}

TEST(MinimalNodes, NonemptyForEveryNonemptyPredicate)
{
    auto b = lowe_bundle();
    auto nodes = b.nodes();
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        std::set<Node> chosen;
        for (const auto& n : nodes)
            if (rng() % 3 == 0)
                chosen.insert(n);
        auto mins = minimal_nodes(b, [&](Node n) { return chosen.contains(n); });
        EXPECT_EQ(mins.empty(), chosen.empty());
        for (const auto& m : mins)
            for (const auto& c : chosen)
                EXPECT_FALSE(precedes(b, c, m));
    }
}

TEST(Precedes, MatchesReachability)
{
    auto b = lowe_bundle();
    for (const auto& a : b.nodes()) {
        auto r = reachable_from(b, a);
        for (const auto& c : b.nodes())
            EXPECT_EQ(precedes(b, a, c), r.contains(c));
    }
}
