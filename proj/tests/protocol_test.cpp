#include <functional>
#include <variant>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "protocheck/protocol.hpp"

using namespace protocheck;
using testfix::fixture_path;
using testfix::read_file;

namespace {

const char* kMinimal = R"(#Free variables
A, B : Agent
na : Nonce

#Protocol description
1. A -> B : {na, A}{PK(B)}
)";

std::string nspk_source() { return read_file(fixture_path("nspk.proto.casper")); }

SyntaxError parse_error(const std::string& src)
{
    try {
        parse_protocol(src);
    } catch (const SyntaxError& e) {
        return e;
    }
    throw std::runtime_error("parse unexpectedly succeeded");
}

// Replaces the atom at pre-order position `target` (counting atoms only).
Term replace_atom(const Term& t, int& position, int target, const Term& with)
{
    if (t.is_atom() || t.kind() == TermKind::Variable)
        return position++ == target ? with : t;
    if (t.kind() == TermKind::Pair) {
        Term l = replace_atom(t.left(), position, target, with);
        return Term::pair(l, replace_atom(t.right(), position, target, with));
    }
    Term k = replace_atom(t.key(), position, target, with);
    Term p = replace_atom(t.payload(), position, target, with);
    return t.kind() == TermKind::AsymEnc ? Term::aenc(k, p) : Term::senc(k, p);
}

int atom_count(const Term& t)
{
    if (t.is_atom() || t.kind() == TermKind::Variable)
        return 1;
    if (t.kind() == TermKind::Pair)
        return atom_count(t.left()) + atom_count(t.right());
    return atom_count(t.key()) + atom_count(t.payload());
}

}  // namespace

TEST(Parse, NspkFixtureSteps)
{
    auto spec = parse_protocol(nspk_source());
    ASSERT_EQ(spec.steps.size(), 3u);
    EXPECT_EQ(to_string(spec.steps[0]), "1. A -> B : {na, A}{PK(B)}");
    EXPECT_EQ(to_string(spec.steps[1]), "2. B -> A : {na, nb}{PK(A)}");
    EXPECT_EQ(to_string(spec.steps[2]), "3. A -> B : {nb}{PK(B)}");
    ASSERT_TRUE(spec.environment.has_value());
    EXPECT_EQ(to_string(*spec.environment), "0. -> A : B");

    ASSERT_EQ(spec.goals.size(), 4u);
    int secrets = 0, agreements = 0;
    for (const auto& g : spec.goals)
        (std::holds_alternative<SecretGoal>(g) ? secrets : agreements)++;
    EXPECT_EQ(secrets, 2);
    EXPECT_EQ(agreements, 2);
    EXPECT_EQ(to_string(spec.goals[2]), "Agreement(A, B, [na, nb])");
    EXPECT_EQ(spec.intruder_id, "I");
    EXPECT_EQ(spec.roles(), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(spec.agents(), (std::vector<std::string>{"A", "B", "I"}));
}

TEST(Parse, EmptyInput)
{
    auto e = parse_error("");
    EXPECT_EQ(e.detail(), "no #Protocol description section");
}

TEST(Parse, UndeclaredVariableNamesItAndItsLine)
{
    std::string src = kMinimal;
    src += "2. B -> A : {na, nc}{PK(A)}\n";
    auto e = parse_error(src);
    EXPECT_NE(e.detail().find("nc"), std::string::npos) << e.what();
    EXPECT_EQ(e.line(), 7u);
    EXPECT_EQ(e.column(), 18u);
}

TEST(Parse, DuplicateStep)
{
    std::string src = kMinimal;
    src += "1. B -> A : {na}{PK(A)}\n";
    auto e = parse_error(src);
    EXPECT_EQ(e.detail(), "duplicate step number 1");
    EXPECT_EQ(e.line(), 7u);
}

TEST(Parse, UnknownSectionHeader)
{
    std::string src = kMinimal;
    src += "#Functions\n";
    auto e = parse_error(src);
    EXPECT_EQ(e.detail(), "unknown section header '#Functions'");
    EXPECT_EQ(e.line(), 7u);
}

TEST(Parse, SenderMustDifferFromReceiver)
{
    std::string src = kMinimal;
    src += "2. A -> A : {na}{PK(A)}\n";
    EXPECT_EQ(parse_error(src).detail(), "sender and receiver are the same role");
}

TEST(Parse, CommentsAreIgnored)
{
    std::string src = "-- leading comment\n" + std::string(kMinimal) + "-- trailing\n";
    EXPECT_EQ(parse_protocol(src), parse_protocol(kMinimal));
}

TEST(Parse, RoundTripOverFixtures)
{
    for (const char* name : {"nspk.proto.casper", "nsl.proto.casper"}) {
        auto spec = parse_protocol(read_file(fixture_path(name)));
        auto printed = print_protocol(spec);
        EXPECT_EQ(parse_protocol(printed), spec) << name;
        EXPECT_EQ(print_protocol(parse_protocol(printed)), printed) << name;
    }
    auto minimal = parse_protocol(kMinimal);
    EXPECT_EQ(parse_protocol(print_protocol(minimal)), minimal);
}

TEST(Executability, AcceptsFixtures)
{
    for (const char* name : {"nspk.proto.casper", "nsl.proto.casper"}) {
        auto checked = check_executability(parse_protocol(read_file(fixture_path(name))));
        ASSERT_EQ(checked.roles().size(), 2u);
        EXPECT_EQ(checked.role("A").fresh, std::vector<std::string>{"na"});
        EXPECT_EQ(checked.role("B").fresh, std::vector<std::string>{"nb"});
        EXPECT_EQ(checked.fresh_owner("nb"), "B");
    }
}

TEST(Executability, RejectsUnobtainableKey)
{
    std::string src = nspk_source();
    src.replace(src.find("A, B : Agent"), 12, "A, B, C : Agent");
    src.replace(src.find("{na, nb}{PK(A)}"), 15, "{na, nb}{PK(C)}");
    try {
        check_executability(parse_protocol(src));
        FAIL() << "expected rejection";
    } catch (const ExecutabilityError& e) {
        EXPECT_EQ(e.step(), 2);
        EXPECT_EQ(e.role(), "B");
    }
}

TEST(Executability, ZeroStepsAcceptedVacuously)
{
    auto checked = check_executability(parse_protocol("#Free variables\nA : Agent\n\n#Protocol description\n"));
    EXPECT_TRUE(checked.roles().empty());
    EXPECT_TRUE(checked.spec().steps.empty());
}

// Every single-atom mutation of a sent pattern to something the sender
// cannot obtain is rejected at exactly that step.
TEST(Executability, MutationsIntroducingUnobtainableAtomsAreRejected)
{
    int mutants = 0;
    for (const char* name : {"nspk.proto.casper", "nsl.proto.casper"}) {
        auto base = parse_protocol(read_file(fixture_path(name)));
        base.free_variables.push_back({"C", Sort::Agent});
        check_executability(base);
        Term c = Term::variable("C", Sort::Agent);
        for (std::size_t s = 0; s < base.steps.size(); ++s) {
            const auto& step = base.steps[s];
            Term receiver = base.variable(step.receiver);
            std::vector<Term> unobtainable{c, Term::pub_key(c), Term::priv_key(c),
                                           Term::priv_key(receiver)};
            for (int pos = 0; pos < atom_count(step.pattern); ++pos) {
                for (const auto& with : unobtainable) {
                    auto spec = base;
                    int counter = 0;
                    try {
                        spec.steps[s].pattern = normalize(replace_atom(step.pattern, counter, pos, with));
                    } catch (const std::invalid_argument&) {
                        continue;  // ill-sorted key position
                    }
                    ++mutants;
                    try {
                        check_executability(spec);
                        ADD_FAILURE() << name << ": accepted " << to_string(spec.steps[s]);
                    } catch (const ExecutabilityError& e) {
                        EXPECT_EQ(e.step(), step.index) << to_string(spec.steps[s]);
                    }
                }
            }
        }
    }
    EXPECT_GT(mutants, 30);
}
