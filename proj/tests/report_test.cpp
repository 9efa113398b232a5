#include <gtest/gtest.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "protocheck/report.hpp"
#include "protocheck/term_syntax.hpp"

using namespace protocheck;
using nlohmann::json;

namespace {

const CheckedSpec& nspk()
{
    static const CheckedSpec spec = testfix::load_spec("nspk.proto.casper");
    return spec;
}

RunConfig config(const std::string& name, Engine engine = Engine::Search)
{
    RunConfig c;
    c.protocol = testfix::fixture_path(name);
    c.engine = engine;
    c.bounds = testfix::lowe_bounds();
    return c;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string::npos)
            end = text.size();
        out.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

}  // namespace

TEST(RenderTrace, LoweAttackLines)
{
    auto text = render_trace(testfix::lowe_trace(), "I");
    std::vector<std::string> expected = {
        "1.1) A -> I : {Na, A}{PK(I)}",
        "2.1) I(A) -> B : {Na, A}{PK(B)}",
        "2.2) B -> A : {Na, Nb}{PK(A)}",
        "1.2) I -> A : {Na, Nb}{PK(A)}",
        "1.3) A -> I : {Nb}{PK(I)}",
        "2.3) I(A) -> B : {Nb}{PK(B)}",
    };
    EXPECT_EQ(lines(text), expected);
}

TEST(RenderTrace, SingleSessionUsesBareStepNumbers)
{
    Event e;
    e.kind = EventKind::Send;
    e.actor = "A";
    e.as = "A";
    e.to = "B";
    e.message = Term::aenc(Term::pub_key(Term::agent("B")),
                          Term::pair(Term::nonce("Na"), Term::agent("A")));
    e.session = 0;
    e.step = 1;
    EXPECT_EQ(render_trace({e}, "I"), "1) A -> B : {Na, A}{PK(B)}\n");
}

TEST(RenderTrace, EmptyTrace) { EXPECT_EQ(render_trace({}, "I"), ""); }

TEST(ParseTrace, RoundTripsLoweAndHonest)
{
    for (const auto& trace : {testfix::lowe_trace(), honest_run(nspk())}) {
        auto text = render_trace(trace, "I");
        auto back = parse_trace(text, nspk().spec());
        EXPECT_EQ(render_trace(back, "I"), text);
        ASSERT_EQ(back.size(), trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i) {
            EXPECT_EQ(back[i].kind, trace[i].kind) << i;
            EXPECT_EQ(back[i].message, trace[i].message) << i;
            EXPECT_EQ(back[i].step, trace[i].step) << i;
        }
    }
}

TEST(ParseTrace, RejectsGarbage)
{
    EXPECT_THROW(parse_trace("1.1) A -> : {Na}", nspk().spec()), SyntaxError);
    EXPECT_THROW(parse_trace("hello", nspk().spec()), SyntaxError);
}

TEST(Run, NspkSearchFindsAttack)
{
    auto r = run(config("nspk.proto.casper"));
    EXPECT_EQ(r.exit_code, kExitViolation);
    ASSERT_TRUE(r.search);
    EXPECT_EQ(r.search->verdict, SearchOutcome::Verdict::Attack);
    EXPECT_EQ(testfix::canonical_trace(r.search->trace), testfix::canonical_lowe());
}

TEST(Run, NslSearchIsExhausted)
{
    auto r = run(config("nsl.proto.casper"));
    EXPECT_EQ(r.exit_code, kExitClean);
    ASSERT_TRUE(r.search);
    EXPECT_EQ(r.search->verdict, SearchOutcome::Verdict::Exhausted);
    EXPECT_NE(render_text(r).find("Exhausted: no attack within bounds"), std::string::npos);
}

TEST(Run, BudgetExceeded)
{
    auto c = config("nspk.proto.casper");
    c.bounds.state_budget = 5;
    auto r = run(c);
    EXPECT_EQ(r.exit_code, kExitBudget);
    ASSERT_TRUE(r.search);
    EXPECT_EQ(r.search->verdict, SearchOutcome::Verdict::BudgetExceeded);
}

TEST(Run, BanWithIdealizationFlagsAssumption)
{
    auto c = config("nspk.proto.casper", Engine::Ban);
    c.idealization = testfix::fixture_path("nspk-sym.ban");
    auto r = run(c);
    EXPECT_EQ(r.exit_code, kExitViolation);
    ASSERT_TRUE(r.ban);
    ASSERT_EQ(r.ban->goals.size(), 3u);
    EXPECT_FALSE(r.ban->goals[0].flagged);
    EXPECT_TRUE(r.ban->goals[1].flagged);
}

TEST(Run, BanWithoutIdealizationIsInputError)
{
    auto r = run(config("nspk.proto.casper", Engine::Ban));
    EXPECT_EQ(r.exit_code, kExitInputError);
    EXPECT_FALSE(r.error.empty());
}

TEST(Run, MissingFileIsInputError)
{
    auto c = config("nspk.proto.casper");
    c.protocol = "/nonexistent/x.proto.casper";
    auto r = run(c);
    EXPECT_EQ(r.exit_code, kExitInputError);
    EXPECT_NE(r.error.find("cannot read"), std::string::npos);
    auto j = json::parse(render_json(r));
    EXPECT_EQ(j["exit_code"], 2);
}

TEST(Run, StrandEngineOnAttack)
{
    auto r = run(config("nspk.proto.casper", Engine::Strand));
    ASSERT_TRUE(r.strand);
    EXPECT_EQ(r.strand->verdict, StrandOutcome::Verdict::Fails);
    EXPECT_TRUE(r.strand->violations.empty());
    EXPECT_EQ(r.exit_code, kExitViolation);
}

TEST(Json, EmptyStepsForExhaustedSearch)
{
    auto j = json::parse(render_json(run(config("nsl.proto.casper"))));
    EXPECT_EQ(j["search"]["verdict"], "exhausted");
    ASSERT_TRUE(j["search"]["steps"].is_array());
    EXPECT_TRUE(j["search"]["steps"].empty());
}

TEST(Json, ByteIdenticalWithoutTiming)
{
    auto c = config("nspk.proto.casper", Engine::All);
    c.idealization = testfix::fixture_path("nspk-sym.ban");
    auto first = render_json(run(c), false);
    for (int i = 0; i < 3; ++i)
        EXPECT_EQ(render_json(run(c), false), first);
    EXPECT_EQ(first.find("duration_ms"), std::string::npos);
}

TEST(Json, TextAndJsonCarryTheSameFacts)
{
    auto c = config("nspk.proto.casper", Engine::All);
    c.idealization = testfix::fixture_path("nspk-sym.ban");
    auto r = run(c);
    auto text = render_text(r);
    auto j = json::parse(render_json(r));
    for (const auto& step : j["search"]["steps"])
        EXPECT_NE(text.find(step["message"].get<std::string>()), std::string::npos);
    for (const auto& v : j["search"]["violated"])
        EXPECT_NE(text.find(v.get<std::string>()), std::string::npos);
    for (const auto& g : j["ban"]["goals"])
        EXPECT_NE(text.find(g["name"].get<std::string>()), std::string::npos);
    EXPECT_NE(text.find(j["strand"]["responder"].get<std::string>()), std::string::npos);
    EXPECT_NE(text.find("exit code: " + std::to_string(j["exit_code"].get<int>())), std::string::npos);
}

TEST(Config, SessionBounds)
{
    auto m = parse_session_bounds("A=1,B=2");
    EXPECT_EQ(m.at("A"), 1);
    EXPECT_EQ(m.at("B"), 2);
    EXPECT_THROW(parse_session_bounds("A=x"), std::invalid_argument);
    EXPECT_THROW(parse_session_bounds("A"), std::invalid_argument);
}

TEST(Config, EngineAndFormatNames)
{
    EXPECT_EQ(engine_from_string("all"), Engine::All);
    EXPECT_FALSE(engine_from_string("fdr"));
    EXPECT_EQ(format_from_string("json"), Format::Json);
}
