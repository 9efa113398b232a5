#include "protocheck/ban.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <regex>
#include <stdexcept>
#include <utility>

#include "protocheck/term_syntax.hpp"

namespace protocheck::ban {

struct Formula::Node {
    FormulaKind kind;
    std::string first;
    std::string second;
    std::string key;
    std::optional<Formula> body;
    std::vector<Formula> items;
    std::string text;
};

namespace {

std::string joined(const std::vector<Formula>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i)
            out += ", ";
        out += items[i].text();
    }
    return out;
}

std::string inner_text(const Formula& f)
{
    return f.kind() == FormulaKind::Conjunction ? joined(f.items()) : f.text();
}

}  // namespace

Formula Formula::atom(std::string name)
{
    auto n = std::make_shared<Node>();
    n->kind = FormulaKind::Atom;
    n->text = name;
    n->first = std::move(name);
    return Formula(std::move(n));
}

namespace {

std::string_view operator_text(FormulaKind kind)
{
    switch (kind) {
    case FormulaKind::Believes: return " |= ";
    case FormulaKind::OnceSaid: return " |~ ";
    case FormulaKind::Sees: return " <| ";
    case FormulaKind::Jurisdiction: return " |=> ";
    default: return " ? ";
    }
}

}  // namespace

Formula Formula::unary(FormulaKind kind, std::string principal, Formula body)
{
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->text = principal + std::string(operator_text(kind)) + body.text();
    n->first = std::move(principal);
    n->body = std::move(body);
    return Formula(std::move(n));
}

Formula Formula::believes(std::string p, Formula body)
{
    return unary(FormulaKind::Believes, std::move(p), std::move(body));
}

Formula Formula::once_said(std::string p, Formula body)
{
    return unary(FormulaKind::OnceSaid, std::move(p), std::move(body));
}

Formula Formula::sees(std::string p, Formula body)
{
    return unary(FormulaKind::Sees, std::move(p), std::move(body));
}

Formula Formula::jurisdiction(std::string p, Formula body)
{
    return unary(FormulaKind::Jurisdiction, std::move(p), std::move(body));
}

Formula Formula::fresh(Formula body)
{
    auto n = std::make_shared<Node>();
    n->kind = FormulaKind::Fresh;
    n->text = "#(" + inner_text(body) + ")";
    n->body = std::move(body);
    return Formula(std::move(n));
}

Formula Formula::good_key(std::string key, std::string p, std::string q)
{
    if (q < p)
        std::swap(p, q);
    auto n = std::make_shared<Node>();
    n->kind = FormulaKind::GoodKey;
    n->text = p + "<-" + key + "->" + q;
    n->first = std::move(p);
    n->second = std::move(q);
    n->key = std::move(key);
    return Formula(std::move(n));
}

Formula Formula::encrypted(Formula body, std::string key)
{
    auto n = std::make_shared<Node>();
    n->kind = FormulaKind::Encrypted;
    n->text = "{" + inner_text(body) + "}" + key;
    n->key = std::move(key);
    n->body = std::move(body);
    return Formula(std::move(n));
}

Formula Formula::conjunction(std::vector<Formula> items)
{
    std::vector<Formula> flat;
    for (auto& f : items) {
        if (f.kind() == FormulaKind::Conjunction) {
            for (const auto& g : f.node_->items)
                flat.push_back(g);
        } else {
            flat.push_back(std::move(f));
        }
    }
    if (flat.empty())
        throw std::invalid_argument("empty conjunction");
    if (flat.size() == 1)
        return flat.front();
    auto n = std::make_shared<Node>();
    n->kind = FormulaKind::Conjunction;
    n->text = "(" + joined(flat) + ")";
    n->items = std::move(flat);
    return Formula(std::move(n));
}

FormulaKind Formula::kind() const noexcept { return node_->kind; }

const std::string& Formula::principal() const
{
    switch (kind()) {
    case FormulaKind::Atom:
    case FormulaKind::Believes:
    case FormulaKind::OnceSaid:
    case FormulaKind::Sees:
    case FormulaKind::Jurisdiction:
    case FormulaKind::GoodKey:
        return node_->first;
    default:
        throw std::logic_error("formula has no principal: " + text());
    }
}

const std::string& Formula::peer() const
{
    if (kind() != FormulaKind::GoodKey)
        throw std::logic_error("formula has no peer: " + text());
    return node_->second;
}

const std::string& Formula::key() const
{
    if (kind() == FormulaKind::GoodKey || kind() == FormulaKind::Encrypted)
        return node_->key;
    throw std::logic_error("formula has no key: " + text());
}

const Formula& Formula::body() const
{
    if (!node_->body)
        throw std::logic_error("formula has no body: " + text());
    return *node_->body;
}

std::vector<Formula> Formula::items() const
{
    if (kind() == FormulaKind::Conjunction)
        return node_->items;
    return {*this};
}

const std::string& Formula::text() const noexcept { return node_->text; }

std::set<Formula> subformulas(const Formula& f)
{
    std::set<Formula> out;
    std::vector<Formula> stack{f};
    while (!stack.empty()) {
        Formula g = stack.back();
        stack.pop_back();
        if (!out.insert(g).second)
            continue;
        switch (g.kind()) {
        case FormulaKind::Conjunction:
            for (const auto& i : g.items())
                stack.push_back(i);
            break;
        case FormulaKind::Atom:
        case FormulaKind::GoodKey:
            break;
        default:
            stack.push_back(g.body());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Tok {
    Ident,
    Believes,
    OnceSaid,
    Sees,
    Controls,
    KeyLeft,
    KeyRight,
    Hash,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semicolon,
    End,
};

struct Token {
    Tok kind;
    std::string text;
    std::size_t column;
};

class FormulaParser {
public:
    FormulaParser(std::string_view text, std::size_t line, std::size_t column)
        : line_(line)
    {
        tokenize(text, column);
    }

    Formula formula()
    {
        const Token& t = peek();
        switch (t.kind) {
        case Tok::Hash: {
            next();
            expect(Tok::LParen, "'('");
            auto items = list();
            expect(Tok::RParen, "')'");
            return Formula::fresh(Formula::conjunction(std::move(items)));
        }
        case Tok::LBrace: {
            next();
            auto items = list();
            expect(Tok::RBrace, "'}'");
            Token key = expect(Tok::Ident, "key name after '}'");
            return Formula::encrypted(Formula::conjunction(std::move(items)), key.text);
        }
        case Tok::LParen: {
            next();
            auto items = list();
            expect(Tok::RParen, "')'");
            return Formula::conjunction(std::move(items));
        }
        case Tok::Ident: {
            Token id = next();
            switch (peek().kind) {
            case Tok::Believes: next(); principal(id); return Formula::believes(id.text, formula());
            case Tok::OnceSaid: next(); principal(id); return Formula::once_said(id.text, formula());
            case Tok::Sees: next(); principal(id); return Formula::sees(id.text, formula());
            case Tok::Controls: next(); principal(id); return Formula::jurisdiction(id.text, formula());
            case Tok::KeyLeft: {
                next();
                Token key = expect(Tok::Ident, "key name after '<-'");
                expect(Tok::KeyRight, "'->'");
                Token q = expect(Tok::Ident, "principal after '->'");
                principal(id);
                principal(q);
                return Formula::good_key(key.text, id.text, q.text);
            }
            default:
                return Formula::atom(id.text);
            }
        }
        default:
            fail(t, "expected a formula");
        }
    }

    std::vector<Formula> list(Tok separator = Tok::Comma)
    {
        std::vector<Formula> out{formula()};
        while (peek().kind == separator) {
            next();
            out.push_back(formula());
        }
        return out;
    }

    void finish()
    {
        if (peek().kind != Tok::End)
            fail(peek(), "unexpected '" + peek().text + "'");
    }

    /// Principals seen in principal positions, with their columns.
    const std::vector<Token>& principals() const noexcept { return principals_; }

private:
    void tokenize(std::string_view s, std::size_t column)
    {
        std::size_t i = 0;
        while (i < s.size()) {
            char c = s[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                ++i;
                continue;
            }
            const std::size_t col = column + i;
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'') {
                std::size_t j = i;
                while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' ||
                                        s[j] == '\''))
                    ++j;
                toks_.push_back({Tok::Ident, std::string(s.substr(i, j - i)), col});
                i = j;
                continue;
            }
            static const std::pair<std::string_view, Tok> symbols[] = {
                {"|=>", Tok::Controls}, {"|=", Tok::Believes}, {"|~", Tok::OnceSaid},
                {"<|", Tok::Sees},      {"<-", Tok::KeyLeft},  {"->", Tok::KeyRight},
                {"#", Tok::Hash},       {"(", Tok::LParen},    {")", Tok::RParen},
                {"{", Tok::LBrace},     {"}", Tok::RBrace},    {",", Tok::Comma},
                {";", Tok::Semicolon},
            };
            bool matched = false;
            for (const auto& [text, kind] : symbols) {
                if (s.substr(i, text.size()) == text) {
                    toks_.push_back({kind, std::string(text), col});
                    i += text.size();
                    matched = true;
                    break;
                }
            }
            if (!matched)
                throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col);
        }
        toks_.push_back({Tok::End, "end of input", column + s.size()});
    }

    const Token& peek() const { return toks_[pos_]; }
    Token next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    Token expect(Tok kind, const std::string& what)
    {
        if (peek().kind != kind)
            fail(peek(), "expected " + what);
        return next();
    }

    [[noreturn]] void fail(const Token& t, const std::string& msg) const
    {
        throw SyntaxError(msg + " at '" + t.text + "'", line_, t.column);
    }

    void principal(const Token& t) { principals_.push_back(t); }

    std::size_t line_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<Token> principals_;
};

std::vector<Formula> parse_list(std::string_view text, std::size_t line, std::size_t column,
                                const std::vector<std::string>* declared)
{
    FormulaParser p(text, line, column);
    auto out = p.list(Tok::Semicolon);
    p.finish();
    if (declared) {
        for (const auto& t : p.principals())
            if (std::find(declared->begin(), declared->end(), t.text) == declared->end())
                throw SyntaxError("unknown principal '" + t.text + "'", line, t.column);
    }
    return out;
}

}  // namespace

Formula parse_formula(std::string_view text)
{
    FormulaParser p(text, 1, 1);
    Formula f = p.formula();
    p.finish();
    return f;
}

IdealizedProtocol parse_idealized(std::string_view source)
{
    static const std::regex principals_re(R"(^\s*principals\s*:\s*(.*)$)");
    static const std::regex assume_re(R"(^\s*assume\s+(\w+)(\s+unjustified)?\s*:(.*)$)");
    static const std::regex step_re(R"(^\s*step\s+(\d+)\s*:\s*(\w+)\s*->\s*(\w+)\s*:(.*)$)");
    static const std::regex goal_re(R"(^\s*goal\s+(\w+)\s*:(.*)$)");
    static const std::regex name_re(R"(\s*(\w+)\s*)");

    IdealizedProtocol out;
    std::set<std::string> labels;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= source.size()) {
        std::size_t end = source.find('\n', start);
        if (end == std::string_view::npos)
            end = source.size();
        std::string line(source.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line.compare(first, 2, "--") == 0)
            continue;

        std::smatch m;
        auto col = [&](int group) { return static_cast<std::size_t>(m.position(group)) + 1; };
        if (std::regex_match(line, m, principals_re)) {
            std::string names = m[1];
            std::size_t pos = 0;
            while (pos <= names.size()) {
                std::size_t comma = names.find(',', pos);
                if (comma == std::string::npos)
                    comma = names.size();
                std::string item = names.substr(pos, comma - pos);
                std::smatch nm;
                if (!std::regex_match(item, nm, name_re))
                    throw SyntaxError("bad principal name '" + item + "'", line_no, col(1) + pos);
                out.principals.push_back(nm[1]);
                pos = comma + 1;
            }
        } else if (std::regex_match(line, m, assume_re)) {
            std::string label = m[1];
            bool unjustified = m[2].matched;
            for (auto& f : parse_list(m[3].str(), line_no, col(3), &out.principals))
                out.assumptions.push_back({label, std::move(f), unjustified});
            if (labels.contains(label)) {
                for (auto& a : out.assumptions)
                    if (a.label == label && a.unjustified != unjustified)
                        throw SyntaxError("assumption " + label + " is both justified and unjustified",
                                          line_no, col(1));
            }
            labels.insert(label);
        } else if (std::regex_match(line, m, step_re)) {
            IdealizedStep step;
            step.index = std::stoi(m[1]);
            step.sender = m[2];
            step.receiver = m[3];
            for (int g : {2, 3}) {
                const std::string who = m[g];
                if (std::find(out.principals.begin(), out.principals.end(), who) == out.principals.end())
                    throw SyntaxError("unknown principal '" + who + "'", line_no, col(g));
            }
            for (const auto& s : out.steps)
                if (s.index == step.index)
                    throw SyntaxError("duplicate step " + std::to_string(step.index), line_no, col(1));
            auto content = parse_list(m[4].str(), line_no, col(4), &out.principals);
            if (content.size() != 1)
                throw SyntaxError("a step carries one formula", line_no, col(4));
            step.content = content.front();
            out.steps.push_back(std::move(step));
        } else if (std::regex_match(line, m, goal_re)) {
            out.goals.push_back({m[1], parse_list(m[2].str(), line_no, col(2), nullptr)});
        } else {
            throw SyntaxError("unrecognized line", line_no, first + 1);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rules

std::string_view to_string(Rule rule)
{
    switch (rule) {
    case Rule::Assumption: return "assumption";
    case Rule::Receipt: return "receipt";
    case Rule::SeeComponent: return "see component";
    case Rule::SeeDecrypt: return "see decrypt";
    case Rule::MessageMeaning: return "message meaning";
    case Rule::Freshness: return "freshness";
    case Rule::NonceVerification: return "nonce verification";
    case Rule::Jurisdiction: return "jurisdiction";
    case Rule::BeliefElimination: return "belief elimination";
    case Rule::BeliefIntroduction: return "belief introduction";
    }
    return "?";
}

Formula receive(const IdealizedStep& step) { return Formula::sees(step.receiver, step.content); }

namespace {

/// Other party of a key belief `P |= P<-K->Q` for the key of `{X}K`, if it matches.
std::optional<std::string> key_partner(const Formula& sees, const Formula& key_belief)
{
    if (sees.kind() != FormulaKind::Sees || sees.body().kind() != FormulaKind::Encrypted)
        return std::nullopt;
    if (key_belief.kind() != FormulaKind::Believes || key_belief.body().kind() != FormulaKind::GoodKey)
        return std::nullopt;
    const std::string& p = sees.principal();
    const Formula& gk = key_belief.body();
    if (key_belief.principal() != p || gk.key() != sees.body().key())
        return std::nullopt;
    if (gk.principal() == p && gk.peer() != p)
        return gk.peer();
    if (gk.peer() == p && gk.principal() != p)
        return gk.principal();
    return std::nullopt;
}

}  // namespace

std::optional<Formula> see_decrypt(const Formula& sees, const Formula& key_belief)
{
    if (!key_partner(sees, key_belief))
        return std::nullopt;
    return Formula::sees(sees.principal(), sees.body().body());
}

std::optional<Formula> message_meaning(const Formula& sees, const Formula& key_belief)
{
    auto q = key_partner(sees, key_belief);
    if (!q)
        return std::nullopt;
    return Formula::believes(sees.principal(), Formula::once_said(*q, sees.body().body()));
}

std::optional<Formula> nonce_verification(const Formula& said, const Formula& fresh)
{
    if (said.kind() != FormulaKind::Believes || said.body().kind() != FormulaKind::OnceSaid)
        return std::nullopt;
    if (fresh.kind() != FormulaKind::Believes || fresh.principal() != said.principal() ||
        fresh.body() != Formula::fresh(said.body().body()))
        return std::nullopt;
    const Formula& os = said.body();
    return Formula::believes(said.principal(), Formula::believes(os.principal(), os.body()));
}

std::optional<Formula> jurisdiction(const Formula& juris, const Formula& belief)
{
    if (juris.kind() != FormulaKind::Believes || juris.body().kind() != FormulaKind::Jurisdiction)
        return std::nullopt;
    const Formula& j = juris.body();
    if (belief != Formula::believes(juris.principal(), Formula::believes(j.principal(), j.body())))
        return std::nullopt;
    return Formula::believes(juris.principal(), j.body());
}

std::optional<Formula> freshness(const Formula& fresh_component, const Formula& enclosing)
{
    if (fresh_component.kind() != FormulaKind::Believes ||
        fresh_component.body().kind() != FormulaKind::Fresh)
        return std::nullopt;
    const Formula& y = fresh_component.body().body();
    bool inside = false;
    if (enclosing.kind() == FormulaKind::Conjunction) {
        auto items = enclosing.items();
        inside = std::find(items.begin(), items.end(), y) != items.end();
    } else if (enclosing.kind() == FormulaKind::Encrypted) {
        inside = enclosing.body() == y;
    }
    if (!inside)
        return std::nullopt;
    return Formula::believes(fresh_component.principal(), Formula::fresh(enclosing));
}

namespace {

/// Splits `P |= X` or `P |= Q |= X` into the belief prefix and X.
struct BeliefContext {
    std::vector<std::string> chain;
    Formula inner;
};

std::optional<BeliefContext> belief_context(const Formula& f)
{
    if (f.kind() != FormulaKind::Believes)
        return std::nullopt;
    BeliefContext c{{f.principal()}, f.body()};
    if (c.inner.kind() == FormulaKind::Believes) {
        c.chain.push_back(c.inner.principal());
        c.inner = c.inner.body();
    }
    return c;
}

Formula wrap(const std::vector<std::string>& chain, Formula inner)
{
    for (auto it = chain.rbegin(); it != chain.rend(); ++it)
        inner = Formula::believes(*it, std::move(inner));
    return inner;
}

bool node_replays(const Derivation& d)
{
    std::vector<Formula> p;
    for (const auto& q : d.premises)
        p.push_back(q->conclusion);
    const Formula& c = d.conclusion;
    auto is = [&](const std::optional<Formula>& f) { return f && *f == c; };
    switch (d.rule) {
    case Rule::Assumption:
    case Rule::Receipt:
        return p.empty();
    case Rule::SeeComponent: {
        if (p.size() != 1 || p[0].kind() != FormulaKind::Sees ||
            p[0].body().kind() != FormulaKind::Conjunction || c.kind() != FormulaKind::Sees ||
            c.principal() != p[0].principal())
            return false;
        auto items = p[0].body().items();
        return std::find(items.begin(), items.end(), c.body()) != items.end();
    }
    case Rule::SeeDecrypt: return p.size() == 2 && is(see_decrypt(p[0], p[1]));
    case Rule::MessageMeaning: return p.size() == 2 && is(message_meaning(p[0], p[1]));
    case Rule::NonceVerification: return p.size() == 2 && is(nonce_verification(p[0], p[1]));
    case Rule::Jurisdiction: return p.size() == 2 && is(jurisdiction(p[0], p[1]));
    case Rule::Freshness:
        return p.size() == 1 && c.kind() == FormulaKind::Believes &&
               c.body().kind() == FormulaKind::Fresh && is(freshness(p[0], c.body().body()));
    case Rule::BeliefElimination: {
        if (p.size() != 1)
            return false;
        auto from = belief_context(p[0]);
        if (!from || from->inner.kind() != FormulaKind::Conjunction)
            return false;
        for (const auto& item : from->inner.items())
            if (wrap(from->chain, item) == c)
                return true;
        return false;
    }
    case Rule::BeliefIntroduction: {
        if (p.empty())
            return false;
        auto first = belief_context(p[0]);
        if (!first)
            return false;
        std::vector<Formula> items;
        for (const auto& f : p) {
            auto ctx = belief_context(f);
            if (!ctx || ctx->chain != first->chain)
                return false;
            items.push_back(ctx->inner);
        }
        return p.size() > 1 && wrap(first->chain, Formula::conjunction(items)) == c;
    }
    }
    return false;
}

}  // namespace

bool replays(const Derivation& d)
{
    if (!node_replays(d))
        return false;
    return std::all_of(d.premises.begin(), d.premises.end(),
                       [](const DerivationPtr& p) { return replays(*p); });
}

DerivationPtr DerivedSet::find(const Formula& f) const
{
    auto it = facts_.find(f);
    return it == facts_.end() ? nullptr : it->second;
}

// ---------------------------------------------------------------------------
// Saturation

class Saturator {
public:
    Saturator(const IdealizedProtocol& p, const std::set<std::string>* labels)
        : protocol_(p), labels_(labels)
    {
        for (const auto& a : p.assumptions) {
            auto s = subformulas(a.formula);
            out_.closure_.insert(s.begin(), s.end());
        }
        for (const auto& step : p.steps) {
            auto s = subformulas(step.content);
            out_.closure_.insert(s.begin(), s.end());
        }
        for (const auto& f : out_.closure_)
            if (f.kind() == FormulaKind::Conjunction || f.kind() == FormulaKind::Encrypted)
                composites_.push_back(f);
    }

    DerivedSet run()
    {
        for (const auto& a : protocol_.assumptions) {
            if (labels_ && !labels_->contains(a.label))
                continue;
            add(a.formula, Rule::Assumption, {}, a.label);
        }
        fixpoint();
        for (const auto& step : protocol_.steps) {
            add(receive(step), Rule::Receipt, {}, {}, step.index);
            fixpoint();
        }
        return std::move(out_);
    }

private:
    bool has(const Formula& f) const { return out_.facts_.contains(f); }
    DerivationPtr get(const Formula& f) const { return out_.facts_.at(f); }

    bool add(const Formula& f, Rule rule, std::vector<DerivationPtr> premises, std::string label = {},
             int step = 0)
    {
        if (has(f))
            return false;
        auto d = std::make_shared<Derivation>();
        d->conclusion = f;
        d->rule = rule;
        d->assumption = std::move(label);
        d->step = step;
        for (const auto& p : premises)
            d->assumptions_used.insert(p->assumptions_used.begin(), p->assumptions_used.end());
        if (rule == Rule::Assumption)
            d->assumptions_used.insert(d->assumption);
        d->premises = std::move(premises);
        out_.facts_.emplace(f, std::move(d));
        return true;
    }

    void fixpoint()
    {
        const auto& principals = protocol_.principals;
        bool changed = true;
        while (changed) {
            changed = false;
            std::vector<Formula> snap;
            for (const auto& [f, d] : out_.facts_)
                snap.push_back(f);

            for (const auto& f : snap) {
                if (f.kind() == FormulaKind::Sees && f.body().kind() == FormulaKind::Conjunction)
                    for (const auto& item : f.body().items())
                        changed |= add(Formula::sees(f.principal(), item), Rule::SeeComponent, {get(f)});
            }
            for (const auto& f : snap) {
                if (f.kind() != FormulaKind::Sees || f.body().kind() != FormulaKind::Encrypted)
                    continue;
                for (const auto& q : principals) {
                    Formula kb = Formula::believes(f.principal(),
                                                   Formula::good_key(f.body().key(), f.principal(), q));
                    if (!has(kb))
                        continue;
                    if (auto r = see_decrypt(f, kb))
                        changed |= add(*r, Rule::SeeDecrypt, {get(f), get(kb)});
                }
            }
            for (const auto& f : snap) {
                if (f.kind() != FormulaKind::Sees || f.body().kind() != FormulaKind::Encrypted)
                    continue;
                for (const auto& q : principals) {
                    Formula kb = Formula::believes(f.principal(),
                                                   Formula::good_key(f.body().key(), f.principal(), q));
                    if (!has(kb))
                        continue;
                    if (auto r = message_meaning(f, kb))
                        changed |= add(*r, Rule::MessageMeaning, {get(f), get(kb)});
                }
            }
            for (const auto& x : composites_) {
                std::vector<Formula> parts =
                    x.kind() == FormulaKind::Conjunction ? x.items() : std::vector<Formula>{x.body()};
                for (const auto& p : principals) {
                    for (const auto& y : parts) {
                        Formula fy = Formula::believes(p, Formula::fresh(y));
                        if (!has(fy))
                            continue;
                        if (auto r = freshness(fy, x)) {
                            changed |= add(*r, Rule::Freshness, {get(fy)});
                            break;
                        }
                    }
                }
            }
            for (const auto& f : snap) {
                if (f.kind() != FormulaKind::Believes || f.body().kind() != FormulaKind::OnceSaid)
                    continue;
                Formula fr = Formula::believes(f.principal(), Formula::fresh(f.body().body()));
                if (!has(fr))
                    continue;
                if (auto r = nonce_verification(f, fr))
                    changed |= add(*r, Rule::NonceVerification, {get(f), get(fr)});
            }
            for (const auto& f : snap) {
                if (f.kind() != FormulaKind::Believes || f.body().kind() != FormulaKind::Jurisdiction)
                    continue;
                const Formula& j = f.body();
                Formula b = Formula::believes(f.principal(), Formula::believes(j.principal(), j.body()));
                if (!has(b))
                    continue;
                if (auto r = jurisdiction(f, b))
                    changed |= add(*r, Rule::Jurisdiction, {get(f), get(b)});
            }
            for (const auto& f : snap) {
                auto ctx = belief_context(f);
                if (!ctx || ctx->inner.kind() != FormulaKind::Conjunction)
                    continue;
                for (const auto& item : ctx->inner.items())
                    changed |= add(wrap(ctx->chain, item), Rule::BeliefElimination, {get(f)});
            }
            for (const auto& x : composites_) {
                if (x.kind() != FormulaKind::Conjunction)
                    continue;
                std::vector<std::vector<std::string>> chains;
                for (const auto& p : principals) {
                    chains.push_back({p});
                    for (const auto& q : principals)
                        chains.push_back({p, q});
                }
                for (const auto& chain : chains) {
                    std::vector<DerivationPtr> premises;
                    for (const auto& item : x.items()) {
                        Formula w = wrap(chain, item);
                        if (!has(w))
                            break;
                        premises.push_back(get(w));
                    }
                    if (premises.size() == x.items().size())
                        changed |= add(wrap(chain, x), Rule::BeliefIntroduction, std::move(premises));
                }
            }
        }
    }

    const IdealizedProtocol& protocol_;
    const std::set<std::string>* labels_;
    DerivedSet out_;
    std::vector<Formula> composites_;
};

DerivedSet saturate(const IdealizedProtocol& protocol) { return Saturator(protocol, nullptr).run(); }

DerivedSet saturate(const IdealizedProtocol& protocol, const std::set<std::string>& labels)
{
    return Saturator(protocol, &labels).run();
}

namespace {

std::vector<std::string> labels_in_order(const IdealizedProtocol& p)
{
    std::vector<std::string> out;
    for (const auto& a : p.assumptions)
        if (std::find(out.begin(), out.end(), a.label) == out.end())
            out.push_back(a.label);
    return out;
}

bool derives_all(const DerivedSet& d, const std::vector<Formula>& formulas)
{
    return std::all_of(formulas.begin(), formulas.end(), [&](const Formula& f) { return d.contains(f); });
}

}  // namespace

std::vector<GoalVerdict> audit_goals(const IdealizedProtocol& protocol, const DerivedSet& derived)
{
    const auto order = labels_in_order(protocol);
    std::set<std::string> unjustified, justified;
    for (const auto& a : protocol.assumptions)
        (a.unjustified ? unjustified : justified).insert(a.label);

    std::vector<GoalVerdict> out;
    for (const auto& goal : protocol.goals) {
        GoalVerdict v;
        v.name = goal.name;
        v.formulas = goal.formulas;
        v.derivable = derives_all(derived, goal.formulas);
        if (v.derivable) {
            std::set<std::string> used;
            for (const auto& f : goal.formulas) {
                auto d = derived.find(f);
                v.derivations.push_back(d);
                used.insert(d->assumptions_used.begin(), d->assumptions_used.end());
            }
            // Drop labels one at a time while the goal survives.
            for (const auto& label : order) {
                if (!used.contains(label))
                    continue;
                auto trial = used;
                trial.erase(label);
                if (derives_all(saturate(protocol, trial), goal.formulas))
                    used = std::move(trial);
            }
            for (const auto& label : order)
                if (used.contains(label))
                    v.assumptions.push_back(label);
            if (!unjustified.empty() && !derives_all(saturate(protocol, justified), goal.formulas)) {
                v.flagged = true;
                for (const auto& label : v.assumptions)
                    if (unjustified.contains(label))
                        v.unjustified.push_back(label);
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::string render_derivation(const Derivation& d)
{
    std::string out;
    std::function<void(const Derivation&, std::size_t)> walk = [&](const Derivation& n, std::size_t depth) {
        out.append(depth * 2, ' ');
        out += n.conclusion.text();
        out += "  [";
        out += to_string(n.rule);
        if (n.rule == Rule::Assumption)
            out += " " + n.assumption;
        else if (n.rule == Rule::Receipt)
            out += " of step " + std::to_string(n.step);
        out += "]\n";
        for (const auto& p : n.premises)
            walk(*p, depth + 1);
    };
    walk(d, 0);
    return out;
}

}  // namespace protocheck::ban
