#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace protocheck::ban {

enum class FormulaKind {
    Atom,
    Believes,
    OnceSaid,
    Sees,
    Fresh,
    Jurisdiction,
    GoodKey,
    Encrypted,
    Conjunction,
};

/// Belief-logic formula. Conjunctions are flattened and a one-item
/// conjunction is its item; GoodKey parties are stored in sorted order.
/// Equality and ordering follow the canonical text.
class Formula {
public:
    static Formula atom(std::string name);
    static Formula believes(std::string principal, Formula body);
    static Formula once_said(std::string principal, Formula body);
    static Formula sees(std::string principal, Formula body);
    static Formula fresh(Formula body);
    static Formula jurisdiction(std::string principal, Formula body);
    static Formula good_key(std::string key, std::string p, std::string q);
    static Formula encrypted(Formula body, std::string key);
    static Formula conjunction(std::vector<Formula> items);

    FormulaKind kind() const noexcept;
    /// Principal of Believes/OnceSaid/Sees/Jurisdiction, first party of GoodKey, name of Atom.
    const std::string& principal() const;
    /// Second party of GoodKey.
    const std::string& peer() const;
    /// Key of GoodKey/Encrypted.
    const std::string& key() const;
    /// Body of Believes/OnceSaid/Sees/Fresh/Jurisdiction/Encrypted.
    const Formula& body() const;
    /// Items of a conjunction; any other formula is its own single item.
    std::vector<Formula> items() const;
    /// `P |= X`, `P |~ X`, `P <| X`, `P |=> X`, `#(X)`, `P<-K->Q`, `{X, Y}K`, `(X, Y)`.
    const std::string& text() const noexcept;

    friend bool operator==(const Formula& a, const Formula& b) noexcept { return a.text() == b.text(); }
    friend std::strong_ordering operator<=>(const Formula& a, const Formula& b) noexcept
    {
        return a.text() <=> b.text();
    }

private:
    struct Node;
    static Formula unary(FormulaKind kind, std::string principal, Formula body);
    explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

/// Every subformula of `f`, including `f`.
std::set<Formula> subformulas(const Formula& f);

struct Assumption {
    std::string label;
    Formula formula = Formula::atom("?");
    bool unjustified = false;
};

struct IdealizedStep {
    int index = 0;
    std::string sender;
    std::string receiver;
    Formula content = Formula::atom("?");
};

struct BeliefGoal {
    std::string name;
    std::vector<Formula> formulas;
};

struct IdealizedProtocol {
    std::vector<std::string> principals;
    std::vector<Assumption> assumptions;
    std::vector<IdealizedStep> steps;
    std::vector<BeliefGoal> goals;
};

/// Parses a formula in the ASCII surface syntax. Throws SyntaxError.
Formula parse_formula(std::string_view text);

/// Parses an idealized-protocol file:
///   principals: A, B, S
///   assume 1: A |= A<-Kas->S; B |= B<-Kbs->S
///   assume 8 unjustified: B |= #(A<-Kab->B)
///   step 3: A -> B : {A<-Kab->B}Kbs
///   goal R2: B |= A<-Kab->B
/// Lines starting with `--` are comments. Throws SyntaxError.
IdealizedProtocol parse_idealized(std::string_view source);

enum class Rule {
    Assumption,
    Receipt,
    SeeComponent,
    SeeDecrypt,
    MessageMeaning,
    Freshness,
    NonceVerification,
    Jurisdiction,
    BeliefElimination,
    BeliefIntroduction,
};

std::string_view to_string(Rule rule);

struct Derivation {
    Formula conclusion = Formula::atom("?");
    Rule rule = Rule::Assumption;
    std::vector<std::shared_ptr<const Derivation>> premises;
    /// Assumption label for Rule::Assumption leaves.
    std::string assumption;
    /// Step index for Rule::Receipt leaves.
    int step = 0;
    /// Labels of all assumption leaves below this node.
    std::set<std::string> assumptions_used;
};

using DerivationPtr = std::shared_ptr<const Derivation>;

/// The receiver sees the step's content.
Formula receive(const IdealizedStep& step);

/// P <| {X}K and P |= P<-K->Q give P |= Q |~ X.
std::optional<Formula> message_meaning(const Formula& sees, const Formula& key_belief);
/// P |= Q |~ X and P |= #(X) give P |= Q |= X.
std::optional<Formula> nonce_verification(const Formula& said, const Formula& fresh);
/// P |= Q |=> X and P |= Q |= X give P |= X.
std::optional<Formula> jurisdiction(const Formula& juris, const Formula& belief);
/// P <| {X}K and P |= P<-K->Q give P <| X.
std::optional<Formula> see_decrypt(const Formula& sees, const Formula& key_belief);
/// P |= #(Y) gives P |= #(X) when Y is an item of conjunction X or the body of encryption X.
std::optional<Formula> freshness(const Formula& fresh_component, const Formula& enclosing);

/// True iff applying the node's rule to its premises' conclusions yields its conclusion.
bool replays(const Derivation& d);

class DerivedSet {
public:
    bool contains(const Formula& f) const { return facts_.contains(f); }
    DerivationPtr find(const Formula& f) const;
    std::size_t size() const noexcept { return facts_.size(); }
    const std::map<Formula, DerivationPtr>& facts() const noexcept { return facts_; }
    /// Subformula closure the saturation was restricted to.
    const std::set<Formula>& closure() const noexcept { return closure_; }

private:
    friend class Saturator;
    std::map<Formula, DerivationPtr> facts_;
    std::set<Formula> closure_;
};

/// Forward chaining over all assumptions and steps.
DerivedSet saturate(const IdealizedProtocol& protocol);

/// Same, using only assumptions whose label is in `labels`. The closure is
/// still taken over every assumption so that results are comparable.
DerivedSet saturate(const IdealizedProtocol& protocol, const std::set<std::string>& labels);

struct GoalVerdict {
    std::string name;
    std::vector<Formula> formulas;
    bool derivable = false;
    /// Inclusion-minimal assumption labels sufficient for the goal.
    std::vector<std::string> assumptions;
    /// Set when the goal is lost once the unjustified assumptions are dropped.
    bool flagged = false;
    /// Unjustified labels the goal depends on.
    std::vector<std::string> unjustified;
    /// One derivation per goal formula, when derivable.
    std::vector<DerivationPtr> derivations;
};

std::vector<GoalVerdict> audit_goals(const IdealizedProtocol& protocol, const DerivedSet& derived);

/// Indented tree, one `formula  [rule]` line per node.
std::string render_derivation(const Derivation& d);

}  // namespace protocheck::ban
