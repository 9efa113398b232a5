#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "protocheck/model_checker.hpp"
#include "protocheck/protocol.hpp"
#include "protocheck/term.hpp"

namespace protocheck {

enum class Sign { Plus, Minus };

struct SignedTerm {
    Sign sign = Sign::Plus;
    Term term = Term::agent("?");
    friend bool operator==(const SignedTerm&, const SignedTerm&) = default;
};

enum class PenetratorType { Text, Flush, Tee, Concat, Separate, KeyEmit, Decrypt, Encrypt };

std::string_view to_string(PenetratorType type);

struct Strand {
    /// Set for penetrator strands; regular strands leave it empty.
    std::optional<PenetratorType> penetrator;
    /// Role name of a regular strand.
    std::string role;
    /// "Init" for the first role, "Resp" for the second, the role name otherwise.
    std::string label;
    /// Values of the free variables in declaration order. Unbound ones stay variables.
    std::vector<Term> params;
    /// Model-checker session the strand came from, -1 for penetrator strands.
    int session = -1;
    bool complete = false;
    std::vector<SignedTerm> trace;

    bool regular() const noexcept { return !penetrator.has_value(); }
    /// `Init[A, B, Na, Nb]` for regular strands, the type name otherwise.
    std::string name() const;
};

/// Node `index` (0-based) of strand `strand`.
struct Node {
    std::size_t strand = 0;
    std::size_t index = 0;
    friend auto operator<=>(const Node&, const Node&) = default;
};

struct Edge {
    Node from;
    Node to;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct Bundle {
    std::vector<Strand> strands;
    /// Communication edges, from a positive to a negative node.
    std::vector<Edge> comm;
    /// Succession edges between consecutive nodes of a strand.
    std::vector<Edge> succ;
    /// Keys the penetrator holds initially.
    TermSet penetrator_keys;
    std::string initiator_role;
    std::string responder_role;
    /// Free-variable names, in the order used by Strand::params.
    std::vector<std::string> parameters;
    /// Variables the responder generates freshly.
    std::vector<std::string> responder_fresh;

    const SignedTerm& at(Node n) const { return strands.at(n.strand).trace.at(n.index); }
    std::vector<Node> nodes() const;
};

/// Appends ⇒ edges for every strand, replacing existing ones.
void link_strands(Bundle& b);

class LiftError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Turns a model-checker trace into a bundle: one regular strand per session
/// and a cheapest set of penetrator strands producing each delivered message.
/// Throws LiftError when a delivery cannot be derived.
Bundle lift(const std::vector<Event>& trace, const CheckedSpec& spec);

/// Empty when `b` is a bundle; otherwise one description per violation.
std::vector<std::string> check_wellformed(const Bundle& b);

bool originates(const Bundle& b, const Term& t, Node n);
bool uniquely_originates(const Bundle& b, const Term& t);

/// Minimal elements of { n : pred(n) } under the transitive closure of → ∪ ⇒.
std::vector<Node> minimal_nodes(const Bundle& b, const std::function<bool(Node)>& pred);

/// True iff `a` strictly precedes `c` in the bundle order.
bool precedes(const Bundle& b, Node a, Node c);

/// `(s,i)` with 1-based strand and node numbers.
std::string to_string(Node n);

struct Holds {
    std::size_t initiator;
};

/// Initiator strands that agree with the responder on everything but the
/// responder's identity.
struct Fails {
    std::vector<std::size_t> witnesses;
};

using GuaranteeResult = std::variant<Holds, Fails>;

class HypothesesNotMet : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Looks for an initiator strand matching the completed responder strand
/// `resp`. Throws HypothesesNotMet when the initiator's private key is in the
/// penetrator's key set or a responder nonce does not originate uniquely, and
/// std::invalid_argument when `resp` is not a completed responder strand.
GuaranteeResult responder_guarantee(const Bundle& b, std::size_t resp);

/// Line-based export: strand blocks of `± term` lines, then `(s,i) -> (t,j)` edges (1-based).
std::string export_bundle(const Bundle& b);

}  // namespace protocheck
