#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace protocheck {

/// Sorts available to free variables of a protocol description.
enum class Sort : std::uint8_t { Agent, Nonce, PublicKey, SymmetricKey };

std::string_view to_string(Sort sort);
std::optional<Sort> sort_from_string(std::string_view text);

enum class TermKind : std::uint8_t {
    Agent,
    Nonce,
    SymKey,
    PubKey,
    PrivKey,
    Pair,
    AsymEnc,
    SymEnc,
    Variable,
};

/// Immutable message term.
///
/// Terms are reference-counted DAG nodes with a cached structural hash, so
/// copies are cheap and values can be shared freely between threads.
/// `Variable` only occurs in protocol patterns; ground terms never contain it.
class Term {
public:
    static Term agent(std::string name);
    static Term nonce(std::string name);
    static Term sym_key(std::string name);
    /// `owner` must be an agent or a variable of sort Agent.
    static Term pub_key(Term owner);
    static Term priv_key(Term owner);
    /// Raw pair; use `tuple` or `normalize` for the canonical right-associated form.
    static Term pair(Term left, Term right);
    static Term aenc(Term key, Term payload);
    static Term senc(Term key, Term payload);
    /// Picks asymmetric or symmetric encryption from the key's kind.
    static Term encrypt(Term key, Term payload);
    static Term variable(std::string name, Sort sort);

    /// Right-nested pairing of one or more terms.
    static Term tuple(const std::vector<Term>& items);

    TermKind kind() const noexcept;
    bool is_atom() const noexcept;
    bool is_key() const noexcept;
    bool is_encryption() const noexcept;
    bool is_ground() const noexcept;

    /// Identifier of Agent/Nonce/SymKey/Variable atoms.
    const std::string& name() const;
    Sort variable_sort() const;
    /// Owner of a PubKey/PrivKey.
    const Term& owner() const;
    const Term& left() const;
    const Term& right() const;
    const Term& key() const;
    const Term& payload() const;

    std::size_t hash() const noexcept;
    std::size_t size() const noexcept;
    std::size_t depth() const noexcept;

    friend bool operator==(const Term& a, const Term& b) noexcept;
    friend std::strong_ordering operator<=>(const Term& a, const Term& b) noexcept;

private:
    struct Node;
    explicit Term(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

struct TermHash {
    std::size_t operator()(const Term& t) const noexcept { return t.hash(); }
};

using TermSet = std::set<Term>;

/// Canonical right-associated form. Idempotent.
Term normalize(const Term& t);

/// Inverse key: PK(a) <-> SK(a), symmetric keys map to themselves.
/// Throws std::invalid_argument for non-key terms.
Term dual(const Term& k);

/// Like `dual`, but returns nullopt for terms without a known inverse
/// (non-keys and key-sorted variables).
std::optional<Term> inverse_key(const Term& k);

/// Strand-space subterm relation: `m` occurs in `t`, where an encryption key
/// only counts if it occurs inside the payload.
bool subterm(const Term& m, const Term& t);

/// All `m` with `subterm(m, t)`.
TermSet parts(const Term& t);

/// Every syntactic subterm, keys and key owners included.
TermSet syntactic_subterms(const Term& t);

/// Atoms (agents, nonces, keys, variables) occurring anywhere in `t`, with multiplicity.
std::vector<Term> atoms(const Term& t);

/// Replaces variables by their bindings; unbound variables are kept.
Term substitute(const Term& t, const std::function<std::optional<Term>(const Term& var)>& lookup);

}  // namespace protocheck

template <>
struct std::hash<protocheck::Term> {
    std::size_t operator()(const protocheck::Term& t) const noexcept { return t.hash(); }
};
