#pragma once

#include <initializer_list>

#include "protocheck/term.hpp"

namespace protocheck {

/// Dolev-Yao knowledge: a set of normalized terms, optionally closed under
/// analysis (pair splitting and decryption with the inverse key).
class KnowledgeSet {
public:
    KnowledgeSet() = default;
    KnowledgeSet(std::initializer_list<Term> terms);
    explicit KnowledgeSet(const TermSet& terms);

    const TermSet& terms() const noexcept { return terms_; }
    bool closed() const noexcept { return closed_; }
    bool contains(const Term& t) const { return terms_.contains(t); }
    std::size_t size() const noexcept { return terms_.size(); }

    /// Adds without re-closing; clears the closed flag when the set grows.
    void insert(const Term& t);

    friend bool operator==(const KnowledgeSet& a, const KnowledgeSet& b)
    {
        return a.terms_ == b.terms_;
    }

private:
    friend KnowledgeSet analz_close(KnowledgeSet k);
    TermSet terms_;
    bool closed_ = false;
};

/// Least fixed point of pair splitting and key-guarded decryption.
KnowledgeSet analz_close(KnowledgeSet k);

/// Structural synthesis over a closed set: members, pairs of synthesizable
/// terms, and encryptions whose key and payload are synthesizable.
bool can_synthesize(const KnowledgeSet& k, const Term& t);

/// Adds `t` and re-closes.
KnowledgeSet observe(KnowledgeSet k, const Term& t);

/// Every term occurring in `parts` of some member of `k`.
TermSet knowledge_parts(const KnowledgeSet& k);

}  // namespace protocheck
