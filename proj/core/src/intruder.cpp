#include "protocheck/intruder.hpp"

#include <vector>

namespace protocheck {

KnowledgeSet::KnowledgeSet(std::initializer_list<Term> terms)
{
    for (const auto& t : terms)
        terms_.insert(normalize(t));
}

KnowledgeSet::KnowledgeSet(const TermSet& terms)
{
    for (const auto& t : terms)
        terms_.insert(normalize(t));
}

void KnowledgeSet::insert(const Term& t)
{
    if (terms_.insert(normalize(t)).second)
        closed_ = false;
}

KnowledgeSet analz_close(KnowledgeSet k)
{
    if (k.closed_)
        return k;
    // One pass applies each rule to a snapshot; passes repeat until nothing
    // new appears. Every added term is a proper subterm of a member, so the
    // number of passes is bounded by the subterm count.
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<Term> snapshot(k.terms_.begin(), k.terms_.end());
        for (const Term& t : snapshot) {
            switch (t.kind()) {
            case TermKind::Pair:
                changed |= k.terms_.insert(t.left()).second;
                changed |= k.terms_.insert(t.right()).second;
                break;
            case TermKind::AsymEnc:
            case TermKind::SymEnc:
                if (auto inv = inverse_key(t.key()); inv && k.terms_.contains(*inv))
                    changed |= k.terms_.insert(t.payload()).second;
                break;
            default:
                break;
            }
        }
    }
    k.closed_ = true;
    return k;
}

bool can_synthesize(const KnowledgeSet& k, const Term& t)
{
    if (k.contains(t))
        return true;
    switch (t.kind()) {
    case TermKind::Pair:
        return can_synthesize(k, t.left()) && can_synthesize(k, t.right());
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        return can_synthesize(k, t.key()) && can_synthesize(k, t.payload());
    default:
        return false;
    }
}

KnowledgeSet observe(KnowledgeSet k, const Term& t)
{
    k.insert(t);
    return analz_close(std::move(k));
}

TermSet knowledge_parts(const KnowledgeSet& k)
{
    TermSet out;
    for (const auto& t : k.terms()) {
        auto p = parts(t);
        out.insert(p.begin(), p.end());
    }
    return out;
}

}  // namespace protocheck
