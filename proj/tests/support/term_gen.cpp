#include "term_gen.hpp"

#include <algorithm>
#include <set>

namespace testgen {

using protocheck::normalize;

std::vector<Term> six_atoms()
{
    Term a = Term::agent("A");
    return {a,
            Term::agent("B"),
            Term::nonce("na"),
            Term::sym_key("kab"),
            Term::pub_key(a),
            Term::priv_key(a)};
}

std::vector<Term> four_atoms()
{
    Term a = Term::agent("A");
    return {a, Term::nonce("na"), Term::sym_key("kab"), Term::pub_key(a)};
}

std::vector<Term> enumerate_terms(const std::vector<Term>& atoms, std::size_t depth)
{
    std::vector<Term> keys;
    for (const auto& a : atoms)
        if (a.is_key())
            keys.push_back(a);

    std::set<Term> all(atoms.begin(), atoms.end());
    std::vector<Term> previous(atoms.begin(), atoms.end());
    for (std::size_t d = 2; d <= depth; ++d) {
        std::set<Term> next = all;
        for (const auto& x : previous) {
            for (const auto& y : previous)
                next.insert(normalize(Term::pair(x, y)));
            for (const auto& k : keys)
                next.insert(Term::encrypt(k, x));
        }
        all.clear();
        for (const auto& t : next)
            if (t.depth() <= depth)
                all.insert(t);
        previous.assign(all.begin(), all.end());
    }
    return {all.begin(), all.end()};
}

namespace {

Term random_impl(std::mt19937_64& rng, const std::vector<Term>& atoms, std::size_t depth,
                 bool raw)
{
    std::uniform_int_distribution<int> shape(0, 3);
    if (depth <= 1 || shape(rng) == 0) {
        std::uniform_int_distribution<std::size_t> pick(0, atoms.size() - 1);
        return atoms[pick(rng)];
    }
    if (shape(rng) < 2) {
        Term l = random_impl(rng, atoms, depth - 1, raw);
        Term r = random_impl(rng, atoms, depth - 1, raw);
        return raw ? Term::pair(l, r) : normalize(Term::pair(l, r));
    }
    std::vector<Term> keys;
    for (const auto& a : atoms)
        if (a.is_key())
            keys.push_back(a);
    std::uniform_int_distribution<std::size_t> pick(0, keys.size() - 1);
    return Term::encrypt(keys[pick(rng)], random_impl(rng, atoms, depth - 1, raw));
}

}  // namespace

Term random_term(std::mt19937_64& rng, const std::vector<Term>& atoms, std::size_t depth)
{
    return random_impl(rng, atoms, depth, false);
}

Term random_raw_term(std::mt19937_64& rng, const std::vector<Term>& atoms, std::size_t depth)
{
    return random_impl(rng, atoms, depth, true);
}

}  // namespace testgen
