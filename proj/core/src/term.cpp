#include "protocheck/term.hpp"

#include <algorithm>
#include <array>

namespace protocheck {

std::string_view to_string(Sort sort)
{
    switch (sort) {
    case Sort::Agent: return "Agent";
    case Sort::Nonce: return "Nonce";
    case Sort::PublicKey: return "PublicKey";
    case Sort::SymmetricKey: return "SymmetricKey";
    }
    return "?";
}

std::optional<Sort> sort_from_string(std::string_view text)
{
    static constexpr std::array<Sort, 4> all{Sort::Agent, Sort::Nonce, Sort::PublicKey,
                                             Sort::SymmetricKey};
    for (Sort s : all)
        if (to_string(s) == text)
            return s;
    return std::nullopt;
}

struct Term::Node {
    TermKind kind;
    Sort sort = Sort::Agent;
    std::string name;
    std::optional<Term> a;  // owner, left or key
    std::optional<Term> b;  // right or payload
    std::size_t hash = 0;
    std::size_t size = 1;
    std::size_t depth = 1;
    bool ground = true;
};

namespace {

std::size_t mix(std::size_t seed, std::size_t v)
{
    return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

}  // namespace

Term Term::agent(std::string name)
{
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Agent;
    n->name = std::move(name);
    n->hash = mix(std::hash<std::string>{}(n->name), 1);
    return Term(std::move(n));
}

Term Term::nonce(std::string name)
{
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Nonce;
    n->name = std::move(name);
    n->hash = mix(std::hash<std::string>{}(n->name), 2);
    return Term(std::move(n));
}

Term Term::sym_key(std::string name)
{
    auto n = std::make_shared<Node>();
    n->kind = TermKind::SymKey;
    n->name = std::move(name);
    n->hash = mix(std::hash<std::string>{}(n->name), 3);
    return Term(std::move(n));
}

Term Term::variable(std::string name, Sort sort)
{
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Variable;
    n->sort = sort;
    n->name = std::move(name);
    n->ground = false;
    n->hash = mix(mix(std::hash<std::string>{}(n->name), 9), static_cast<std::size_t>(sort));
    return Term(std::move(n));
}

namespace {

void check_owner(const Term& owner)
{
    if (owner.kind() == TermKind::Agent)
        return;
    if (owner.kind() == TermKind::Variable && owner.variable_sort() == Sort::Agent)
        return;
    throw std::invalid_argument("key owner must be an agent");
}

}  // namespace

Term Term::pub_key(Term owner)
{
    check_owner(owner);
    auto n = std::make_shared<Node>();
    n->kind = TermKind::PubKey;
    n->ground = owner.is_ground();
    n->hash = mix(owner.hash(), 4);
    n->a = std::move(owner);
    return Term(std::move(n));
}

Term Term::priv_key(Term owner)
{
    check_owner(owner);
    auto n = std::make_shared<Node>();
    n->kind = TermKind::PrivKey;
    n->ground = owner.is_ground();
    n->hash = mix(owner.hash(), 5);
    n->a = std::move(owner);
    return Term(std::move(n));
}

Term Term::pair(Term left, Term right)
{
    auto n = std::make_shared<Node>();
    n->kind = TermKind::Pair;
    n->ground = left.is_ground() && right.is_ground();
    n->size = 1 + left.size() + right.size();
    n->depth = 1 + std::max(left.depth(), right.depth());
    n->hash = mix(mix(left.hash(), right.hash()), 6);
    n->a = std::move(left);
    n->b = std::move(right);
    return Term(std::move(n));
}

Term Term::aenc(Term key, Term payload)
{
    const bool key_ok = key.kind() == TermKind::PubKey || key.kind() == TermKind::PrivKey ||
                        (key.kind() == TermKind::Variable && key.variable_sort() == Sort::PublicKey);
    if (!key_ok)
        throw std::invalid_argument("asymmetric encryption requires a public or private key");
    auto n = std::make_shared<Node>();
    n->kind = TermKind::AsymEnc;
    n->ground = key.is_ground() && payload.is_ground();
    n->size = 1 + key.size() + payload.size();
    n->depth = 1 + std::max(key.depth(), payload.depth());
    n->hash = mix(mix(key.hash(), payload.hash()), 7);
    n->a = std::move(key);
    n->b = std::move(payload);
    return Term(std::move(n));
}

Term Term::senc(Term key, Term payload)
{
    const bool key_ok = key.kind() == TermKind::SymKey ||
                        (key.kind() == TermKind::Variable && key.variable_sort() == Sort::SymmetricKey);
    if (!key_ok)
        throw std::invalid_argument("symmetric encryption requires a symmetric key");
    auto n = std::make_shared<Node>();
    n->kind = TermKind::SymEnc;
    n->ground = key.is_ground() && payload.is_ground();
    n->size = 1 + key.size() + payload.size();
    n->depth = 1 + std::max(key.depth(), payload.depth());
    n->hash = mix(mix(key.hash(), payload.hash()), 8);
    n->a = std::move(key);
    n->b = std::move(payload);
    return Term(std::move(n));
}

Term Term::encrypt(Term key, Term payload)
{
    switch (key.kind()) {
    case TermKind::PubKey:
    case TermKind::PrivKey:
        return aenc(std::move(key), std::move(payload));
    case TermKind::SymKey:
        return senc(std::move(key), std::move(payload));
    case TermKind::Variable:
        if (key.variable_sort() == Sort::PublicKey)
            return aenc(std::move(key), std::move(payload));
        if (key.variable_sort() == Sort::SymmetricKey)
            return senc(std::move(key), std::move(payload));
        break;
    default:
        break;
    }
    throw std::invalid_argument("encryption key must be a key term");
}

Term Term::tuple(const std::vector<Term>& items)
{
    if (items.empty())
        throw std::invalid_argument("empty tuple");
    Term acc = items.back();
    for (auto it = items.rbegin() + 1; it != items.rend(); ++it)
        acc = pair(*it, acc);
    return normalize(acc);
}

TermKind Term::kind() const noexcept { return node_->kind; }

bool Term::is_atom() const noexcept
{
    switch (node_->kind) {
    case TermKind::Pair:
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        return false;
    default:
        return true;
    }
}

bool Term::is_key() const noexcept
{
    switch (node_->kind) {
    case TermKind::PubKey:
    case TermKind::PrivKey:
    case TermKind::SymKey:
        return true;
    case TermKind::Variable:
        return node_->sort == Sort::PublicKey || node_->sort == Sort::SymmetricKey;
    default:
        return false;
    }
}

bool Term::is_encryption() const noexcept
{
    return node_->kind == TermKind::AsymEnc || node_->kind == TermKind::SymEnc;
}

bool Term::is_ground() const noexcept { return node_->ground; }

const std::string& Term::name() const
{
    switch (node_->kind) {
    case TermKind::Agent:
    case TermKind::Nonce:
    case TermKind::SymKey:
    case TermKind::Variable:
        return node_->name;
    default:
        throw std::logic_error("term has no name");
    }
}

Sort Term::variable_sort() const
{
    if (node_->kind != TermKind::Variable)
        throw std::logic_error("not a variable");
    return node_->sort;
}

const Term& Term::owner() const
{
    if (node_->kind != TermKind::PubKey && node_->kind != TermKind::PrivKey)
        throw std::logic_error("term has no owner");
    return *node_->a;
}

const Term& Term::left() const
{
    if (node_->kind != TermKind::Pair)
        throw std::logic_error("not a pair");
    return *node_->a;
}

const Term& Term::right() const
{
    if (node_->kind != TermKind::Pair)
        throw std::logic_error("not a pair");
    return *node_->b;
}

const Term& Term::key() const
{
    if (!is_encryption())
        throw std::logic_error("not an encryption");
    return *node_->a;
}

const Term& Term::payload() const
{
    if (!is_encryption())
        throw std::logic_error("not an encryption");
    return *node_->b;
}

std::size_t Term::hash() const noexcept { return node_->hash; }
std::size_t Term::size() const noexcept { return node_->size; }
std::size_t Term::depth() const noexcept { return node_->depth; }

bool operator==(const Term& a, const Term& b) noexcept
{
    if (a.node_ == b.node_)
        return true;
    if (a.node_->hash != b.node_->hash || a.node_->kind != b.node_->kind)
        return false;
    return (a <=> b) == std::strong_ordering::equal;
}

std::strong_ordering operator<=>(const Term& a, const Term& b) noexcept
{
    if (a.node_ == b.node_)
        return std::strong_ordering::equal;
    const auto& x = *a.node_;
    const auto& y = *b.node_;
    if (auto c = x.kind <=> y.kind; c != 0)
        return c;
    switch (x.kind) {
    case TermKind::Variable:
        if (auto c = x.sort <=> y.sort; c != 0)
            return c;
        [[fallthrough]];
    case TermKind::Agent:
    case TermKind::Nonce:
    case TermKind::SymKey:
        return x.name.compare(y.name) <=> 0;
    case TermKind::PubKey:
    case TermKind::PrivKey:
        return *x.a <=> *y.a;
    default:
        if (auto c = *x.a <=> *y.a; c != 0)
            return c;
        return *x.b <=> *y.b;
    }
}

Term normalize(const Term& t)
{
    switch (t.kind()) {
    case TermKind::Pair: {
        // Flatten the left spine, then rebuild right-nested.
        std::vector<Term> items;
        std::vector<Term> stack{t};
        while (!stack.empty()) {
            Term cur = stack.back();
            stack.pop_back();
            if (cur.kind() == TermKind::Pair) {
                stack.push_back(cur.right());
                stack.push_back(cur.left());
            } else {
                items.push_back(normalize(cur));
            }
        }
        Term acc = items.back();
        for (auto it = items.rbegin() + 1; it != items.rend(); ++it)
            acc = Term::pair(*it, acc);
        return acc;
    }
    case TermKind::AsymEnc:
        return Term::aenc(t.key(), normalize(t.payload()));
    case TermKind::SymEnc:
        return Term::senc(t.key(), normalize(t.payload()));
    default:
        return t;
    }
}

std::optional<Term> inverse_key(const Term& k)
{
    switch (k.kind()) {
    case TermKind::PubKey: return Term::priv_key(k.owner());
    case TermKind::PrivKey: return Term::pub_key(k.owner());
    case TermKind::SymKey: return k;
    case TermKind::Variable:
        if (k.variable_sort() == Sort::SymmetricKey)
            return k;
        return std::nullopt;
    default: return std::nullopt;
    }
}

Term dual(const Term& k)
{
    if (auto inv = inverse_key(k))
        return *inv;
    throw std::invalid_argument("dual: not a key term");
}

bool subterm(const Term& m, const Term& t)
{
    if (m == t)
        return true;
    if (m.size() >= t.size())
        return false;
    switch (t.kind()) {
    case TermKind::Pair:
        return subterm(m, t.left()) || subterm(m, t.right());
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        return subterm(m, t.payload());
    default:
        return false;
    }
}

namespace {

void collect_parts(const Term& t, TermSet& out)
{
    if (!out.insert(t).second)
        return;
    switch (t.kind()) {
    case TermKind::Pair:
        collect_parts(t.left(), out);
        collect_parts(t.right(), out);
        break;
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        collect_parts(t.payload(), out);
        break;
    default:
        break;
    }
}

void collect_syntactic(const Term& t, TermSet& out)
{
    if (!out.insert(t).second)
        return;
    switch (t.kind()) {
    case TermKind::Pair:
        collect_syntactic(t.left(), out);
        collect_syntactic(t.right(), out);
        break;
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        collect_syntactic(t.key(), out);
        collect_syntactic(t.payload(), out);
        break;
    case TermKind::PubKey:
    case TermKind::PrivKey:
        collect_syntactic(t.owner(), out);
        break;
    default:
        break;
    }
}

void collect_atoms(const Term& t, std::vector<Term>& out)
{
    switch (t.kind()) {
    case TermKind::Pair:
        collect_atoms(t.left(), out);
        collect_atoms(t.right(), out);
        break;
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        collect_atoms(t.key(), out);
        collect_atoms(t.payload(), out);
        break;
    default:
        out.push_back(t);
        break;
    }
}

}  // namespace

TermSet parts(const Term& t)
{
    TermSet out;
    collect_parts(t, out);
    return out;
}

TermSet syntactic_subterms(const Term& t)
{
    TermSet out;
    collect_syntactic(t, out);
    return out;
}

std::vector<Term> atoms(const Term& t)
{
    std::vector<Term> out;
    collect_atoms(t, out);
    return out;
}

Term substitute(const Term& t, const std::function<std::optional<Term>(const Term& var)>& lookup)
{
    if (t.is_ground())
        return t;
    switch (t.kind()) {
    case TermKind::Variable:
        if (auto v = lookup(t))
            return *v;
        return t;
    case TermKind::PubKey: return Term::pub_key(substitute(t.owner(), lookup));
    case TermKind::PrivKey: return Term::priv_key(substitute(t.owner(), lookup));
    case TermKind::Pair: return Term::pair(substitute(t.left(), lookup), substitute(t.right(), lookup));
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        return Term::encrypt(substitute(t.key(), lookup), substitute(t.payload(), lookup));
    default:
        return t;
    }
}

}  // namespace protocheck
