#include "dy_oracle.hpp"

#include <algorithm>
#include <stdexcept>

namespace oracle {

namespace {

struct Node {
    std::string op;
    std::string atom;
    std::vector<std::string> kids;
};

// Splits "(op X Y)" into its op and the two top-level child strings.
Node parse(const std::string& s)
{
    if (s.empty())
        throw std::invalid_argument("empty encoding");
    if (s.front() != '(')
        return Node{"atom", s, {}};
    std::size_t space = s.find(' ');
    Node n{s.substr(1, space - 1), "", {}};
    std::size_t i = space + 1;
    while (i < s.size() - 1) {
        std::size_t start = i;
        int nest = 0;
        for (; i < s.size() - 1; ++i) {
            if (s[i] == '(')
                ++nest;
            else if (s[i] == ')')
                --nest;
            else if (s[i] == ' ' && nest == 0)
                break;
        }
        n.kids.push_back(s.substr(start, i - start));
        ++i;
    }
    if (n.kids.size() != 2)
        throw std::invalid_argument("bad encoding: " + s);
    return n;
}

std::string inverse(const std::string& key)
{
    if (key.starts_with("pk:"))
        return "sk:" + key.substr(3);
    if (key.starts_with("sk:"))
        return "pk:" + key.substr(3);
    return key;
}

void subterms(const std::string& s, std::set<std::string>& out)
{
    if (!out.insert(s).second)
        return;
    Node n = parse(s);
    for (const auto& k : n.kids)
        subterms(k, out);
}

}  // namespace

std::string encode(const protocheck::Term& t)
{
    using protocheck::TermKind;
    switch (t.kind()) {
    case TermKind::Agent:
        return "a:" + t.name();
    case TermKind::Nonce:
        return "n:" + t.name();
    case TermKind::SymKey:
        return "k:" + t.name();
    case TermKind::PubKey:
        return "pk:" + t.owner().name();
    case TermKind::PrivKey:
        return "sk:" + t.owner().name();
    case TermKind::Pair:
        return "(pair " + encode(t.left()) + " " + encode(t.right()) + ")";
    case TermKind::AsymEnc:
        return "(aenc " + encode(t.key()) + " " + encode(t.payload()) + ")";
    case TermKind::SymEnc:
        return "(senc " + encode(t.key()) + " " + encode(t.payload()) + ")";
    case TermKind::Variable:
        break;
    }
    throw std::invalid_argument("oracle terms are ground");
}

Knowledge close(const Knowledge& k)
{
    Knowledge cur = k;
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<std::string> fresh;
        for (const auto& x : cur) {
            Node n = parse(x);
            if (n.op == "pair") {
                fresh.push_back(n.kids[0]);
                fresh.push_back(n.kids[1]);
            }
            for (const auto& y : cur) {
                if ((n.op == "aenc" || n.op == "senc") && y == inverse(n.kids[0]))
                    fresh.push_back(n.kids[1]);
            }
        }
        for (auto& f : fresh)
            changed |= cur.insert(std::move(f)).second;
    }
    return cur;
}

bool synthesizable(const Knowledge& closed, const std::string& target)
{
    std::set<std::string> subs;
    subterms(target, subs);
    std::vector<std::string> order(subs.begin(), subs.end());
    // A child's encoding is a proper substring of its parent's, so shorter first is bottom-up.
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    std::set<std::string> ok;
    for (const auto& s : order) {
        Node n = parse(s);
        bool built = closed.contains(s) ||
                     (!n.kids.empty() && ok.contains(n.kids[0]) && ok.contains(n.kids[1]));
        if (built)
            ok.insert(s);
    }
    return ok.contains(target);
}

std::set<std::string> parts(const std::string& t)
{
    std::set<std::string> out{t};
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<std::string> add;
        for (const auto& x : out) {
            Node n = parse(x);
            if (n.op == "pair") {
                add.push_back(n.kids[0]);
                add.push_back(n.kids[1]);
            } else if (n.op == "aenc" || n.op == "senc") {
                add.push_back(n.kids[1]);
            }
        }
        for (auto& a : add)
            changed |= out.insert(std::move(a)).second;
    }
    return out;
}

}  // namespace oracle
