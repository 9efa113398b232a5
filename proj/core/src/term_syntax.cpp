#include "protocheck/term_syntax.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace protocheck {

SyntaxError::SyntaxError(const std::string& message, std::size_t line, std::size_t column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      detail_(message),
      line_(line),
      column_(column)
{
}

namespace {

void print(const Term& t, std::string& out)
{
    switch (t.kind()) {
    case TermKind::Agent:
    case TermKind::Nonce:
    case TermKind::SymKey:
    case TermKind::Variable:
        out += t.name();
        break;
    case TermKind::PubKey:
        out += "PK(";
        print(t.owner(), out);
        out += ')';
        break;
    case TermKind::PrivKey:
        out += "SK(";
        print(t.owner(), out);
        out += ')';
        break;
    case TermKind::Pair:
        if (t.left().kind() == TermKind::Pair) {
            out += '(';
            print(t.left(), out);
            out += ')';
        } else {
            print(t.left(), out);
        }
        out += ", ";
        print(t.right(), out);
        break;
    case TermKind::AsymEnc:
    case TermKind::SymEnc:
        out += '{';
        print(t.payload(), out);
        out += "}{";
        print(t.key(), out);
        out += '}';
        break;
    }
}

class TermParser {
public:
    TermParser(std::string_view text, const AtomResolver& resolve, std::size_t line,
               std::size_t column)
        : text_(text), resolve_(resolve), line_(line), column_(column)
    {
    }

    Term parse()
    {
        Term t = list();
        skip_ws();
        if (pos_ != text_.size())
            fail("unexpected '" + std::string(1, text_[pos_]) + "'");
        return normalize(t);
    }

private:
    Term list()
    {
        std::vector<Term> items{element()};
        skip_ws();
        while (peek(',')) {
            ++pos_;
            items.push_back(element());
            skip_ws();
        }
        Term acc = items.back();
        for (auto it = items.rbegin() + 1; it != items.rend(); ++it)
            acc = Term::pair(*it, acc);
        return acc;
    }

    Term element()
    {
        skip_ws();
        if (pos_ >= text_.size())
            fail("unexpected end of term");
        if (peek('{')) {
            ++pos_;
            Term payload = list();
            expect('}');
            skip_ws();
            std::size_t key_pos = pos_;
            Term key = [&] {
                if (peek('{')) {
                    ++pos_;
                    Term k = element();
                    expect('}');
                    return k;
                }
                return element();
            }();
            if (!key.is_key())
                fail_at(key_pos, "encryption key must be a key");
            return Term::encrypt(key, payload);
        }
        if (peek('(')) {
            ++pos_;
            Term inner = list();
            expect(')');
            return inner;
        }
        std::size_t start = pos_;
        std::string id = identifier();
        skip_ws();
        if ((id == "PK" || id == "SK") && peek('(')) {
            ++pos_;
            skip_ws();
            std::size_t owner_pos = pos_;
            std::string owner_name = identifier();
            expect(')');
            auto owner = resolve_(owner_name);
            if (!owner)
                fail_at(owner_pos, "unknown identifier '" + owner_name + "'");
            bool is_agent = owner->kind() == TermKind::Agent ||
                            (owner->kind() == TermKind::Variable &&
                             owner->variable_sort() == Sort::Agent);
            if (!is_agent)
                fail_at(owner_pos, "'" + owner_name + "' is not an agent");
            return id == "PK" ? Term::pub_key(*owner) : Term::priv_key(*owner);
        }
        auto atom = resolve_(id);
        if (!atom)
            fail_at(start, "unknown identifier '" + id + "'");
        return *atom;
    }

    std::string identifier()
    {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
                text_[pos_] == '\''))
            ++pos_;
        if (start == pos_)
            fail(pos_ < text_.size() ? "unexpected '" + std::string(1, text_[pos_]) + "'"
                                     : std::string("unexpected end of term"));
        return std::string(text_.substr(start, pos_ - start));
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool peek(char c)
    {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    void expect(char c)
    {
        if (!peek(c))
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) { fail_at(pos_, msg); }

    [[noreturn]] void fail_at(std::size_t pos, const std::string& msg)
    {
        throw SyntaxError(msg, line_, column_ + pos);
    }

    std::string_view text_;
    const AtomResolver& resolve_;
    std::size_t line_;
    std::size_t column_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(const Term& t)
{
    std::string out;
    print(t, out);
    return out;
}

Term parse_term(std::string_view text, const AtomResolver& resolve, std::size_t line,
                std::size_t column)
{
    return TermParser(text, resolve, line, column).parse();
}

AtomResolver ground_resolver(const std::vector<std::string>& agents,
                             const std::vector<std::string>& sym_keys)
{
    return [agents, sym_keys](std::string_view name) -> std::optional<Term> {
        if (std::find(agents.begin(), agents.end(), name) != agents.end())
            return Term::agent(std::string(name));
        if (std::find(sym_keys.begin(), sym_keys.end(), name) != sym_keys.end())
            return Term::sym_key(std::string(name));
        return Term::nonce(std::string(name));
    };
}

}  // namespace protocheck
