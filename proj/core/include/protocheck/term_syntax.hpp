#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "protocheck/term.hpp"

namespace protocheck {

/// Parse failure with a 1-based source position.
class SyntaxError : public std::runtime_error {
public:
    SyntaxError(const std::string& message, std::size_t line, std::size_t column);

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    /// Message without the position prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    std::size_t line_;
    std::size_t column_;
};

/// Maps an identifier to the atom it denotes; nullopt means "unknown name".
using AtomResolver = std::function<std::optional<Term>(std::string_view name)>;

/// Prints `{m}{PK(B)}`, `{m}{k}`, `SK(A)` and flat pair lists `a, b, c`.
std::string to_string(const Term& t);

/// Parses the textual term syntax. Both `{m}{K}` and `{m}K` are accepted for
/// encryptions; the result is normalized. `line`/`column` offset the reported
/// error position when the text is embedded in a larger file.
Term parse_term(std::string_view text, const AtomResolver& resolve, std::size_t line = 1,
                std::size_t column = 1);

/// Resolver for ground terms: names in `agents` are agents, `sym_keys` are
/// symmetric keys, everything else is a nonce.
AtomResolver ground_resolver(const std::vector<std::string>& agents,
                             const std::vector<std::string>& sym_keys = {});

}  // namespace protocheck
