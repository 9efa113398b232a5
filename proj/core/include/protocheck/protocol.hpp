#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "protocheck/term.hpp"
#include "protocheck/term_syntax.hpp"

namespace protocheck {

struct FreeVariable {
    std::string name;
    Sort sort;
    friend bool operator==(const FreeVariable&, const FreeVariable&) = default;
};

/// `index. sender -> receiver : pattern`. Step 0 has no sender and carries
/// environment input (the peer names handed to a role).
struct MessageStep {
    int index = 0;
    std::optional<std::string> sender;
    std::string receiver;
    Term pattern = Term::agent("?");
    friend bool operator==(const MessageStep&, const MessageStep&) = default;
};

struct SecretGoal {
    std::string owner;
    std::string value;
    std::vector<std::string> peers;
    friend bool operator==(const SecretGoal&, const SecretGoal&) = default;
};

/// Non-injective agreement: whenever `responder` completes apparently with
/// `initiator` on `data`, some `initiator` run with `responder` agrees on it.
struct AgreementGoal {
    std::string initiator;
    std::string responder;
    std::vector<std::string> data;
    friend bool operator==(const AgreementGoal&, const AgreementGoal&) = default;
};

using Goal = std::variant<SecretGoal, AgreementGoal>;

std::string to_string(const Goal& goal);

/// One `role(agent) x count` line of the #System section.
struct SystemEntry {
    std::string role;
    std::string agent;
    int sessions = 1;
    friend bool operator==(const SystemEntry&, const SystemEntry&) = default;
};

struct ProtocolSpec {
    std::vector<FreeVariable> free_variables;
    std::optional<MessageStep> environment;
    std::vector<MessageStep> steps;
    std::vector<Goal> goals;
    std::string intruder_id = "I";
    std::vector<Term> intruder_knowledge;
    std::vector<std::string> extra_agents;
    std::vector<SystemEntry> system;

    std::optional<Sort> sort_of(std::string_view name) const;
    Term variable(std::string_view name) const;
    /// Role names (agent variables acting as sender or receiver) in order of first appearance.
    std::vector<std::string> roles() const;
    /// Honest agents from #System and `Agents =`, then the intruder.
    std::vector<std::string> agents() const;
    /// Resolves identifiers inside ground terms (agents, nonces otherwise).
    AtomResolver ground_atoms() const;

    friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

std::string to_string(const MessageStep& step);

/// Parses a protocol description. Throws SyntaxError with the source position.
ProtocolSpec parse_protocol(std::string_view source);

/// Canonical text of a spec; `parse_protocol(print_protocol(s)) == s`.
std::string print_protocol(const ProtocolSpec& spec);

/// Per-role view produced by the executability check.
struct RoleInfo {
    std::string name;
    /// Steps the role takes part in, in protocol order (indices into ProtocolSpec::steps).
    std::vector<std::size_t> steps;
    /// Variables the role generates freshly.
    std::vector<std::string> fresh;
    /// Variables known before the first step (self and environment input).
    std::vector<std::string> initial;
};

class ExecutabilityError : public std::runtime_error {
public:
    ExecutabilityError(int step, std::string role, const std::string& message);
    int step() const noexcept { return step_; }
    const std::string& role() const noexcept { return role_; }

private:
    int step_;
    std::string role_;
};

/// A spec that passed `check_executability`; the engines only accept these.
class CheckedSpec {
public:
    const ProtocolSpec& spec() const noexcept { return spec_; }
    const std::vector<RoleInfo>& roles() const noexcept { return roles_; }
    const RoleInfo& role(std::string_view name) const;
    /// Role that freshly generates `variable`, if any.
    std::optional<std::string> fresh_owner(std::string_view variable) const;

private:
    friend CheckedSpec check_executability(ProtocolSpec spec);
    ProtocolSpec spec_;
    std::vector<RoleInfo> roles_;
    std::map<std::string, std::string, std::less<>> fresh_owner_;
};

/// Replays each role's steps and rejects the first step whose sent pattern
/// the role cannot build from its own keys, peers' public keys, its fresh
/// values and what it has received so far.
CheckedSpec check_executability(ProtocolSpec spec);

}  // namespace protocheck
