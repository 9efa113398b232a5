#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "protocheck/intruder.hpp"
#include "protocheck/protocol.hpp"
#include "protocheck/term.hpp"

namespace protocheck {

/// Search bounds. Session counts default to the #System section.
struct Bounds {
    std::map<std::string, int> sessions;
    std::size_t max_depth = 12;
    std::size_t state_budget = 1'000'000;
    unsigned workers = 1;
};

/// Hard caps on bounds accepted by `instantiate`.
inline constexpr int kMaxSessions = 16;
inline constexpr std::size_t kMaxDepth = 64;

using Bindings = std::map<std::string, Term>;

struct SessionInstance {
    int id = 0;
    std::string role;
    std::string self;
    /// Position in the role's step list; equal to its length once completed.
    std::size_t pc = 0;
    Bindings bindings;
    /// 1-based ordinal among sessions of the same role.
    int ordinal = 1;
    bool completed = false;
};

enum class EventKind { Send, Deliver };

/// One network action. Sends are made by honest sessions; deliveries are
/// made by the intruder, possibly under another agent's name (`as`).
struct Event {
    EventKind kind = EventKind::Send;
    std::string actor;
    std::string as;
    std::string to;
    Term message = Term::agent("?");
    std::size_t time = 0;
    int session = 0;
    int step = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

struct GlobalState {
    std::vector<SessionInstance> sessions;
    KnowledgeSet intruder;
    std::vector<Event> trace;
    std::size_t nonce_counter = 0;
};

class BoundsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structural match of a pattern against a ground term, extending `bindings`.
/// Already-bound variables must agree. Returns false (bindings unspecified) on mismatch.
bool match_pattern(const Term& pattern, const Term& term, Bindings& bindings);

/// The intruder's closed initial knowledge.
KnowledgeSet initial_intruder_knowledge(const ProtocolSpec& spec);

/// Builds the initial state. The intruder starts with every agent name,
/// every public key, its own private key and the declared extra knowledge.
GlobalState instantiate(const CheckedSpec& spec, const Bounds& bounds);

/// All one-event extensions of `state`, ordered by event.
std::vector<GlobalState> successors(const CheckedSpec& spec, const GlobalState& state);

/// Session bindings that witness a violation of `goal`, if any.
std::optional<SessionInstance> goal_witness(const CheckedSpec& spec, const GlobalState& state,
                                            const Goal& goal);

/// True iff `goal` is violated in `state`. Throws std::invalid_argument when
/// the goal names a role the spec does not have.
bool check_goal(const CheckedSpec& spec, const GlobalState& state, const Goal& goal);

struct SearchStats {
    std::size_t states_explored = 0;
    std::size_t peak_frontier = 0;
    std::size_t depth_reached = 0;
    std::chrono::microseconds duration{0};
};

struct AttackReport {
    std::vector<Goal> violated;
    std::vector<Event> trace;
    /// Bindings of the session witnessing the first violated goal.
    Bindings bindings;
    int witness_session = 0;
    SearchStats stats;
};

struct Exhausted {
    SearchStats stats;
};

using SearchResult = std::variant<AttackReport, Exhausted>;

class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(std::size_t states, std::size_t budget);
    std::size_t states() const noexcept { return states_; }

private:
    std::size_t states_;
};

/// Breadth-first search deepening one event per level. Returns the first
/// violating state in event order at the smallest depth; traces are identical
/// for any worker count.
SearchResult search(const CheckedSpec& spec, const Bounds& bounds, const std::vector<Goal>& goals);

/// Goals from the spec.
SearchResult search(const CheckedSpec& spec, const Bounds& bounds);

/// Re-executes `trace` from the initial state, failing with
/// std::runtime_error at the first event that is not a valid successor.
GlobalState replay(const CheckedSpec& spec, const Bounds& bounds, const std::vector<Event>& trace);

/// One complete run between the first session of each role, with every
/// message forwarded verbatim.
std::vector<Event> honest_run(const CheckedSpec& spec);

/// Order-sensitive identity of a state's sessions and intruder knowledge.
std::string state_key(const GlobalState& state);

}  // namespace protocheck
