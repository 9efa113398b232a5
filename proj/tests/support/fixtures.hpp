#pragma once

#include <string>
#include <vector>

#include "protocheck/model_checker.hpp"
#include "protocheck/protocol.hpp"

namespace testfix {

std::string fixture_path(const std::string& name);
std::string golden_path(const std::string& name);
std::string read_file(const std::string& path);

protocheck::CheckedSpec load_spec(const std::string& name);

/// A and B with one session each, depth 12.
protocheck::Bounds lowe_bounds();

/// Shortest attack on the NSPK fixture under `lowe_bounds`.
std::vector<protocheck::Event> lowe_trace();

/// Trace text with nonces renamed N1, N2, ... by first appearance and
/// session ids renumbered the same way; equal for renamings of one attack.
std::string canonical_trace(const std::vector<protocheck::Event>& trace);

/// Text of the six steps of Lowe's attack in the canonical form above.
std::string canonical_lowe();

}  // namespace testfix
