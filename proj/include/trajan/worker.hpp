#pragma once

#include <cstdint>
#include <string>

#include "trajan/engine.hpp"

namespace trajan {

// Worker side of the multi-process backend: connects to the scheduler at
// `scheduler_address`, sends REGISTER, then executes TASK frames and stores
// BROADCAST payloads until SHUTDOWN.
//
// Returns the process exit code: 0 after SHUTDOWN, 1 when the connection is
// lost or the scheduler violates the protocol (cause logged to stderr).
int worker_serve(const std::string& scheduler_address, std::uint64_t memory_budget,
                 const TaskRegistry& registry);

}  // namespace trajan
