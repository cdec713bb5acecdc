#pragma once

#include <memory>

#include "trajan/engine.hpp"

namespace trajan {

// Registry with every built-in task kind. Payloads:
//   noop             ignored, empty output
//   echo             output = input
//   broadcast_digest u64 handle; output = the broadcast bytes
//   fail             input is the error message
//   abort_worker     kills an isolated worker process; error in-process
//   psa_block, leaflet_*  see psa.hpp and leaflet.hpp
std::shared_ptr<const TaskRegistry> default_registry();

}  // namespace trajan
