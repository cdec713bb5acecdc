#include "trajan/tasks.hpp"

#include <cstdlib>

#include "trajan/errors.hpp"
#include "trajan/leaflet.hpp"
#include "trajan/psa.hpp"

namespace trajan {

namespace {

std::uint64_t leading_handle(std::span<const std::uint8_t> input) {
  ByteReader r(input);
  return r.u64();
}

}  // namespace

std::shared_ptr<const TaskRegistry> default_registry() {
  auto reg = std::make_shared<TaskRegistry>();
  reg->add(TaskKind::noop, [](auto, const TaskContext&) { return Bytes{}; });
  reg->add(TaskKind::echo, [](auto in, const TaskContext&) { return Bytes(in.begin(), in.end()); });
  reg->add(TaskKind::broadcast_digest, [](auto in, const TaskContext& ctx) {
    const auto data = ctx.broadcast(leading_handle(in));
    return Bytes(data.begin(), data.end());
  });
  reg->add(TaskKind::fail, [](auto in, const TaskContext&) -> Bytes {
    throw TaskError(std::string(in.begin(), in.end()));
  });
  reg->add(TaskKind::abort_worker, [](auto, const TaskContext& ctx) -> Bytes {
    if (ctx.isolated()) std::_Exit(70);
    throw TaskError("abort_worker requires a worker process");
  });
  reg->add(TaskKind::psa_block, [](auto in, const TaskContext&) { return run_psa_block(in); });
  reg->add(TaskKind::leaflet_rows, [](auto in, const TaskContext& ctx) {
    return run_leaflet_rows(in, ctx.broadcast(leading_handle(in)));
  });
  reg->add(TaskKind::leaflet_edges,
           [](auto in, const TaskContext&) { return run_leaflet_block(in, false, false); });
  reg->add(TaskKind::leaflet_partial,
           [](auto in, const TaskContext&) { return run_leaflet_block(in, true, false); });
  reg->add(TaskKind::leaflet_tree,
           [](auto in, const TaskContext&) { return run_leaflet_block(in, true, true); });
  reg->add(TaskKind::leaflet_shared_tree, [](auto in, const TaskContext& ctx) {
    return run_leaflet_shared_tree(in, ctx.broadcast(leading_handle(in)));
  });
  return reg;
}

}  // namespace trajan
