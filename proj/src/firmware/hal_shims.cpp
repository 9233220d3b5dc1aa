#include <cstdint>
#include <cstdio>
#include <cstdlib>

#include "lorasim/firmware/hal_abi.hpp"
#include "sim_hal.h"

namespace {

thread_local void* t_context = nullptr;
thread_local lorasim_hal_dispatcher t_dispatch = nullptr;

std::int64_t forward(SIM_HalCall& call) {
  if (!t_dispatch) {
    // No instance owns this thread: the call came from outside the simulator.
    std::fprintf(stderr, "lorasim: %s called outside a firmware context\n", call.name);
    std::abort();
  }
  return t_dispatch(t_context, &call);
}

}  // namespace

extern "C" {

LORASIM_HAL_EXPORT void lorasim_hal_bind_thread(void* context, lorasim_hal_dispatcher dispatcher) {
  t_context = context;
  t_dispatch = dispatcher;
}

LORASIM_HAL_EXPORT void* lorasim_hal_thread_context() { return t_context; }

LORASIM_HAL_EXPORT int64_t SIM_HalDispatch(SIM_HalCall* call) { return forward(*call); }

LORASIM_HAL_EXPORT void HAL_Delay(uint32_t delay) {
  SIM_HalCall c{"HAL_Delay", {delay, 0, 0, 0}, nullptr, 0, nullptr, 0, 0};
  forward(c);
}

LORASIM_HAL_EXPORT uint32_t HAL_GetTick(void) {
  SIM_HalCall c{"HAL_GetTick", {}, nullptr, 0, nullptr, 0, 0};
  return static_cast<uint32_t>(forward(c));
}

LORASIM_HAL_EXPORT int32_t SIM_RadioConfigure(const SIM_RadioConfig* cfg) {
  SIM_HalCall c{"SIM_RadioConfigure", {}, cfg, static_cast<int32_t>(sizeof(*cfg)), nullptr, 0, 0};
  return static_cast<int32_t>(forward(c));
}

LORASIM_HAL_EXPORT int32_t SIM_RadioTransmit(const uint8_t* buf, int32_t len) {
  SIM_HalCall c{"SIM_RadioTransmit", {len, 0, 0, 0}, buf, len, nullptr, 0, 0};
  return static_cast<int32_t>(forward(c));
}

LORASIM_HAL_EXPORT int32_t SIM_RadioReceive(uint8_t* buf, int32_t maxlen, uint32_t timeout_ms) {
  SIM_HalCall c{"SIM_RadioReceive", {maxlen, timeout_ms, 0, 0}, nullptr, 0, buf, maxlen, 0};
  return static_cast<int32_t>(forward(c));
}

}
