#pragma once

// Link between the exported HAL entry points (liblorasim_hal) and the bridge. Each firmware
// thread registers the instance it belongs to; the entry points forward to it.

#include <cstdint>

#include "sim_hal_dispatch.h"

#define LORASIM_HAL_EXPORT __attribute__((visibility("default")))

extern "C" {

using lorasim_hal_dispatcher = std::int64_t (*)(void* context, SIM_HalCall* call);

/// Binds the calling thread to `context`. Pass nullptr to unbind.
LORASIM_HAL_EXPORT void lorasim_hal_bind_thread(void* context, lorasim_hal_dispatcher dispatcher);
LORASIM_HAL_EXPORT void* lorasim_hal_thread_context();

}
