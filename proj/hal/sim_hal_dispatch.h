#ifndef SIM_HAL_DISPATCH_H
#define SIM_HAL_DISPATCH_H

/* For writing extra shims. A shim is a C function with the vendor signature that packs its
 * arguments into a SIM_HalCall and forwards it; the handler registered under the same name
 * in the instance's binding table runs on the simulator side. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct {
  const char *name;
  int64_t args[4];
  const void *in;
  int32_t in_len;
  void *out;
  int32_t out_cap;
  int64_t result;
} SIM_HalCall;

int64_t SIM_HalDispatch(SIM_HalCall *call);

#ifdef __cplusplus
}
#endif

#endif
