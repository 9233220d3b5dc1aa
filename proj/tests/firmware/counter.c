#include "sim_hal.h"

static int boots;

int firmware_main(void) {
  ++boots;
  HAL_Delay(1);
  return boots;
}
