#ifndef SIM_HAL_H
#define SIM_HAL_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct {
  uint32_t frequency_hz;
  uint32_t bandwidth_hz;     /* 125000, 250000 or 500000 */
  uint8_t spreading_factor;  /* 7..12 */
  uint8_t coding_rate;       /* 1..4 for 4/5..4/8 */
  uint16_t preamble_symbols;
  int8_t tx_power_dbm;
  uint8_t iq_inverted;
  uint8_t crc_on;
  uint8_t explicit_header;
} SIM_RadioConfig;

/* Blocks for `delay` milliseconds. */
void HAL_Delay(uint32_t delay);
/* Milliseconds since start, wrapping at 2^32. */
uint32_t HAL_GetTick(void);

/* 0 on success, -1 if the configuration is rejected. */
int32_t SIM_RadioConfigure(const SIM_RadioConfig *cfg);
/* Returns once the frame has left the antenna. 0 on success, -1 on error. */
int32_t SIM_RadioTransmit(const uint8_t *buf, int32_t len);
/* Waits up to timeout_ms for a frame. Returns the number of bytes copied (at most maxlen)
 * or -1 on timeout. */
int32_t SIM_RadioReceive(uint8_t *buf, int32_t maxlen, uint32_t timeout_ms);

#ifdef __cplusplus
}
#endif

#endif
