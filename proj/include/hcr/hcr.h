#ifndef HCR_H
#define HCR_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(HCR_BUILDING_LIBRARY)
#define HCR_API __attribute__((visibility("default")))
#else
#define HCR_API
#endif

/* Status codes double as CLI exit codes. */
typedef enum {
    HCR_OK = 0,
    HCR_ERR_INTERNAL = 1,
    HCR_ERR_CONFIG = 2,
    HCR_ERR_STAGE = 3,
    HCR_ERR_MISSING = 4,
    HCR_ERR_ARGUMENT = 5
} hcr_status;

typedef struct hcr_config hcr_config;

/* Parses a JSON config file. On failure *out is NULL. */
HCR_API hcr_status hcr_config_load(const char* path, hcr_config** out);
HCR_API hcr_status hcr_config_parse(const char* json_text, hcr_config** out);
HCR_API void hcr_config_free(hcr_config* cfg);

/* Overrides; each validates the config again. */
HCR_API hcr_status hcr_config_set_seed(hcr_config* cfg, uint64_t seed);
HCR_API hcr_status hcr_config_set_output_dir(hcr_config* cfg, const char* dir);
HCR_API hcr_status hcr_config_set_grid(hcr_config* cfg, const char* preset);
HCR_API hcr_status hcr_config_set_threads(hcr_config* cfg, int threads);

/* Writes the resolved config as JSON into buf (NUL-terminated, truncated to
   size). Returns the full length needed, excluding the terminator, or -1. */
HCR_API long hcr_config_echo(const hcr_config* cfg, char* buf, unsigned long size);

/* Output directory of the config; valid until the config is modified or freed. */
HCR_API const char* hcr_config_output_dir(const hcr_config* cfg);

HCR_API hcr_status hcr_run_simulate(const hcr_config* cfg);
HCR_API hcr_status hcr_run_pipeline(const hcr_config* cfg);
HCR_API hcr_status hcr_run_lyapunov(const hcr_config* cfg);
HCR_API hcr_status hcr_run_select(const hcr_config* cfg);
HCR_API hcr_status hcr_run_report(const char* output_dir);

/* Message for the last failure on this thread; empty after success. */
HCR_API const char* hcr_last_error(void);

HCR_API const char* hcr_version(void);

#ifdef __cplusplus
}
#endif

#endif
