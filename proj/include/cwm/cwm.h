#ifndef CWM_CWM_H
#define CWM_CWM_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CWM_API __declspec(dllexport)
#else
#define CWM_API __attribute__((visibility("default")))
#endif

typedef enum cwm_status {
  CWM_OK = 0,
  CWM_ERROR_CONFIG = 1,
  CWM_ERROR_DATA = 2,
  CWM_ERROR_RUNTIME = 3,
} cwm_status;

typedef struct cwm_config cwm_config;
typedef struct cwm_report cwm_report;

/* Library version string, "major.minor.patch". */
CWM_API const char* cwm_version(void);

/* Message for the most recent failure on the calling thread, or "". */
CWM_API const char* cwm_last_error(void);

/* Run configuration with desk-preset defaults. */
CWM_API cwm_status cwm_config_create(cwm_config** out);
CWM_API void cwm_config_destroy(cwm_config* cfg);

/* Applies a `key = value` file (with includes) on top of the current values. */
CWM_API cwm_status cwm_config_load(cwm_config* cfg, const char* path);
CWM_API cwm_status cwm_config_set(cwm_config* cfg, const char* key, const char* value);

/* Writes the value of `key` into `buf` (NUL-terminated, truncated to `size`).
   `*needed`, when non-null, receives the full length including the NUL. */
CWM_API cwm_status cwm_config_get(const cwm_config* cfg, const char* key, char* buf, unsigned long size,
                                  unsigned long* needed);

/* Full resolved configuration as `key = value` lines. Free with cwm_report_destroy. */
CWM_API cwm_status cwm_config_manifest(const cwm_config* cfg, cwm_report** out);

/* Runs pretrain | finetune | eval | probe | inspect. On success `*out` holds
   the JSON report. */
CWM_API cwm_status cwm_run(const cwm_config* cfg, const char* command, cwm_report** out);

CWM_API const char* cwm_report_text(const cwm_report* report);
CWM_API void cwm_report_destroy(cwm_report* report);

#ifdef __cplusplus
}
#endif

#endif
