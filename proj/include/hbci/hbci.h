/* C interface to the hybrid SSVEP/P300 BCI platform.
 *
 * Every function returns an hbci_status; on failure hbci_last_error() holds a
 * message for the calling thread. Strings returned through char** are
 * allocated by the library and released with hbci_string_free(). */
#ifndef HBCI_H
#define HBCI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HBCI_API __declspec(dllexport)
#else
#define HBCI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hbci_status {
  HBCI_OK = 0,
  HBCI_E_INVALID_ARGUMENT = 1,
  HBCI_E_CONFIG = 2,
  HBCI_E_IO = 3,
  HBCI_E_EDF_TRUNCATED = 4,
  HBCI_E_EDF_MALFORMED_HEADER = 5,
  HBCI_E_EDF_INCONSISTENT_RECORDS = 6,
  HBCI_E_EDF_DEGENERATE_SCALING = 7,
  HBCI_E_UNREPRESENTABLE = 8,
  HBCI_E_MISSING_CHANNEL = 9,
  HBCI_E_NO_MARKERS = 10,
  HBCI_E_EMPTY_WINDOW = 11,
  HBCI_E_GATEWAY = 12,
  HBCI_E_INTERNAL = 99
} hbci_status;

typedef struct hbci_config hbci_config;
typedef struct hbci_marker_parser hbci_marker_parser;
typedef struct hbci_service hbci_service;

HBCI_API const char* hbci_version(void);
HBCI_API const char* hbci_status_name(hbci_status status);
/* Message of the last failure on this thread ("" if none). */
HBCI_API const char* hbci_last_error(void);
HBCI_API void hbci_string_free(char* s);

/* --- configuration --- */
HBCI_API hbci_status hbci_config_default(hbci_config** out);
HBCI_API hbci_status hbci_config_load(const char* path, hbci_config** out);
HBCI_API hbci_status hbci_config_from_json(const char* json, hbci_config** out);
HBCI_API hbci_status hbci_config_to_json(const hbci_config* config, char** out_json);
/* Writes a JSON array of violation strings; returns HBCI_E_CONFIG when it is
 * not empty. */
HBCI_API hbci_status hbci_config_validate(const hbci_config* config, char** out_violations);
HBCI_API void hbci_config_free(hbci_config* config);

/* --- offline runs --- */
/* Synthesises the protocol (sessions <= 0 keeps the configured count),
 * decodes it and returns the evaluation report. out_edf may be NULL.
 * Decode latency is reported only when timing is non-zero. */
HBCI_API hbci_status hbci_simulate(const hbci_config* config, uint64_t seed, int sessions,
                                   const char* out_edf, int timing, char** out_report);
HBCI_API hbci_status hbci_decode_edf(const hbci_config* config, const char* path,
                                     char** out_report);
/* Accuracy table over n named report documents. */
HBCI_API hbci_status hbci_evaluate(const char* const* names, const char* const* reports,
                                   size_t n, char** out_table);

/* --- robot --- */
/* Replays a JSONL command log from the origin facing N; returns the final
 * pose as JSON. */
HBCI_API hbci_status hbci_replay(const char* command_log_jsonl, char** out_state);

/* --- live loop --- */
/* Runs the closed loop with one attended stimulus id per focus window.
 * Returns {"report":..., "robot":..., "command_log": "<jsonl>"}. */
HBCI_API hbci_status hbci_live_scripted(const hbci_config* config, uint64_t seed,
                                        const int* script, size_t n, char** out_result);
/* Starts the gateway and a real-time pipeline. port 0 picks a free port;
 * the bound port is written to out_port. */
HBCI_API hbci_status hbci_service_start(const hbci_config* config, uint64_t seed,
                                        const char* address, uint16_t port,
                                        hbci_service** out, uint16_t* out_port);
/* Stops the pipeline and gateway and frees the handle. */
HBCI_API void hbci_service_stop(hbci_service* service);

/* --- marker link --- */
HBCI_API hbci_status hbci_marker_encode(int code, double timestamp, char** out_line);
HBCI_API hbci_status hbci_marker_parser_new(hbci_marker_parser** out);
/* Feeds a chunk of bytes; returns {"events":[{"code":..,"timestamp":..}],
 * "diagnostics":[{"offset":..,"reason":..}]} for what the chunk completed. */
HBCI_API hbci_status hbci_marker_parser_feed(hbci_marker_parser* parser, const char* bytes,
                                             size_t n, char** out_json);
HBCI_API void hbci_marker_parser_free(hbci_marker_parser* parser);
/* Seconds to transmit byte_count bytes at baud with 8N1 framing. */
HBCI_API double hbci_link_budget(size_t byte_count, double baud);

#ifdef __cplusplus
}
#endif

#endif /* HBCI_H */
