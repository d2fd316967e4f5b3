/*
 * Copyright 2026 The DDS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the dds library.
 *
 * Every call returns a dds_status; on failure dds_last_error() describes
 * the problem (thread-local, valid until the next call on the same thread).
 * Strings returned through char** are owned by the caller and must be
 * released with dds_free().
 */

#ifndef DDS_DDS_H_
#define DDS_DDS_H_

#ifdef __cplusplus
extern "C" {
#endif

#if defined(DDS_BUILDING_LIBRARY)
#define DDS_API __attribute__((visibility("default")))
#else
#define DDS_API
#endif

typedef enum dds_status {
  DDS_OK = 0,
  DDS_E_INVALID_ARGUMENT = 1,
  DDS_E_PARSE = 2,
  DDS_E_VALIDATION = 3,
  DDS_E_NOT_FOUND = 4,
  DDS_E_CONFLICT = 5,
  DDS_E_UNAUTHORIZED = 6,
  DDS_E_UNAVAILABLE = 7,
  DDS_E_INTERNAL = 8
} dds_status;

DDS_API const char* dds_version(void);
DDS_API const char* dds_last_error(void);
DDS_API const char* dds_status_name(dds_status status);
DDS_API void dds_free(char* str);

/* Documents. */

/* Parses a WireRequest strictly and renders it canonically. */
DDS_API dds_status dds_wire_canonicalize(const char* json, char** out);
/* Structural validation of a WireRequest; *report is a JSON array of
 * {kind, message} (empty when valid). */
DDS_API dds_status dds_wire_validate(const char* json, char** report);
/* Expands a use-case shorthand (or passes a WireRequest through) into a
 * canonical WireRequest. */
DDS_API dds_status dds_expand_request(const char* json, char** wire);
/* Job graph file to WireRequest. `name` may be NULL. */
DDS_API dds_status dds_dag_ingest(const char* graph_json, const char* name, char** wire);

/* In-process scenario runs on virtual time; results are JSON documents. */

DDS_API dds_status dds_carousel_run(const char* scenario_json, const char* policy, char** result);
/* `policies` is a comma-separated list, e.g. "file-level,dataset-level". */
DDS_API dds_status dds_carousel_compare(const char* scenario_json, const char* policies,
                                        char** result);
/* options: {"center", "min_delay", "max_delay", "loss_rate", "seed"}; may be NULL. */
DDS_API dds_status dds_hpo_run(const char* task_json, const char* options_json, char** result);

/* Head-service client. */

typedef struct dds_client dds_client;

DDS_API dds_status dds_client_open(const char* server_url, const char* token, dds_client** out);
DDS_API void dds_client_close(dds_client* client);
/* `path` includes any query string; `body` and `idempotency_key` may be
 * NULL. DDS_E_UNAVAILABLE when the server cannot be reached; any HTTP
 * status is DDS_OK with *http_status set. */
DDS_API dds_status dds_client_call(dds_client* client, const char* method, const char* path,
                                   const char* body, const char* idempotency_key,
                                   int* http_status, char** response);

/* Head service with its daemons. */

typedef struct dds_server dds_server;

/* Deployment JSON (clock, journal, tokens_file, scenario, hpo, dag,
 * active_learning); NULL for defaults. */
DDS_API dds_status dds_server_create(const char* deployment_json, dds_server** out);
/* Starts the daemons and serves HTTP in the background. Port 0 picks a
 * free port, reported through *bound_port. */
DDS_API dds_status dds_server_listen(dds_server* server, const char* host, int port,
                                     int* bound_port);
DDS_API void dds_server_stop(dds_server* server);
DDS_API void dds_server_destroy(dds_server* server);

#ifdef __cplusplus
}
#endif

#endif /* DDS_DDS_H_ */
