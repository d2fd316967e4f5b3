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


/* Exercises the shared library through its C header only. */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

#include "dds/dds.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: EXPECT(%s) failed: %s\n", __FILE__,      \
              __LINE__, #cond, dds_last_error());                      \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static const char* kScenario =
    "{\"tape\": {\"dataset\": \"data18\", \"files\": ["
    "{\"name\": \"f1\", \"size_bytes\": 1000000000},"
    "{\"name\": \"f2\", \"size_bytes\": 1000000000},"
    "{\"name\": \"f3\", \"size_bytes\": 1000000000}],"
    "\"stage_schedule\": {\"f1\": 1, \"f2\": 2, \"f3\": 3}},"
    "\"compute\": {\"workers\": 1, \"per_file_processing_time\": 1,"
    " \"input_wait_timeout\": 1, \"resubmit_interval\": 1}}";

static void documents(void) {
  char* out = NULL;
  char* report = NULL;
  EXPECT(dds_expand_request("{\"active_learning\": {\"max_loops\": 3}, \"consumer\": \"ml\"}", &out) == DDS_OK);
  EXPECT(out && strstr(out, "\"wire_version\":1"));
  EXPECT(dds_wire_validate(out, &report) == DDS_OK);
  EXPECT(report && strcmp(report, "[]") == 0);
  dds_free(report);

  char* again = NULL;
  EXPECT(dds_wire_canonicalize(out, &again) == DDS_OK);
  EXPECT(again && strcmp(out, again) == 0);
  dds_free(again);
  dds_free(out);

  out = NULL;
  EXPECT(dds_wire_canonicalize("{\"workflow\": 1, \"foo\": 2}", &out) == DDS_E_PARSE);
  EXPECT(out == NULL);
  EXPECT(strlen(dds_last_error()) > 0);
  EXPECT(dds_wire_canonicalize(NULL, &out) == DDS_E_INVALID_ARGUMENT);

  EXPECT(dds_dag_ingest("{\"version\":1,\"jobs\":[{\"id\":\"a\",\"depends_on\":[\"b\"]},{\"id\":\"b\",\"depends_on\":[\"a\"]}]}",
                        NULL, &out) == DDS_E_VALIDATION);
  out = NULL;
  EXPECT(dds_dag_ingest("{\"version\":1,\"jobs\":[{\"id\":\"a\"},{\"id\":\"b\",\"depends_on\":[\"a\"]}]}",
                        "pair", &out) == DDS_OK);
  EXPECT(out && strstr(out, "layer-01"));
  dds_free(out);
  EXPECT(strcmp(dds_status_name(DDS_E_NOT_FOUND), "NotFound") == 0);
  EXPECT(strlen(dds_version()) > 0);
}

static void runs(void) {
  char* out = NULL;
  EXPECT(dds_carousel_compare(kScenario, "file-level,dataset-level", &out) == DDS_OK);
  EXPECT(out && strstr(out, "\"peak_ratio\":3.0"));
  dds_free(out);
  out = NULL;
  EXPECT(dds_carousel_run(kScenario, "tape-level", &out) == DDS_E_INVALID_ARGUMENT);
  EXPECT(dds_carousel_run("{\"tape\": {\"bogus\": 1}}", "file-level", &out) == DDS_E_PARSE);

  const char* task =
      "{\"space\": [{\"name\": \"x\", \"kind\": \"continuous\", \"lo\": -5, \"hi\": 5}],"
      " \"sampler\": \"evolutionary\", \"sampler_params\": {\"mu\": 2, \"sigma\": 0.5},"
      " \"points_per_iteration\": 10, \"max_points\": 200, \"patience\": 1000, \"seed\": 3}";
  out = NULL;
  EXPECT(dds_hpo_run(task, "{\"center\": 1.0}", &out) == DDS_OK);
  EXPECT(out && strstr(out, "\"status\":\"Finished\"") && strstr(out, "\"evaluations\":200"));
  dds_free(out);
}

static void served(const char* tokens_path) {
  char deployment[1024];
  snprintf(deployment, sizeof deployment,
           "{\"clock\": {\"mode\": \"virtual\", \"tick\": 1, \"wall_tick\": 0.002},"
           " \"tokens_file\": \"%s\", \"scenario\": %s}",
           tokens_path, kScenario);
  dds_server* server = NULL;
  EXPECT(dds_server_create(deployment, &server) == DDS_OK);
  if (!server) return;
  int port = 0;
  EXPECT(dds_server_listen(server, "127.0.0.1", 0, &port) == DDS_OK);
  EXPECT(port > 0);

  char url[64];
  snprintf(url, sizeof url, "http://127.0.0.1:%d", port);
  dds_client* client = NULL;
  EXPECT(dds_client_open(url, "s3cret", &client) == DDS_OK);
  char* wire = NULL;
  EXPECT(dds_expand_request("{\"carousel\": {\"dataset\": \"data18\", \"policy\": \"file-level\"}}", &wire) == DDS_OK);
  int status = 0;
  char* body = NULL;
  EXPECT(dds_client_call(client, "POST", "/requests", wire, "key-1", &status, &body) == DDS_OK);
  EXPECT(status == 201);
  char id[32] = {0};
  const char* at = body ? strstr(body, "req-") : NULL;
  EXPECT(at != NULL);
  if (at) memcpy(id, at, 10);
  dds_free(body);
  dds_free(wire);

  char path[64];
  snprintf(path, sizeof path, "/requests/%s", id);
  int done = 0;
  for (int i = 0; i < 500 && !done; ++i) {
    body = NULL;
    EXPECT(dds_client_call(client, "GET", path, NULL, NULL, &status, &body) == DDS_OK);
    done = body && strstr(body, "\"status\":\"Finished\"");
    dds_free(body);
    struct timespec ts = {0, 10 * 1000 * 1000};
    nanosleep(&ts, NULL);
  }
  EXPECT(done);
  body = NULL;
  EXPECT(dds_client_call(client, "GET", "/requests/req-999999", NULL, NULL, &status, &body) == DDS_OK);
  EXPECT(status == 404);
  dds_free(body);
  dds_client_close(client);

  dds_client* stranger = NULL;
  EXPECT(dds_client_open(url, "wrong", &stranger) == DDS_OK);
  body = NULL;
  EXPECT(dds_client_call(stranger, "GET", path, NULL, NULL, &status, &body) == DDS_OK);
  EXPECT(status == 401);
  dds_free(body);
  dds_client_close(stranger);

  dds_server_stop(server);
  dds_server_destroy(server);

  EXPECT(dds_client_open("http://127.0.0.1:1", "s3cret", &client) == DDS_OK);
  EXPECT(dds_client_call(client, "GET", "/metrics", NULL, NULL, &status, &body) == DDS_E_UNAVAILABLE);
  dds_client_close(client);
  EXPECT(dds_client_open("ftp://nowhere", "x", &client) == DDS_E_INVALID_ARGUMENT);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: test_capi TOKENS_FILE\n");
    return 2;
  }
  documents();
  runs();
  served(argv[1]);
  printf("%s\n", failures == 0 ? "test_capi: all passed" : "test_capi: FAILED");
  return failures == 0 ? 0 : 1;
}
