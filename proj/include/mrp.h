/*
 * Copyright (c) 2026-present, the mrpaxos authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the mrpaxos shared library.  All functions return an
 * MRP_* error code; mrp_last_error() describes the most recent failure on
 * the calling thread. */

#ifndef MRP_H_
#define MRP_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mrp_config mrp_config;
typedef struct mrp_node mrp_node;
typedef struct mrp_kv mrp_kv;
typedef struct mrp_dlog mrp_dlog;

enum {
  MRP_OK = 0,
  MRP_ERR_CONFIG = 1,
  MRP_ERR_CODEC = 2,
  MRP_ERR_PROTOCOL = 3,
  MRP_ERR_STORAGE = 4,
  MRP_ERR_TIMEOUT = 5,
  MRP_ERR_INVALID = 6, /* null handle or bad argument */
  MRP_ERR_INTERNAL = 7,
};

/* per-command statuses carried in replies */
enum {
  MRP_STATUS_OK = 0,
  MRP_STATUS_NOT_FOUND = 1,
  MRP_STATUS_ALREADY_EXISTS = 2,
  MRP_STATUS_TRIMMED = 3,
  MRP_STATUS_NOT_YET_WRITTEN = 4,
  MRP_STATUS_BAD_REQUEST = 5,
};

const char* mrp_last_error(void);

/* ---- configuration ---- */

int mrp_config_load(const char* path, mrp_config** out);
int mrp_config_parse(const char* text, mrp_config** out);
void mrp_config_free(mrp_config* cfg);

/* ---- node runtime ---- */

int mrp_node_start(const mrp_config* cfg, uint16_t process_id, const char* data_dir,
                   mrp_node** out);
/* blocks until mrp_node_stop is called from another thread */
int mrp_node_wait(mrp_node* node);
/* stops and frees */
int mrp_node_stop(mrp_node* node);

typedef struct mrp_node_stats {
  uint64_t proposals;
  uint64_t decided;
  uint64_t delivered;
  uint64_t skipped;
  uint64_t checkpoints;
  uint64_t trims;
  uint64_t retransmit_requests;
  uint64_t replies_sent;
} mrp_node_stats;

int mrp_node_get_stats(mrp_node* node, mrp_node_stats* out);

/* ---- kv client ---- */

int mrp_kv_open(const mrp_config* cfg, mrp_kv** out);
void mrp_kv_close(mrp_kv* kv);

/* value-bearing replies land in the callback; it runs before the call
 * returns and the pointers are only valid inside it */
typedef void (*mrp_kv_entry_cb)(void* userdata, const char* key, const uint8_t* value,
                                size_t value_len);

int mrp_kv_put(mrp_kv* kv, const char* key, const uint8_t* value, size_t value_len, int* status);
int mrp_kv_update(mrp_kv* kv, const char* key, const uint8_t* value, size_t value_len,
                  int* status);
int mrp_kv_get(mrp_kv* kv, const char* key, mrp_kv_entry_cb cb, void* userdata, int* status);
int mrp_kv_del(mrp_kv* kv, const char* key, int* status);
int mrp_kv_scan(mrp_kv* kv, const char* from, const char* to, mrp_kv_entry_cb cb, void* userdata,
                int* status);

/* ---- dlog client ---- */

int mrp_dlog_open(const mrp_config* cfg, mrp_dlog** out);
void mrp_dlog_close(mrp_dlog* dl);

typedef void (*mrp_dlog_pos_cb)(void* userdata, uint32_t log, uint64_t position);
typedef void (*mrp_dlog_value_cb)(void* userdata, const uint8_t* value, size_t value_len);

int mrp_dlog_append(mrp_dlog* dl, uint32_t log, const uint8_t* value, size_t value_len,
                    uint64_t* position, int* status);
int mrp_dlog_mappend(mrp_dlog* dl, const uint32_t* logs, size_t logs_len, const uint8_t* value,
                     size_t value_len, mrp_dlog_pos_cb cb, void* userdata, int* status);
int mrp_dlog_read(mrp_dlog* dl, uint32_t log, uint64_t position, mrp_dlog_value_cb cb,
                  void* userdata, int* status);
int mrp_dlog_trim(mrp_dlog* dl, uint32_t log, uint64_t position, int* status);

/* ---- simulator ---- */

typedef struct mrp_sim_result {
  uint64_t commands;
  uint64_t replied;
  uint64_t trace_events;
  uint64_t messages;
  int checks_ok; /* 1 when every property checker passed (with check=1) */
} mrp_sim_result;

/* Plays a scenario file (its `config` directive names the cluster) on the
 * deterministic simulator.  With check != 0 the property checkers run and
 * their report is appended to `report`. */
int mrp_sim_run(const char* scenario_path, uint64_t seed, int check, mrp_sim_result* out,
                char** report);
void mrp_string_free(char* s);

/* ---- benchmark ---- */

typedef struct mrp_bench_options {
  const char* mode; /* "kv", "dlog" or "dummy" */
  uint32_t clients;
  uint32_t size;
  uint32_t duration_s;
  const char* csv_path; /* NULL: no csv */
  uint64_t seed;
} mrp_bench_options;

typedef struct mrp_bench_report {
  uint64_t ops;
  uint64_t errors;
  uint64_t bytes;
  double duration_s;
  double throughput;
  double mbytes_per_s;
  uint64_t p50_us;
  uint64_t p95_us;
  uint64_t p99_us;
  uint64_t max_us;
} mrp_bench_report;

int mrp_bench_run(const mrp_config* cfg, const mrp_bench_options* opt, mrp_bench_report* out);

#ifdef __cplusplus
}
#endif

#endif /* MRP_H_ */
