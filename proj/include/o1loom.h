/*
 * Copyright 2026-present the o1loom authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the o1loom engine: opaque handles, status codes, and the
 * five CLI-level commands. Strings returned through char** are owned by the
 * caller and released with o1l_string_free; const char* results borrow from
 * the handle (or thread-local storage for o1l_last_error) and stay valid
 * until the next call on the same handle or thread.
 */

#ifndef O1LOOM_H
#define O1LOOM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum o1l_status {
    O1L_OK = 0,
    O1L_ERR_INTERNAL = 1,
    O1L_ERR_CONFIG = 2,
    O1L_ERR_BACKEND = 3,
    O1L_ERR_PARSE = 4,
    O1L_ERR_VALIDATION = 5
} o1l_status;

const char* o1l_version(void);

/* Message for the most recent failure on this thread; empty on success. */
const char* o1l_last_error(void);

void o1l_string_free(char* text);

/* ------------------------------------------------------------------ */
/* Commands. Keys use the CLI flag spelling without dashes;            */
/* repeated keys accumulate (e.g. "runs"). Return value is the process */
/* exit code: 0 ok, 1 internal, 2 usage/config, 3 backend.             */

typedef struct o1l_opts o1l_opts;

o1l_opts* o1l_opts_new(void);
void o1l_opts_free(o1l_opts* opts);
o1l_status o1l_opts_add(o1l_opts* opts, const char* key, const char* value);

int o1l_cmd_optimize(const o1l_opts* opts);
int o1l_cmd_run(const o1l_opts* opts);
int o1l_cmd_eval(const o1l_opts* opts);
int o1l_cmd_screen(const o1l_opts* opts);
int o1l_cmd_report(const o1l_opts* opts);
int o1l_dispatch(const char* command, const o1l_opts* opts);

/* ------------------------------------------------------------------ */
/* Reasoning traces.                                                   */

typedef struct o1l_trace o1l_trace;

o1l_status o1l_trace_parse(const char* text, int strict, o1l_trace** out_trace);
void o1l_trace_free(o1l_trace* trace);

size_t o1l_trace_step_count(const o1l_trace* trace);
int o1l_trace_starting_budget(const o1l_trace* trace);
int o1l_trace_step_budget(const o1l_trace* trace, size_t index);
const char* o1l_trace_step_content(const o1l_trace* trace, size_t index);
/* NULL when the step has no reflection. */
const char* o1l_trace_step_reflection(const o1l_trace* trace, size_t index);
/* Returns 1 and fills out_reward when present, 0 otherwise. */
int o1l_trace_step_reward(const o1l_trace* trace, size_t index, double* out_reward);
/* NULL when the trace has no answer. */
const char* o1l_trace_answer(const o1l_trace* trace);

o1l_status o1l_trace_serialize(const o1l_trace* trace, char** out_text);

o1l_status o1l_extract_answer(const char* text, char** out_answer);
o1l_status o1l_extract_reward(const char* text, double* out_reward);

/* ------------------------------------------------------------------ */
/* Metrics. Masks are row-major byte rasters, nonzero = foreground.    */

o1l_status o1l_iou(const unsigned char* a, const unsigned char* b, int width, int height,
                   double* out_value);
o1l_status o1l_vqa_accuracy(const char* pred, const char* const* answers, size_t n_answers,
                            double* out_value);
o1l_status o1l_bleu1(const char* pred, const char* const* references, size_t n_references,
                     double* out_value);
o1l_status o1l_improvement_pct(double new_value, double old_value, double* out_value);
/* Formats "+359.07%" style text; "n/a" when old_value is zero. */
o1l_status o1l_format_improvement(double new_value, double old_value, char* buffer,
                                  size_t buffer_size);

#ifdef __cplusplus
}
#endif

#endif /* O1LOOM_H */
