// Copyright 2026 The SCIR Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "scir/scir.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <new>
#include <string>

#include <nlohmann/json.hpp>

#include "scir/checkpoint.hpp"
#include "scir/commands.hpp"
#include "scir/config.hpp"
#include "scir/error.hpp"
#include "scir/json_util.hpp"
#include "scir/losses.hpp"
#include "scir/rewards.hpp"
#include "scir/tasks.hpp"

using nlohmann::json;

struct scir_config {
  json file = json::object();  // as loaded, before overrides
  json merged = json::object();
  scir::RunConfig resolved;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mutex;
scir_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

scir_status status_of(scir::ErrorKind k) {
  switch (k) {
    case scir::ErrorKind::kInvalidArgument:
      return SCIR_ERR_INVALID_ARGUMENT;
    case scir::ErrorKind::kConfig:
      return SCIR_ERR_CONFIG;
    case scir::ErrorKind::kIo:
      return SCIR_ERR_IO;
    case scir::ErrorKind::kNumeric:
      return SCIR_ERR_NUMERIC;
    case scir::ErrorKind::kLocked:
      return SCIR_ERR_LOCKED;
    case scir::ErrorKind::kCheckFailed:
      return SCIR_ERR_CHECK_FAILED;
  }
  return SCIR_ERR_INTERNAL;
}

template <typename Fn>
scir_status guard(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const scir::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return SCIR_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SCIR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SCIR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return SCIR_ERR_INTERNAL;
  }
}

scir_status fail(scir_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put_summary(char** summary, const json& j) {
  if (summary != nullptr) *summary = dup_string(j.dump(2));
}

void log_line(const std::string& line) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  if (g_log_fn != nullptr) g_log_fn(line.c_str(), g_log_user);
}

void resolve(scir_config* cfg) { cfg->resolved = scir::config_from_json(cfg->merged); }

}  // namespace

extern "C" {

const char* scir_version(void) { return "0.1.0"; }

const char* scir_last_error(void) { return g_last_error.c_str(); }

const char* scir_status_name(scir_status status) {
  switch (status) {
    case SCIR_OK:
      return "ok";
    case SCIR_ERR_INVALID_ARGUMENT:
      return "invalid_argument";
    case SCIR_ERR_CONFIG:
      return "config";
    case SCIR_ERR_IO:
      return "io";
    case SCIR_ERR_NUMERIC:
      return "numeric";
    case SCIR_ERR_LOCKED:
      return "locked";
    case SCIR_ERR_CHECK_FAILED:
      return "check_failed";
    case SCIR_ERR_INTERNAL:
      break;
  }
  return "internal";
}

void scir_string_free(char* s) { std::free(s); }

void scir_set_log(scir_log_fn fn, void* user) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  g_log_fn = fn;
  g_log_user = user;
}

scir_status scir_config_default(scir_config** out) {
  return guard([&] {
    if (out == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "out is NULL");
    auto* cfg = new scir_config();
    resolve(cfg);
    *out = cfg;
    return SCIR_OK;
  });
}

scir_status scir_config_load(const char* path, scir_config** out) {
  return guard([&] {
    if (path == nullptr || out == nullptr) {
      return fail(SCIR_ERR_INVALID_ARGUMENT, "path or out is NULL");
    }
    auto cfg = std::make_unique<scir_config>();
    try {
      cfg->file = scir::read_json_file(path);
    } catch (const scir::IoError& e) {
      throw scir::ConfigError(e.what());
    }
    cfg->merged = cfg->file;
    resolve(cfg.get());
    *out = cfg.release();
    return SCIR_OK;
  });
}

scir_status scir_config_set(scir_config* cfg, const char* key, const char* value) {
  return guard([&] {
    if (cfg == nullptr || key == nullptr || value == nullptr) {
      return fail(SCIR_ERR_INVALID_ARGUMENT, "NULL argument");
    }
    json merged = cfg->merged;
    scir::apply_override(merged, key, value);
    scir::RunConfig resolved = scir::config_from_json(merged);
    cfg->merged = std::move(merged);
    cfg->resolved = std::move(resolved);
    return SCIR_OK;
  });
}

scir_status scir_config_set_flag(scir_config* cfg, const char* key,
                                 const char* value) {
  return guard([&] {
    if (cfg == nullptr || key == nullptr || value == nullptr) {
      return fail(SCIR_ERR_INVALID_ARGUMENT, "NULL argument");
    }
    const auto in_file = scir::lookup(cfg->file, key);
    if (in_file && *in_file != scir::parse_override_value(value)) {
      return fail(SCIR_ERR_CONFIG, std::string("flag sets '") + key + "' to " +
                                       value + " but the config file has " +
                                       in_file->dump());
    }
    return scir_config_set(cfg, key, value);
  });
}

scir_status scir_config_apply_env(scir_config* cfg) {
  return guard([&] {
    if (cfg == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "cfg is NULL");
    const char* env = std::getenv("SCIR_RUN_DIR");
    if (env == nullptr || *env == '\0') return SCIR_OK;
    if (scir::lookup(cfg->merged, "paths.run_dir")) return SCIR_OK;
    return scir_config_set(cfg, "paths.run_dir", json(std::string(env)).dump().c_str());
  });
}

scir_status scir_config_to_json(const scir_config* cfg, char** out) {
  return guard([&] {
    if (cfg == nullptr || out == nullptr) {
      return fail(SCIR_ERR_INVALID_ARGUMENT, "NULL argument");
    }
    *out = dup_string(scir::config_to_json(cfg->resolved).dump(2));
    return SCIR_OK;
  });
}

void scir_config_free(scir_config* cfg) { delete cfg; }

scir_status scir_gen_data(const scir_config* cfg, char** summary) {
  return guard([&] {
    if (cfg == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "cfg is NULL");
    put_summary(summary, scir::cmd_gen_data(cfg->resolved, log_line));
    return SCIR_OK;
  });
}

scir_status scir_sft(const scir_config* cfg, char** summary) {
  return guard([&] {
    if (cfg == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "cfg is NULL");
    put_summary(summary, scir::cmd_sft(cfg->resolved, log_line));
    return SCIR_OK;
  });
}

scir_status scir_iterate(const scir_config* cfg, char** summary) {
  return guard([&] {
    if (cfg == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "cfg is NULL");
    put_summary(summary, scir::cmd_iterate(cfg->resolved, log_line));
    return SCIR_OK;
  });
}

scir_status scir_eval(const scir_config* cfg, const char* checkpoint,
                      const char* baseline, char** summary) {
  return guard([&] {
    if (cfg == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "cfg is NULL");
    put_summary(summary,
                scir::cmd_eval(cfg->resolved, checkpoint ? checkpoint : "",
                               baseline ? baseline : "", log_line));
    return SCIR_OK;
  });
}

scir_status scir_gradcheck(int instances, size_t entries_per_instance,
                           unsigned long long seed, char** summary) {
  return guard([&] {
    scir::GradcheckOptions o;
    o.instances = instances;
    o.entries_per_instance = entries_per_instance;
    o.seed = seed;
    const json result = scir::cmd_gradcheck(o, log_line);
    put_summary(summary, result);
    if (!result.at("ok").get<bool>()) {
      return fail(SCIR_ERR_CHECK_FAILED,
                  std::to_string(result.at("failed").get<std::size_t>()) +
                      " gradient entries outside tolerance");
    }
    return SCIR_OK;
  });
}

scir_status scir_report(const scir_config* cfg, char** summary) {
  return guard([&] {
    if (cfg == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "cfg is NULL");
    put_summary(summary, scir::cmd_report(cfg->resolved, log_line));
    return SCIR_OK;
  });
}

scir_status scir_checkpoint_sha256(const char* dir, const char* tag, char** out) {
  return guard([&] {
    if (dir == nullptr || tag == nullptr || out == nullptr) {
      return fail(SCIR_ERR_INVALID_ARGUMENT, "NULL argument");
    }
    const auto ck = scir::load_checkpoint(dir, tag);
    *out = dup_string(ck.manifest.at("sha256").get<std::string>());
    return SCIR_OK;
  });
}

scir_status scir_checkpoint_param_count(const char* dir, const char* tag,
                                        size_t* out) {
  return guard([&] {
    if (dir == nullptr || tag == nullptr || out == nullptr) {
      return fail(SCIR_ERR_INVALID_ARGUMENT, "NULL argument");
    }
    *out = scir::load_checkpoint(dir, tag).model.params.size();
    return SCIR_OK;
  });
}

scir_status scir_hard_label(double p, double epsilon_tie, scir_label* out) {
  return guard([&] {
    if (out == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "out is NULL");
    switch (scir::hard_label(p, epsilon_tie)) {
      case scir::Label::kA:
        *out = SCIR_LABEL_A;
        break;
      case scir::Label::kB:
        *out = SCIR_LABEL_B;
        break;
      case scir::Label::kUndefined:
        *out = SCIR_LABEL_UNDEFINED;
        break;
    }
    return SCIR_OK;
  });
}

scir_status scir_dpo_loss(double logratio_w, double logratio_l, double beta,
                          double* out) {
  return guard([&] {
    if (out == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "out is NULL");
    if (!(beta > 0.0)) return fail(SCIR_ERR_INVALID_ARGUMENT, "beta must be > 0");
    *out = scir::dpo_loss_value(logratio_w, logratio_l, beta);
    return SCIR_OK;
  });
}

scir_status scir_bernoulli_kl(double q, double p, double* out) {
  return guard([&] {
    if (out == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "out is NULL");
    *out = scir::bernoulli_kl(q, p);
    return SCIR_OK;
  });
}

scir_status scir_bernoulli_entropy(double q, double* out) {
  return guard([&] {
    if (out == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "out is NULL");
    *out = scir::bernoulli_entropy(q);
    return SCIR_OK;
  });
}

scir_status scir_consistency_loss(double p, double q, double tau, int literal,
                                  double* out) {
  return guard([&] {
    if (out == nullptr) return fail(SCIR_ERR_INVALID_ARGUMENT, "out is NULL");
    *out = scir::consistency_loss_value(p, q, tau, literal != 0);
    return SCIR_OK;
  });
}

scir_status scir_gold_score(int op, const int* input, size_t input_len,
                            const int* response, size_t response_len,
                            double* out) {
  return guard([&] {
    if (out == nullptr || (input == nullptr && input_len > 0) ||
        (response == nullptr && response_len > 0)) {
      return fail(SCIR_ERR_INVALID_ARGUMENT, "NULL argument");
    }
    if (op < 0 || op > 2) return fail(SCIR_ERR_INVALID_ARGUMENT, "op must be 0, 1 or 2");
    const auto inst = scir::make_instance(static_cast<scir::TaskOp>(op),
                                          scir::TokenSeq(input, input + input_len));
    *out = scir::gold_score(inst, scir::TokenSeq(response, response + response_len));
    return SCIR_OK;
  });
}

}  // extern "C"
