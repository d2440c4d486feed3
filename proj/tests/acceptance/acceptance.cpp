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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits 0 only
// when every criterion passes, unless --report is given.
//
// Criteria 1 to 5 check formulas against the oracle module. Criteria 6 to 11
// drive full runs through the C API under the default configuration.

#include <sys/resource.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracle.hpp"
#include "scir/losses.hpp"
#include "scir/rewards.hpp"
#include "scir/scir.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scir;

namespace {

constexpr int kVocab = 33;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string fmt_opt(const std::optional<double>& x) {
  return x ? fmt("%.4f", *x) : "null";
}

double cpu_seconds() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_utime.tv_sec + u.ru_stime.tv_sec) +
         1e-6 * static_cast<double>(u.ru_utime.tv_usec + u.ru_stime.tv_usec);
}

oracle::BigramTable random_table(std::uint64_t seed, double spread) {
  Rng rng(seed);
  std::vector<std::vector<oracle::Real>> l(kVocab, std::vector<oracle::Real>(kVocab));
  for (auto& row : l) {
    for (auto& x : row) x = spread * rng.normal();
  }
  return oracle::BigramTable(l);
}

TokenSeq random_response(Rng& rng, int min_len, int max_len) {
  TokenSeq out;
  for (int n = rng.range(min_len, max_len); n > 0; --n) out.push_back(tok::digit(rng.range(0, tok::kMaxDigits - 1)));
  out.push_back(tok::kEos);
  return out;
}

PreferencePair make_pair(TokenSeq a, TokenSeq b) {
  PreferencePair p;
  p.id = "acc";
  p.prompt = {tok::kOpSort, tok::digit(3), tok::digit(1), tok::digit(4), tok::kSep};
  p.response_a = std::move(a);
  p.response_b = std::move(b);
  return p;
}

// --- formula criteria -----------------------------------------------------------

Outcome gradient_fidelity() {
  const double t0 = cpu_seconds();
  char* summary = nullptr;
  const scir_status s = scir_gradcheck(100, 64, 11, &summary);
  const double secs = cpu_seconds() - t0;
  if (summary == nullptr) return {false, std::string("no summary: ") + scir_last_error()};
  const json j = json::parse(summary);
  scir_string_free(summary);
  const bool ok = s == SCIR_OK && j.at("failed") == 0 && secs <= 60.0;
  return {ok, std::to_string(j.at("entries").get<std::size_t>()) + " entries, " +
                  std::to_string(j.at("failed").get<std::size_t>()) + " failed, " +
                  std::to_string(j.at("sg_blocked").get<std::size_t>()) +
                  " sg-blocked, max error " + fmt("%.2e", j.at("max_error").get<double>()) +
                  ", " + fmt("%.1f", secs) + " s CPU"};
}

Outcome consistency_identity() {
  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double p = 0.01 + 0.98 * rng.uniform();
    const double q = 0.01 + 0.98 * rng.uniform();
    double kl = 0.0;
    double h = 0.0;
    scir_bernoulli_kl(q, p, &kl);
    scir_bernoulli_entropy(q, &h);
    const double ce = -q * std::log(p) - (1.0 - q) * std::log(1.0 - p);
    worst = std::max(worst, std::abs(kl + h - ce));
  }
  double kl = 0.0;
  double h = 0.0;
  scir_bernoulli_kl(0.6, 0.9, &kl);
  scir_bernoulli_entropy(0.6, &h);
  const bool worked = std::abs(kl - 0.311239) < 1e-6 && std::abs(h - 0.673012) < 1e-6 &&
                      std::abs(kl + h - 0.984250) < 1e-6;
  return {worst < 1e-12 && worked, "max |KL + H - CE| " + fmt("%.2e", worst) + ", KL " +
                                       fmt("%.6f", kl) + ", H " + fmt("%.6f", h) +
                                       ", sum " + fmt("%.6f", kl + h)};
}

Outcome closed_form_equivalence() {
  const int cases = 60;
  double worst = 0.0;
  Rng rng(31);
  for (int c = 0; c < cases; ++c) {
    const auto policy_t = random_table(1000 + c, 1.0);
    const auto ref_t = random_table(2000 + c, 1.0);
    const Model policy = oracle::build_forced_model(policy_t, 48, 3.0, 1);
    PreferencePair pair = make_pair(random_response(rng, 1, 7), random_response(rng, 1, 7));
    if (pair.response_a == pair.response_b) pair.response_b.insert(pair.response_b.begin(), tok::digit(0));
    const double beta = 0.1;
    const double alpha_l = 0.01 * (c % 4);
    const double tau = 0.55 + 0.05 * (c % 5);
    const oracle::Real ref_a = ref_t.log_prob(pair.prompt, pair.response_a);
    const oracle::Real ref_b = ref_t.log_prob(pair.prompt, pair.response_b);

    grad::Tape tape;
    LmGraph g(tape, policy, false);
    const double p_lib = irm_preference(g, pair, static_cast<double>(ref_a),
                                        static_cast<double>(ref_b), beta, alpha_l).value();
    const auto grm_lib = grm_preference(g, pair, alpha_l, 1e-6);
    const Label chosen = c % 2 == 0 ? Label::kA : Label::kB;
    const double dpo_lib = dpo_loss(g, pair, chosen, static_cast<double>(ref_a),
                                    static_cast<double>(ref_b), beta).value();
    const double cons_lib =
        consistency_loss(tape.scalar(p_lib), grm_lib.p, tau).value();

    const oracle::Real p_or = oracle::enum_irm_preference(
        policy_t, ref_t, pair.prompt, pair.response_a, pair.response_b, beta, alpha_l);
    const auto grm_or = oracle::enum_grm_preference(policy_t, pair.prompt, pair.response_a,
                                                    pair.response_b, alpha_l, 1e-6L);
    const oracle::Real lr_a = policy_t.log_prob(pair.prompt, pair.response_a) - ref_a;
    const oracle::Real lr_b = policy_t.log_prob(pair.prompt, pair.response_b) - ref_b;
    const oracle::Real dpo_or = chosen == Label::kA ? oracle::dpo_loss(lr_a, lr_b, beta)
                                                    : oracle::dpo_loss(lr_b, lr_a, beta);
    const oracle::Real cons_or =
        oracle::bruteforce_consistency_loss(p_or, grm_or.p, static_cast<oracle::Real>(tau));

    worst = std::max({worst, std::abs(p_lib - static_cast<double>(p_or)),
                      std::abs(grm_lib.p.value() - static_cast<double>(grm_or.p)),
                      std::abs(dpo_lib - static_cast<double>(dpo_or)),
                      std::abs(cons_lib - static_cast<double>(cons_or))});
  }
  return {worst <= 1e-10, std::to_string(cases) + " cases, max deviation " + fmt("%.2e", worst)};
}

Outcome gate_exactness() {
  // Every response a is longer: the GRM length offset prefers B while the
  // global reference makes the IRM prefer A.
  std::vector<std::vector<oracle::Real>> l(kVocab, std::vector<oracle::Real>(kVocab));
  Rng rng(5);
  for (auto& row : l) {
    for (auto& x : row) x = 0.5 * rng.normal();
  }
  for (Token ask : {tok::kJudge1Ask, tok::kJudge2Ask}) {
    l[ask][tok::kVerdictFirst] = 0.0;
    l[ask][tok::kVerdictSecond] = 0.0;
  }
  const oracle::BigramTable table(l);
  const Model m = oracle::build_forced_model(table, 48, 3.0, 1);
  std::vector<PreferencePair> batch;
  std::vector<RefScores> refs;
  for (int i = 0; i < 8; ++i) {
    TokenSeq longer{tok::digit(i % 8), tok::digit((i + 3) % 8), tok::digit(i % 4), tok::kEos};
    TokenSeq shorter{tok::digit((i + 5) % 8), tok::kEos};
    PreferencePair p = make_pair(longer, shorter);
    RefScores r;
    r.global_a = sequence_logprob(m, p.prompt, p.response_a) - 30.0;
    r.global_b = sequence_logprob(m, p.prompt, p.response_b);
    r.local_a = r.global_a;
    r.local_b = r.global_b;
    batch.push_back(std::move(p));
    refs.push_back(r);
  }
  LossConfig lc;
  ScirOptions opts;
  opts.alpha_l_grm = 0.5;

  grad::Tape tape;
  LmGraph g(tape, m, false);
  const auto out = scir_batch_loss(g, batch, refs, lc, opts);
  std::vector<oracle::GateInput> inputs;
  std::vector<bool> mask;
  bool all_disagree = true;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto grm = oracle::enum_grm_preference(table, batch[i].prompt, batch[i].response_a,
                                                 batch[i].response_b, 0.5L, 1e-6L);
    inputs.push_back({static_cast<oracle::Real>(out.pairs[i].verdict.p_irm), grm.variants});
    mask.push_back(out.pairs[i].gate);
    all_disagree = all_disagree && out.pairs[i].verdict.label_irm != out.pairs[i].verdict.label_grm;
  }
  const auto report = oracle::exhaustive_gate_check(inputs, mask, 1e-6L);

  // With the consistency weight at zero only DPO terms remain.
  LossConfig dpo_only = lc;
  dpo_only.alpha = 0.0;
  const auto grad_dpo =
      grad::gradient(scir_batch_expr(m.config, batch, refs, dpo_only, opts), m.params);
  std::size_t nonzero = 0;
  for (double x : grad_dpo.values()) nonzero += x != 0.0 ? 1 : 0;

  const bool ok = all_disagree && out.gate_count() == 0 && report.mismatches.empty() &&
                  nonzero == 0;
  return {ok, std::to_string(batch.size()) + " disagreeing pairs, gate " +
                  std::to_string(out.gate_count()) + ", oracle mismatches " +
                  std::to_string(report.mismatches.size()) + ", nonzero DPO gradient entries " +
                  std::to_string(nonzero) + " of " + std::to_string(grad_dpo.size())};
}

Outcome length_monotonicity() {
  const double alphas[] = {0.0, 0.01, 0.02, 0.05};
  Rng rng(41);
  int violations = 0;
  const int pairs = 100;
  for (int c = 0; c < pairs; ++c) {
    const auto policy_t = random_table(3000 + c, 1.0);
    const auto ref_t = random_table(4000 + c, 1.0);
    const Model policy = oracle::build_forced_model(policy_t, 48, 3.0, 1);
    TokenSeq a = random_response(rng, 1, 6);
    TokenSeq b = random_response(rng, 1, 6);
    while (b.size() == a.size()) b = random_response(rng, 1, 6);
    const PreferencePair pair = make_pair(a, b);
    const bool a_longer = a.size() > b.size();
    const double ref_a = static_cast<double>(ref_t.log_prob(pair.prompt, a));
    const double ref_b = static_cast<double>(ref_t.log_prob(pair.prompt, b));
    std::vector<std::vector<double>> series(5);
    for (double al : alphas) {
      grad::Tape tape;
      LmGraph g(tape, policy, false);
      const double irm = irm_preference(g, pair, ref_a, ref_b, 0.1, al).value();
      series[0].push_back(a_longer ? irm : 1.0 - irm);
      const auto grm = grm_preference(g, pair, al, 1e-6);
      for (std::size_t v = 0; v < 4; ++v) {
        series[v + 1].push_back(a_longer ? grm.variants[v] : 1.0 - grm.variants[v]);
      }
    }
    for (const auto& s : series) {
      for (std::size_t k = 1; k < s.size(); ++k) violations += s[k] < s[k - 1] ? 0 : 1;
    }
  }
  return {violations == 0, std::to_string(pairs) + " pairs x 5 scorers, " +
                               std::to_string(violations) + " non-decreasing steps"};
}

// --- run criteria ------------------------------------------------------------------

class Config {
 public:
  Config() { scir_config_default(&cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { scir_config_free(cfg_); }
  bool set(const std::string& key, const std::string& value) {
    return scir_config_set(cfg_, key.c_str(), value.c_str()) == SCIR_OK;
  }
  json resolved() const {
    char* s = nullptr;
    scir_config_to_json(cfg_, &s);
    json j = json::parse(s);
    scir_string_free(s);
    return j;
  }
  const scir_config* get() const { return cfg_; }

 private:
  scir_config* cfg_ = nullptr;
};

struct Run {
  std::string name;
  fs::path dir;
  bool ok = false;
  std::string error;
  double cpu = 0.0;
};

using Records = std::vector<json>;

Records read_records(const fs::path& dir) {
  Records out;
  if (!fs::exists(dir / "metrics")) return out;
  for (const auto& e : fs::directory_iterator(dir / "metrics")) {
    if (e.path().extension() != ".jsonl") continue;
    std::ifstream in(e.path());
    for (std::string line; std::getline(in, line);) {
      if (!line.empty()) out.push_back(json::parse(line));
    }
  }
  return out;
}

std::optional<double> value_of(const json& r) {
  if (r.at("value").is_null()) return std::nullopt;
  return r.at("value").get<double>();
}

const json* find(const Records& rs, int iteration, const std::string& dataset,
                 const std::string& metric) {
  for (const auto& r : rs) {
    if (r.at("iteration") == iteration && r.at("dataset") == dataset && r.at("metric") == metric) {
      return &r;
    }
  }
  return nullptr;
}

// consistency_rate on newly generated pairs for t = 0..iterations.
std::vector<std::optional<double>> consistency_series(const Records& rs, int iterations) {
  std::vector<std::optional<double>> out;
  for (int t = 0; t <= iterations; ++t) {
    const json* r = find(rs, t, "new_D_t", "consistency_rate");
    out.push_back(r != nullptr ? value_of(*r) : std::nullopt);
  }
  return out;
}

std::string series_text(const std::vector<std::optional<double>>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + fmt_opt(s[i]);
  return out + "]";
}

std::optional<double> gain(const std::vector<std::optional<double>>& s) {
  if (s.empty() || !s.front() || !s.back()) return std::nullopt;
  return *s.back() - *s.front();
}

std::map<std::string, std::string> checkpoint_hashes(const fs::path& dir, int iterations) {
  std::map<std::string, std::string> out;
  for (int t = 1; t <= iterations; ++t) {
    const std::string tag = "M_" + std::to_string(t);
    char* sha = nullptr;
    if (scir_checkpoint_sha256((dir / "checkpoints").c_str(), tag.c_str(), &sha) == SCIR_OK) {
      out[tag] = sha;
      scir_string_free(sha);
    }
  }
  return out;
}

std::map<std::string, std::string> metrics_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir / "metrics")) return out;
  for (const auto& e : fs::directory_iterator(dir / "metrics")) {
    if (e.path().extension() != ".jsonl") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

class Harness {
 public:
  explicit Harness(fs::path work) : work_(std::move(work)) {}

  // gen-data and sft once; every run starts from copies of these files.
  bool prepare(std::string& error) {
    fs::remove_all(work_);
    fs::create_directories(work_);
    Config cfg;
    cfg.set("paths.run_dir", json(shared_dir().string()).dump());
    const double t0 = cpu_seconds();
    if (scir_gen_data(cfg.get(), nullptr) != SCIR_OK ||
        scir_sft(cfg.get(), nullptr) != SCIR_OK) {
      error = scir_last_error();
      return false;
    }
    prepare_cpu_ = cpu_seconds() - t0;
    resolved_ = cfg.resolved();
    return true;
  }

  Run run(const std::string& name, const std::vector<std::pair<std::string, std::string>>& sets) {
    Run r;
    r.name = name;
    r.dir = work_ / name;
    fs::remove_all(r.dir);
    fs::create_directories(r.dir / "checkpoints");
    fs::copy(shared_dir() / "data", r.dir / "data", fs::copy_options::recursive);
    for (const char* f : {"base.bin", "base.json", "M_0.bin", "M_0.json"}) {
      fs::copy_file(shared_dir() / "checkpoints" / f, r.dir / "checkpoints" / f);
    }
    Config cfg;
    cfg.set("paths.run_dir", json(r.dir.string()).dump());
    cfg.set("paths.run_id", json(name).dump());
    for (const auto& [k, v] : sets) {
      if (!cfg.set(k, v)) {
        r.error = scir_last_error();
        return r;
      }
    }
    const double t0 = cpu_seconds();
    r.ok = scir_iterate(cfg.get(), nullptr) == SCIR_OK;
    r.cpu = cpu_seconds() - t0;
    if (!r.ok) r.error = scir_last_error();
    std::fprintf(stderr, "run %s: %s, %.0f s CPU\n", name.c_str(), r.ok ? "ok" : r.error.c_str(),
                 r.cpu);
    return r;
  }

  // Reruns iterate in place with the identical resolved config.
  bool rerun(const Run& r) {
    Config cfg;
    cfg.set("paths.run_dir", json(r.dir.string()).dump());
    cfg.set("paths.run_id", json(r.name).dump());
    return scir_iterate(cfg.get(), nullptr) == SCIR_OK;
  }

  fs::path shared_dir() const { return work_ / "shared"; }
  double prepare_cpu() const { return prepare_cpu_; }
  const json& resolved() const { return resolved_; }

 private:
  fs::path work_;
  double prepare_cpu_ = 0.0;
  json resolved_;
};

}  // namespace

// Usage: acceptance [--report FILE] [work_dir]
// With --report the lines are also written to FILE and the exit status only
// reflects whether every criterion was evaluated.
int main(int argc, char** argv) {
  std::optional<fs::path> report_path;
  fs::path work = fs::temp_directory_path() / "scir_acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--report" && i + 1 < argc) {
      report_path = argv[++i];
    } else {
      work = arg;
    }
  }
  std::FILE* report_file = nullptr;
  if (report_path) {
    report_file = std::fopen(report_path->c_str(), "w");
    if (report_file == nullptr) {
      std::fprintf(stderr, "cannot write %s\n", report_path->c_str());
      return 2;
    }
  }
  auto emit = [&](const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (report_file != nullptr) {
      std::fprintf(report_file, "%s\n", line.c_str());
      std::fflush(report_file);
    }
  };
  std::vector<std::pair<std::string, Outcome>> results;
  auto report = [&](const std::string& name, Outcome o) {
    emit("criterion " + std::to_string(results.size() + 1) + (o.pass ? " PASS: " : " FAIL: ") +
         name + " (" + o.detail + ")");
    results.emplace_back(name, std::move(o));
  };

  report("gradient fidelity", gradient_fidelity());
  report("consistency loss identity", consistency_identity());
  report("closed-form equivalence", closed_form_equivalence());
  report("gate exactness", gate_exactness());
  report("length-regularization monotonicity", length_monotonicity());

  Harness h(work);
  std::string error;
  if (!h.prepare(error)) {
    for (const char* name : {"consistency trend", "iteration-0 agreement band",
                             "consistent-subset accuracy", "win rate", "determinism",
                             "ablations"}) {
      report(name, {false, "data or SFT failed: " + error});
    }
    if (report_file != nullptr) std::fclose(report_file);
    return 1;
  }
  const json& cfg = h.resolved();
  const int iterations = cfg.at("train").at("iterations").get<int>();

  Run scir = h.run("scir", {});
  const Records scir_rs = read_records(scir.dir);
  const auto scir_series = consistency_series(scir_rs, iterations);
  Run irm = h.run("srlm_irm", {{"mode", "\"srlm_irm\""}});
  const auto irm_series = consistency_series(read_records(irm.dir), iterations);

  {  // 6
    std::size_t params = 0;
    scir_checkpoint_param_count((h.shared_dir() / "checkpoints").c_str(), "M_0", &params);
    const auto& model = cfg.at("model");
    const double cpu = h.prepare_cpu() + scir.cpu;
    const bool shape = model.at("vocab_size").get<int>() <= 64 && model.at("layers").get<int>() <= 2 &&
                       params <= 200000 &&
                       cfg.at("train").at("prompts_per_iteration").get<int>() == 256 &&
                       iterations == 3 && cpu <= 900.0;
    bool monotone = scir.ok;
    for (std::size_t t = 0; t < scir_series.size(); ++t) {
      monotone = monotone && scir_series[t] && (t == 0 || *scir_series[t] >= *scir_series[t - 1]);
    }
    const auto margin = scir_series.back() && irm_series.back()
                            ? std::optional<double>(*scir_series.back() - *irm_series.back())
                            : std::nullopt;
    const bool beats = irm.ok && margin && *margin >= 0.10;
    report("consistency trend",
           {shape && monotone && beats,
            "scir " + series_text(scir_series) + ", srlm_irm " + series_text(irm_series) +
                ", margin " + fmt_opt(margin) + ", " + std::to_string(params) + " params, " +
                fmt("%.0f", cpu) + " s CPU"});
  }
  {  // 7
    const json* r = find(scir_rs, 0, "new_D_t", "consistency_rate");
    const auto v = r != nullptr ? value_of(*r) : std::nullopt;
    const bool ok = v && *v >= 0.35 && *v <= 0.65;
    report("iteration-0 agreement band",
           {ok, "agreement " + fmt_opt(v) + " on " +
                    (r != nullptr ? std::to_string(r->at("n_valid").get<std::size_t>()) : "0") +
                    " comparable pairs"});
  }
  {  // 8
    auto acc = [&](const std::string& mode) {
      const json* r = find(scir_rs, iterations, "heldout_gold", "reward_accuracy_" + mode);
      return r != nullptr ? value_of(*r) : std::nullopt;
    };
    const json* any = find(scir_rs, iterations, "heldout_gold", "reward_accuracy_irm");
    const auto a_irm = acc("irm");
    const auto a_grm = acc("grm");
    const auto a_con = acc("consistent");
    const bool ok = any != nullptr && any->at("n_total") == 500 && a_irm && a_grm && a_con &&
                    *a_con >= std::max(*a_irm, *a_grm);
    report("consistent-subset accuracy", {ok, "consistent " + fmt_opt(a_con) + ", irm " +
                                                  fmt_opt(a_irm) + ", grm " + fmt_opt(a_grm)});
  }
  {  // 9
    const json* r = find(scir_rs, iterations, "heldout_prompts", "win_rate_vs_M_0");
    const auto v = r != nullptr ? value_of(*r) : std::nullopt;
    const bool ok = r != nullptr && r->at("n_total") == 200 && v && *v > 0.55;
    report("win rate", {ok, "M_" + std::to_string(iterations) + " vs M_0 " + fmt_opt(v) +
                                (r != nullptr ? ", " + std::to_string(r->at("n_valid").get<std::size_t>()) +
                                                    " decided of 200"
                                              : std::string())});
  }
  {  // 10
    const auto bytes = metrics_bytes(scir.dir);
    const auto hashes = checkpoint_hashes(scir.dir, iterations);
    const bool rerun_ok = scir.ok && h.rerun(scir);
    const bool same = rerun_ok && !bytes.empty() &&
                      hashes.size() == static_cast<std::size_t>(iterations) &&
                      metrics_bytes(scir.dir) == bytes &&
                      checkpoint_hashes(scir.dir, iterations) == hashes;
    report("determinism", {same, std::to_string(bytes.size()) + " metrics files and " +
                                     std::to_string(hashes.size()) + " checkpoint hashes " +
                                     (same ? "identical" : "differ") + " across two executions"});
  }
  {  // 11
    const std::vector<std::pair<std::string, std::string>> flags{
        {"no_consistency", "train.no_consistency"},
        {"no_dcpo_gate", "train.no_dcpo_gate"},
        {"single_judge_prompt", "train.single_judge_prompt"},
        {"no_length_reg", "train.no_length_reg"},
        {"no_adaptive_ref", "train.no_adaptive_ref"}};
    bool all_ok = true;
    std::string detail;
    std::optional<double> no_cons_gain;
    for (const auto& [name, key] : flags) {
      const Run r = h.run("ablation_" + name, {{key, "true"}});
      const auto s = consistency_series(read_records(r.dir), iterations);
      const bool logged = fs::exists(r.dir / "metrics" / "final.jsonl");
      all_ok = all_ok && r.ok && logged;
      if (name == "no_consistency") no_cons_gain = gain(s);
      detail += name + " " + (r.ok && logged ? "ok" : "failed") + " gain " + fmt_opt(gain(s)) + "; ";
    }
    const auto scir_gain = gain(scir_series);
    const bool beats = scir_gain && no_cons_gain && *scir_gain > *no_cons_gain;
    report("ablations", {all_ok && beats, detail + "scir gain " + fmt_opt(scir_gain)});
  }

  const auto failed = std::count_if(results.begin(), results.end(),
                                    [](const auto& r) { return !r.second.pass; });
  emit(std::to_string(results.size() - static_cast<std::size_t>(failed)) + " of " +
       std::to_string(results.size()) + " criteria passed");
  if (report_file != nullptr) {
    std::fclose(report_file);
    return 0;
  }
  return failed == 0 ? 0 : 1;
}
