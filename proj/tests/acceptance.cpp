// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Every check compares against an independent oracle or
// the generator's ground truth; nothing is relaxed to force a pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aim/artifact.hpp"
#include "aim/commands.hpp"
#include "aim/metrics.hpp"
#include "aim/optim.hpp"
#include "aim/search.hpp"
#include "aim/synth.hpp"
#include "support/equivalence.hpp"
#include "support/gradient_suite.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace aim;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// The synthetic benchmark: 10 fields, 5 planted second-order tuples, 100k
// rows, split 80/10/10.
struct Benchmark {
  Dataset data;
  std::vector<PlantedTuple> planted;
};

Benchmark benchmark(std::uint64_t seed, std::size_t noise_fields = 0, bool hub = false) {
  SynthConfig c;
  c.seed = seed;
  c.noise_fields = noise_fields;
  c.use_hub = hub;
  c.hub = 0;
  auto result = generate_synthetic(c);
  return {split(std::move(result.data), 0.8, 0.1, 0.1, seed), std::move(result.planted)};
}

// Default search settings at a desk-scale embedding width.
SearchSettings bench_settings(std::uint64_t seed) {
  SearchSettings s;
  s.seed = seed;
  s.model.embedding_dim = 8;
  return s;
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0, cases = 0;
  for (const auto& c : testing::gradient_cases()) {
    const auto r = testing::run_gradient_case(c);
    ++cases;
    checked += r.checked;
    if (r.max_rel_error > worst) worst = r.max_rel_error, where = c.label() + " " + r.worst;
  }
  const double secs = seconds_since(start);
  return {worst < 1e-4 && secs < 60.0,
          fmt("%zu configurations, %zu scalars, max relative error %.2e (%s), %.1f s", cases, checked, worst,
              where.c_str(), secs)};
}

Outcome grda_prox() {
  Rng rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    GrdaState state;
    state.config = {0.01 + rng.uniform(), 0.5 * rng.uniform(), 0.05 + 0.9 * rng.uniform()};
    state.alpha0 = Tensor::vector({rng.uniform() * 2.0 - 1.0});
    state.accumulator = Tensor::vector({0.5 * rng.normal()});
    state.step = rng.below(200);
    const double grad = rng.normal();
    // Independent evaluation of v = alpha0 - (accumulator + gamma * grad)
    // and g(t, gamma) = c * gamma^(1/2) * (t * gamma)^mu.
    const double v = state.alpha0[0] - (state.accumulator[0] + state.config.lr * grad);
    const double g = state.config.c * std::sqrt(state.config.lr) *
                     std::pow(static_cast<double>(state.step) * state.config.lr, state.config.mu);
    const double expected = testing::grda_grid_oracle(v, g);
    const double got = grda_step(state, Tensor::vector({grad}))[0];
    worst = std::max(worst, std::abs(got - expected));
  }
  return {worst <= 1e-5, fmt("1000 random (v, g) pairs, max |closed form - brute force| = %.2e", worst)};
}

Outcome selection() {
  const auto start = Clock::now();
  double recall_sum = 0.0, pruned_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto b = benchmark(seed);
    const auto r = run_stage1(b.data, bench_settings(seed));
    std::set<InteractionTuple> survivors;
    for (const auto& p : r.survivors) survivors.insert(p.tuple);
    std::size_t hits = 0;
    for (const auto& p : b.planted) hits += survivors.contains(p.tuple);
    const double recall = static_cast<double>(hits) / static_cast<double>(b.planted.size());
    const double pruned = 1.0 - static_cast<double>(survivors.size()) / 45.0;
    recall_sum += recall;
    pruned_sum += pruned;
    per_seed += fmt(" [seed %llu: %zu/5, %zu/45 kept]", static_cast<unsigned long long>(seed), hits, survivors.size());
  }
  const double secs = seconds_since(start);
  const double recall = recall_sum / 5.0, pruned = pruned_sum / 5.0;
  return {recall >= 0.8 && pruned >= 0.5 && secs < 600.0,
          fmt("mean recall %.2f, mean pruned %.1f%% of 45,%s %.1f s", recall, 100.0 * pruned, per_seed.c_str(), secs)};
}

Outcome pruned_retrain() {
  const auto start = Clock::now();
  bool ok = true;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto b = benchmark(seed);
    const auto settings = bench_settings(seed);
    const auto s1 = run_stage1(b.data, settings);
    const auto s2 = run_stage2(b.data, s1.survivors, settings);
    const auto artifact = extract_artifact(b.data.schema(), s1.survivors, s2.retained, settings);
    const auto pruned = run_stage3(b.data, artifact, settings);
    const auto full = run_stage3(b.data, identity_artifact(b.data.schema(), settings.model), settings);
    const double gap = pruned.test.logloss / full.test.logloss - 1.0;
    const auto p_count = pruned.model.parameter_count(), f_count = full.model.parameter_count();
    ok = ok && pruned.has_test && full.has_test && gap <= 0.01 && p_count < f_count;
    per_seed += fmt(" [seed %llu: logloss %.5f vs %.5f (%+.2f%%), params %zu vs %zu]",
                    static_cast<unsigned long long>(seed), pruned.test.logloss, full.test.logloss, 100.0 * gap,
                    p_count, f_count);
  }
  const double secs = seconds_since(start);
  return {ok && secs < 900.0, fmt("pruned vs keep-everything on test:%s %.1f s", per_seed.c_str(), secs)};
}

Outcome complexity() {
  bool ok = true;
  std::string detail;
  Rng rng(5);
  for (std::size_t n : {5u, 10u, 24u}) {
    const std::size_t k = n / 2, bound = n * n / 2;
    std::vector<std::size_t> singles(n);
    std::iota(singles.begin(), singles.end(), 0);
    // Worst case over random alpha rankings.
    std::size_t largest = 0;
    for (int trial = 0; trial < 100; ++trial) {
      auto prev = enumerate_second_order(n);
      for (std::size_t p : {3u, 4u}) {
        std::vector<std::pair<InteractionTuple, double>> scored;
        for (const auto& t : prev) scored.emplace_back(t, rng.normal());
        const auto pool = combine(top_k_by_alpha(scored, k), singles);
        largest = std::max(largest, pool.size());
        ok = ok && pool.size() <= bound;
        prev = pool;
      }
    }
    // Measured gate counts from stage 1 over orders 2..4.
    SynthConfig c;
    c.fields = n;
    c.vocab = 5;
    c.planted = 2;
    c.rows = 400;
    c.seed = n;
    const auto data = split(generate_synthetic(c).data, 0.8, 0.1, 0.1, 1);
    SearchSettings s;
    s.model.embedding_dim = 2;
    s.model.max_order = 4;
    s.model.batch_norm = false;
    s.stage1.epochs = 1;
    s.stage1.optim.grda.c = 0.0;  // keep every gate so each order is fully populated
    s.batch_size = 64;
    const auto r = run_stage1(data, s);
    const std::size_t m = s.model.kinds.size();
    std::string gates;
    for (const auto& o : r.orders) {
      ok = ok && o.candidates <= bound && o.gates <= m * bound;
      gates += fmt("%s%zu", gates.empty() ? "" : "/", o.gates);
    }
    ok = ok && r.orders.size() == 3;
    const double naive4 = static_cast<double>(n) * (n - 1) * (n - 2) * (n - 3) / 24.0;
    detail += fmt(" [n=%zu: max pool %zu <= %zu, gates per order %s, C(n,4)=%.0f]", n, largest, bound, gates.c_str(),
                  naive4);
  }
  return {ok, "pool <= n^2/2 and gates <= m*n^2/2 per order:" + detail};
}

Outcome eds() {
  const auto start = Clock::now();
  std::size_t wins = 0;
  bool maps_ok = true, counts_ok = true;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // Field 1 sits in every planted tuple; field 10 carries no signal.
    const auto b = benchmark(seed, 1, true);
    const auto settings = bench_settings(seed);
    // Every pair under every IF competes, so the noise field is gated on
    // the same footing as the predictive one.
    std::vector<SelectedPair> all;
    const double alpha = 1.0 / static_cast<double>(settings.model.kinds.size());
    for (const auto& t : enumerate_second_order(b.data.field_count())) {
      for (auto kind : settings.model.kinds) all.push_back({t, kind, alpha});
    }
    const auto s2 = run_stage2(b.data, all, settings);
    const std::size_t predictive = s2.retained[0].size(), noise = s2.retained[9].size();
    wins += noise <= predictive;
    per_seed += fmt(" [seed %llu: d_noise=%zu d_predictive=%zu]", static_cast<unsigned long long>(seed), noise,
                    predictive);

    // Map_i round trip and zero-fill on the extracted artifact.
    const auto artifact = extract_artifact(b.data.schema(), all, s2.retained, settings);
    Rng rng(seed);
    for (const auto& phi : artifact.retained) {
      std::vector<double> compact(phi.size());
      for (auto& x : compact) x = rng.normal();
      const auto wide = scatter(compact, phi, artifact.embedding_dim);
      maps_ok = maps_ok && gather(wide, phi) == compact;
      for (std::size_t k = 0; k < wide.size(); ++k) {
        if (!std::binary_search(phi.begin(), phi.end(), k)) maps_ok = maps_ok && wide[k] == 0.0;
      }
    }
    const auto model = build_retrain_model(b.data.schema(), artifact, settings.retrain_model(), seed);
    counts_ok = counts_ok &&
                model.parameter_count() == analytic_parameter_count(b.data.schema(), artifact, settings.retrain_model());
  }
  const double secs = seconds_since(start);
  return {wins >= 4 && maps_ok && counts_ok,
          fmt("noise d_i <= predictive d_i in %zu/5 runs,%s scatter/gather %s, widened parameter count %s, %.1f s",
              wins, per_seed.c_str(), maps_ok ? "exact" : "MISMATCH", counts_ok ? "unchanged" : "CHANGED", secs)};
}

Outcome metric_oracles() {
  Rng rng(7);
  std::size_t auc_mismatch = 0;
  double worst_logloss = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scores(1000), logits(1000);
    std::vector<int> labels(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      // Coarse scores guarantee plenty of ties.
      scores[i] = static_cast<double>(rng.below(trial % 2 ? 20 : 100000)) / 7.0;
      labels[i] = static_cast<int>(rng.below(2));
      logits[i] = rng.uniform() * 20.0 - 10.0;
    }
    auc_mismatch += auc(scores, labels) != testing::pairwise_auc(scores, labels);
    long double direct = 0.0L;
    for (std::size_t i = 0; i < 1000; ++i) direct += testing::direct_logloss(logits[i], labels[i]);
    direct /= 1000.0L;
    worst_logloss = std::max(worst_logloss, std::abs(mean_logloss(logits, labels) - static_cast<double>(direct)));
  }
  return {auc_mismatch == 0 && worst_logloss <= 1e-12,
          fmt("20 x 1000 instances: AUC mismatches vs pairwise oracle %zu, max logloss deviation %.2e", auc_mismatch,
              worst_logloss)};
}

Outcome equivalences() {
  std::size_t bad = 0;
  double gap = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = testing::textbook_fm(seed);
    bad += r.mismatches;
    gap = std::max(gap, r.max_fast_gap);
  }
  const std::size_t fm_bad = bad;
  std::size_t gate_bad = 0, beta_bad = 0;
  for (Head head : {Head::fm, Head::deepfm, Head::ipnn}) {
    for (bool bn : {true, false}) gate_bad += testing::gate_zero_mismatches(head, bn);
    beta_bad += testing::beta_zero_mismatches(head);
  }
  const std::size_t mlp_bad = testing::zero_mlp_mismatches();
  return {fm_bad == 0 && gate_bad == 0 && beta_bad == 0 && mlp_bad == 0,
          fmt("differing logits: textbook FM %zu, gate-zero %zu, beta-zero %zu, zero-MLP DeepFM %zu", fm_bad, gate_bad,
              beta_bad, mlp_bad)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "aim_acceptance_determinism";
  fs::remove_all(root);
  SynthConfig synth;
  synth.rows = 20000;
  synth.seed = 9;
  cmd_synth(synth, (root / "data").string());
  std::vector<std::string> artifacts, metrics, reports;
  for (const char* run : {"a", "b"}) {
    RunConfig config;
    config.data_path = (root / "data" / "data.svm").string();
    config.search = bench_settings(9);
    config.output_dir = (root / run).string();
    cmd_run(config);
    artifacts.push_back(slurp(root / run / "artifact.json"));
    metrics.push_back(slurp(root / run / "metrics.jsonl"));
    reports.push_back(slurp(root / run / "retrain" / "report.json"));
  }
  const bool same = !artifacts[0].empty() && !metrics[0].empty() && artifacts[0] == artifacts[1] &&
                    metrics[0] == metrics[1] && reports[0] == reports[1];
  return {same, fmt("two full runs: artifact.json %s (%zu bytes), metrics.jsonl %s (%zu bytes)",
                    artifacts[0] == artifacts[1] ? "identical" : "DIFFERENT", artifacts[0].size(),
                    metrics[0] == metrics[1] ? "identical" : "DIFFERENT", metrics[0].size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"GRDA prox oracle", grda_prox},
      {"synthetic interaction selection", selection},
      {"pruned retrain quality", pruned_retrain},
      {"candidate pool complexity", complexity},
      {"embedding dimension search", eds},
      {"metric oracles", metric_oracles},
      {"equivalence suite", equivalences},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
