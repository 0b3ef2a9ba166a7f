// Acceptance runner: one PASS/FAIL line per criterion. `--only 1,2,9`
// restricts the run; the exit status is non-zero when any selected
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cprnn/cells.hpp"
#include "cprnn/constructions.hpp"
#include "cprnn/cp.hpp"
#include "cprnn/data.hpp"
#include "cprnn/random.hpp"
#include "cprnn/tensor.hpp"
#include "cprnn/training.hpp"
#include "cprnn/witness.hpp"
#include "test_support.hpp"

namespace {

using namespace cprnn;

struct Outcome {
  bool pass = false;
  std::string detail;
  // Every number the criterion computed, for the determinism check.
  std::vector<double> fingerprint;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Index pick(std::mt19937_64& rng, Index lo, Index hi) { return testing::uniform_index(rng, lo, hi); }

const ModelKind kFamilies[] = {ModelKind::rnn, ModelKind::second_order, ModelKind::cprnn, ModelKind::cpbirnn,
                               ModelKind::mirnn};

Outcome hadamard_identity() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto rng = make_rng(seed, {1});
    const Index n = pick(rng, 1, 8), d = pick(rng, 1, 12), r = pick(rng, 1, 16);
    const CpFactors f(testing::random_matrix(n, r, rng), testing::random_matrix(d, r, rng),
                      testing::random_matrix(n, r, rng));
    const Vector h = testing::random_vector(n, rng);
    const Vector x = testing::random_vector(d, rng);
    const double err = (factored_contract(f, h, x) - bilinear_contract(reconstruct(f), h, x)).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    o.fingerprint.push_back(err);
  }
  o.pass = worst <= 1e-12;
  o.detail = "100 instances, max abs error " + fmt(worst);
  return o;
}

Outcome construction_equivalence() {
  Outcome o;
  const EquivalenceOptions opts{20, 10, 0};
  const Activation acts[] = {Activation::tanh, Activation::linear, Activation::relu};
  std::map<std::string, double> worst;
  auto record = [&](const std::string& name, double cert) {
    worst[name] = std::max(worst[name], cert);
    o.fingerprint.push_back(cert);
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = make_rng(seed, {2});
    const Index n = pick(rng, 1, 4), d = pick(rng, 1, 5), r = pick(rng, 1, 4);
    const Activation act = acts[seed % 3];
    EquivalenceOptions o_seed = opts;
    o_seed.seed = seed;

    const auto cp = std::get<CpRnnParams>(random_cell(ModelKind::cprnn, n, d, r, act, seed));
    record("pad_rank", equivalence_certificate(cp, pad_rank(cp), o_seed));

    const auto so = std::get<SecondOrderParams>(random_cell(ModelKind::second_order, n, d, 0, act, seed));
    record("saturate_to_2rnn", equivalence_certificate(so, saturate_to_2rnn(so), o_seed));

    const auto bi = std::get<CpRnnParams>(random_cell(ModelKind::cpbirnn, n, d, r, act, seed));
    const Matrix w = testing::random_matrix(pick(rng, 1, 3), n, rng);
    const WithReadout padded = pad_hidden(bi, w);
    record("pad_hidden", equivalence_certificate(bi, padded.model, o_seed, &w, &padded.readout));

    // reduce_hidden: linear CPBIRNN at hidden size n_small + 1 with R <= n_small.
    const Index n_small = std::max<Index>(n, 1);
    const Index r_small = std::min(r, n_small);
    const auto big =
        std::get<CpRnnParams>(random_cell(ModelKind::cpbirnn, n_small + 1, d, r_small, Activation::linear, seed));
    const Matrix wb = testing::random_matrix(pick(rng, 1, 3), n_small + 1, rng);
    const WithReadout reduced = reduce_hidden(big, wb);
    record("reduce_hidden", equivalence_certificate(big, reduced.model, o_seed, &wb, &reduced.readout));

    const auto mi = std::get<MiRnnParams>(random_cell(ModelKind::mirnn, n, d, 0, act, seed));
    record("embed_mirnn", equivalence_certificate(mi, embed_mirnn(mi), o_seed));

    const auto rnn = std::get<RnnParams>(random_cell(ModelKind::rnn, n, d, 0, act, seed));
    record("rnn_as_cprnn", equivalence_certificate(rnn, rnn_as_cprnn(rnn), o_seed));
  }
  double overall = 0.0;
  std::ostringstream detail;
  detail << "10 instances each;";
  for (const auto& [name, v] : worst) {
    overall = std::max(overall, v);
    detail << ' ' << name << '=' << fmt(v);
  }
  o.pass = overall <= 1e-10;
  o.detail = detail.str();
  return o;
}

// The CPBIRNN set shared by the witness and rank-bound criteria.
std::vector<CpRnnParams> witness_cpbirnns() {
  std::vector<CpRnnParams> out;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = make_rng(seed, {3});
    const Index n = pick(rng, 1, 4), d = pick(rng, 1, 5), r = pick(rng, 1, 4);
    const Activation act = seed % 2 == 0 ? Activation::tanh : Activation::linear;
    out.push_back(std::get<CpRnnParams>(random_cell(ModelKind::cpbirnn, n, d, r, act, seed)));
  }
  return out;
}

Outcome witness_correctness() {
  Outcome o;
  double worst_h = 0.0;
  for (const CpRnnParams& p : witness_cpbirnns()) {
    const double err = max_abs_diff(witness_closed_form(p).tensor, witness_bruteforce(p).tensor);
    worst_h = std::max(worst_h, err);
    o.fingerprint.push_back(err);
  }
  double worst_a = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = make_rng(seed, {4});
    const Index n = pick(rng, 1, 4), d = pick(rng, 1, 5), r = pick(rng, 1, 4);
    const auto p = std::get<CpRnnParams>(random_cell(ModelKind::cprnn, n, d, r, Activation::linear, seed));
    const double err = max_abs_diff(witness_alpha(p).tensor, witness_alpha_bruteforce(p).tensor);
    worst_a = std::max(worst_a, err);
    o.fingerprint.push_back(err);
  }
  o.pass = worst_h <= 1e-12 && worst_a <= 1e-12;
  o.detail = "S_h max error " + fmt(worst_h) + " over 50, S_alpha max error " + fmt(worst_a) + " over 50";
  return o;
}

Outcome rank_bound_and_attainment() {
  Outcome o;
  // Witnesses with R > n have a rank-deficient first factor and sit off the
  // generic rank; ALS needs far more sweeps than the default there.
  AlsConfig cfg;
  cfg.restarts = 20;
  cfg.max_iters = 20000;
  int violations = 0;
  for (const CpRnnParams& p : witness_cpbirnns()) {
    WitnessTensor w = witness_bruteforce(p);
    const RankBoundResult r = rank_bound_check(w, cfg, 1e-6);
    if (!r.report.converged || !r.bound_holds) ++violations;
    o.fingerprint.push_back(r.report.estimated_rank);
    for (const auto& [rank, fit] : r.report.fits) o.fingerprint.push_back(fit);
  }
  std::ostringstream detail;
  detail << "bound violations " << violations << "/50; attained";
  bool attained = true;
  for (Index R = 1; R <= 3; ++R) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const CellParams cell = random_cell(ModelKind::cpbirnn, 2, 3, R, Activation::tanh, 1000 * R + seed);
      WitnessTensor w = witness_bruteforce(cell);
      AlsConfig c = cfg;
      c.seed = seed;
      const RankBoundResult r = rank_bound_check(w, c, 1e-6);
      if (r.report.estimated_rank == R) ++hits;
      o.fingerprint.push_back(r.report.estimated_rank);
    }
    detail << " R=" << R << ':' << hits << "/20";
    attained = attained && hits >= 18;
  }
  o.pass = violations == 0 && attained;
  o.detail = detail.str();
  return o;
}

Outcome left_invertible_invariance() {
  Outcome o;
  AlsConfig cfg;
  cfg.restarts = 5;
  int agree = 0;
  std::ostringstream ranks;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto rng = make_rng(seed, {5});
    const Index d1 = pick(rng, 2, 3), d2 = pick(rng, 2, 4), d3 = pick(rng, 2, 4), r = pick(rng, 1, 3);
    const Index m = pick(rng, d1, 4);
    const Matrix A = testing::random_matrix(d1, r, rng);
    const Matrix B = testing::random_matrix(d2, r, rng);
    const Matrix C = testing::random_matrix(d3, r, rng);
    Matrix M = testing::random_matrix(m, d1, rng);
    while (Eigen::FullPivLU<Matrix>(M).rank() < d1) M = testing::random_matrix(m, d1, rng);
    const int max_rank = static_cast<int>(std::min<Index>(r + 2, max_rank_upper_bound(m, d2, d3)));
    AlsConfig c = cfg;
    c.seed = seed;
    const RankReport plain = estimate_cp_rank(reconstruct(CpFactors(A, B, C)), max_rank, c, 1e-6);
    const RankReport mapped = estimate_cp_rank(reconstruct(CpFactors(M * A, B, C)), max_rank, c, 1e-6);
    if (plain.estimated_rank == mapped.estimated_rank) ++agree;
    ranks << ' ' << plain.estimated_rank << '/' << mapped.estimated_rank;
    o.fingerprint.push_back(plain.estimated_rank);
    o.fingerprint.push_back(mapped.estimated_rank);
  }
  o.pass = agree >= 9;
  o.detail = std::to_string(agree) + "/10 agree (plain/mapped:" + ranks.str() + ")";
  return o;
}

Outcome gradient_correctness() {
  Outcome o;
  double worst = 0.0;
  std::string where;
  for (ModelKind k : kFamilies)
    for (Activation act : {Activation::tanh, Activation::linear}) {
      const std::uint64_t seed = 60 + static_cast<std::uint64_t>(k) * 2 + (act == Activation::tanh ? 0 : 1);
      const LmModel m = testing::random_lm(k, 3, 5, 4, act, seed);
      auto rng = make_rng(seed, {6});
      const TokenMatrix batch = testing::random_tokens(2, 4 + 1, 5, rng);
      const testing::FdReport r = testing::finite_difference_check(m, batch, 1e-6);
      o.fingerprint.push_back(r.max_rel_error);
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = std::string(to_string(k)) + "/" + std::string(to_string(act)) + " " + r.worst_block;
      }
    }
  o.pass = worst <= 1e-5;
  o.detail = "5 families x {tanh, linear}, max relative error " + fmt(worst) + " (" + where + ")";
  return o;
}

Outcome image_strictness() {
  Outcome o;
  bool ok = true;
  std::ostringstream detail;
  detail << "numerical rank of a1 image for R=1..5:";
  for (Index R = 1; R <= 5; ++R) {
    Index seen = -1;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const CellParams cell = random_cell(ModelKind::cpbirnn, 4, 6, R, Activation::tanh, 700 + 10 * R + seed);
      const Index rank = numerical_rank(first_preactivation_image(cell));
      o.fingerprint.push_back(static_cast<double>(rank));
      ok = ok && rank == std::min<Index>(R, 4);
      seen = seed == 0 ? rank : (rank == seen ? seen : -1);
    }
    detail << ' ' << seen;
  }
  o.pass = ok;
  o.detail = detail.str() + " (expected 1 2 3 4 4, 5 draws each)";
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct TrendRun {
  double cp1 = 0.0, cp8 = 0.0, cp64 = 0.0, rnn = 0.0;
  double conversion_gap = 0.0;
};

class TrendExperiment {
 public:
  static constexpr Index kHidden = 64;

  TrendExperiment() {
    const std::string text = synthetic_corpus(200000, 0);
    const Vocab vocab = build_vocab(text);
    corpus_ = split(encode(text, vocab), vocab, {0.9, 0.05, 0.05});
    cfg_.batch_size = 32;
    cfg_.max_epochs = 15;
    const Index v = corpus_.vocab.size();
    const Index target = closed_form_param_count(ModelKind::cprnn, kHidden, v, 8, v);
    rnn_hidden_ = 1;
    for (Index n = 1; n <= 4 * kHidden; ++n)
      if (std::abs(closed_form_param_count(ModelKind::rnn, n, v, 0, v) - target) <
          std::abs(closed_form_param_count(ModelKind::rnn, rnn_hidden_, v, 0, v) - target))
        rnn_hidden_ = n;
  }

  Index rnn_hidden() const { return rnn_hidden_; }

  double valid_bpc(ModelKind kind, Index n, Index rank, std::uint64_t seed) const {
    TrainConfig cfg = cfg_;
    cfg.seed = seed;
    const Index v = corpus_.vocab.size();
    const TrainResult r = train(init_params(kind, n, v, rank, Activation::tanh, seed), corpus_.train, corpus_.valid, cfg);
    return r.best_valid_nll / std::log(2.0);
  }

  // Trains a 2RNN, converts it, and returns |test BPC before - after|.
  double conversion_gap(std::uint64_t seed) const {
    TrainConfig cfg = cfg_;
    cfg.seed = seed;
    const Index v = corpus_.vocab.size();
    const TrainResult r =
        train(init_params(ModelKind::second_order, 16, v, 0, Activation::tanh, seed), corpus_.train, corpus_.valid, cfg);
    LmModel converted = r.best;
    converted.cell = saturate_to_2rnn(std::get<SecondOrderParams>(r.best.cell));
    const double before = evaluate(r.best, corpus_.test, cfg.batch_size).bpc;
    const double after = evaluate(converted, corpus_.test, cfg.batch_size).bpc;
    return std::abs(before - after);
  }

  TrendRun run(std::uint64_t seed) const {
    TrendRun t;
    t.cp1 = valid_bpc(ModelKind::cprnn, kHidden, 1, seed);
    t.cp8 = valid_bpc(ModelKind::cprnn, kHidden, 8, seed);
    t.cp64 = valid_bpc(ModelKind::cprnn, kHidden, 64, seed);
    t.rnn = valid_bpc(ModelKind::rnn, rnn_hidden_, 0, seed);
    t.conversion_gap = conversion_gap(seed);
    std::cerr << "  seed " << seed << ": cprnn R=1 " << t.cp1 << ", R=8 " << t.cp8 << ", R=64 " << t.cp64 << ", rnn(n="
              << rnn_hidden_ << ") " << t.rnn << ", 2rnn conversion gap " << t.conversion_gap << '\n';
    return t;
  }

 private:
  Corpus corpus_;
  TrainConfig cfg_;
  Index rnn_hidden_ = 0;
};

Outcome training_trends() {
  Outcome o;
  const TrendExperiment exp;
  std::vector<TrendRun> runs;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) runs.push_back(exp.run(seed));

  auto med = [&](double TrendRun::*field) {
    std::vector<double> v;
    for (const TrendRun& r : runs) v.push_back(r.*field);
    return median(v);
  };
  const double m1 = med(&TrendRun::cp1), m8 = med(&TrendRun::cp8), m64 = med(&TrendRun::cp64);
  const bool rank_trend = m8 <= m1 + 0.02 && m64 <= m8 + 0.02;
  double gap = 0.0;
  for (const TrendRun& r : runs) gap = std::max(gap, r.conversion_gap);
  const bool conversion = gap <= 1e-9;

  double m8_c = m8, mrnn = med(&TrendRun::rnn);
  std::string seeds_note = "3 seeds";
  if (!(m8_c < mrnn)) {
    std::cerr << "  CPRNN R=8 did not beat the matched RNN over 3 seeds; escalating to 5\n";
    std::vector<double> cp8, rnn;
    for (const TrendRun& r : runs) {
      cp8.push_back(r.cp8);
      rnn.push_back(r.rnn);
    }
    for (std::uint64_t seed = 4; seed <= 5; ++seed) {
      cp8.push_back(exp.valid_bpc(ModelKind::cprnn, TrendExperiment::kHidden, 8, seed));
      rnn.push_back(exp.valid_bpc(ModelKind::rnn, exp.rnn_hidden(), 0, seed));
    }
    m8_c = median(cp8);
    mrnn = median(rnn);
    seeds_note = "5 seeds after escalation";
  }
  const bool beats_rnn = m8_c < mrnn;

  o.pass = rank_trend && conversion && beats_rnn;
  o.detail = "(a) median valid BPC R=1 " + fmt(m1) + ", R=8 " + fmt(m8) + ", R=64 " + fmt(m64) +
             (rank_trend ? " ok" : " NOT monotone") + "; (b) conversion gap " + fmt(gap) + (conversion ? " ok" : " too large") +
             "; (c) R=8 " + fmt(m8_c) + " vs rnn(n=" + std::to_string(exp.rnn_hidden()) + ") " + fmt(mrnn) + " over " +
             seeds_note + (beats_rnn ? " ok" : " NOT lower");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "hadamard identity", 5, hadamard_identity},
      {2, "construction equivalence", 30, construction_equivalence},
      {3, "witness correctness", 30, witness_correctness},
      {4, "rank bound and attainment", 120, rank_bound_and_attainment},
      {5, "left-invertible invariance", 60, left_invertible_invariance},
      {6, "gradient correctness", 60, gradient_correctness},
      {7, "a1 image strictness", 5, image_strictness},
      {8, "training trends", 1800, training_trends},
  };
  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  bool all_pass = true;
  std::map<int, std::vector<double>> fingerprints;
  auto report = [&](int id, const char* name, bool pass, const std::string& detail, double secs) {
    std::printf("criterion %d [%s]: %s  %s (%.2f s)\n", id, name, pass ? "PASS" : "FAIL", detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && pass;
  };

  for (const Criterion& c : criteria) {
    if (!wanted(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = c.run();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    if (!in_time) o.detail += "; over the " + fmt(c.budget_s) + " s budget";
    report(c.id, c.name, o.pass && in_time, o.detail, secs);
    fingerprints[c.id] = std::move(o.fingerprint);
  }

  if (wanted(9)) {
    const auto t0 = std::chrono::steady_clock::now();
    int stable = 0;
    std::string unstable;
    for (const Criterion& c : criteria) {
      if (c.id > 7) continue;
      if (!fingerprints.count(c.id)) fingerprints[c.id] = c.run().fingerprint;
      if (same_bits(fingerprints[c.id], c.run().fingerprint)) ++stable;
      else unstable += " " + std::to_string(c.id);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(9, "determinism", stable == 7,
           std::to_string(stable) + "/7 criteria bit-identical on rerun" + (unstable.empty() ? "" : "; unstable:" + unstable),
           secs);
  }
  return all_pass ? 0 : 1;
}
