// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes. Run a subset with e.g. `mtseq_acceptance 3 4`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "mtseq/cli.hpp"
#include "mtseq/corpus.hpp"
#include "mtseq/decoding.hpp"
#include "mtseq/evaluation.hpp"
#include "mtseq/models.hpp"
#include "mtseq/synthetic.hpp"
#include "mtseq/training.hpp"
#include "mtseq/word_discovery.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace mtseq;
using models::Architecture;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// ------------------------------------------------------------ 1. gradients

Outcome criterion1() {
  const auto t0 = Clock::now();
  constexpr double tol = 1e-4;
  double worst = 0;
  std::string worst_name, failures;
  auto note = [&](const std::string& name, const testing::GradReport& r) {
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_name = name + " (" + r.worst + ")";
    }
    if (!(r.max_rel_error < tol)) failures += " " + name;
  };
  std::size_t primitives = 0, scalars = 0;
  for (const auto& p : testing::primitive_gradchecks()) {
    note(p.name, p.report);
    ++primitives;
    scalars += p.report.checked;
  }
  struct Arch {
    std::string name;
    Architecture kind;
    bool recon;
    models::ScoreConfig score;
  };
  const std::vector<Arch> archs = {
      {"single", Architecture::single, false, {}},
      {"multitask", Architecture::multitask, false, {}},
      {"cascade+L_inv", Architecture::cascade, true, {0.5, 0.0, 0.2}},
      {"triangle+L_trans", Architecture::triangle, false, {0.5, 0.2, 0.0}},
  };
  for (const auto& a : archs) {
    const auto r = testing::architecture_gradcheck(a.kind, a.recon, a.score);
    note(a.name, r);
    scalars += r.checked;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = failures.empty() && secs < 60.0;
  o.detail = std::to_string(primitives) + " primitives + 4 architectures, " + std::to_string(scalars) +
             " entries; max rel err " + num(worst, 3) + " at " + worst_name + "; " + num(secs, 3) + " s";
  if (!failures.empty()) o.detail += "; failing:" + failures;
  return o;
}

// ------------------------------------------------------------ 2. regularizers

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

Outcome criterion2() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = dim(rng), m1 = dim(rng), m2 = dim(rng);
    const Tensor a1 = testing::random_stochastic(m1, n, rng);
    const Tensor a2 = testing::random_stochastic(m2, n, rng);
    const Tensor a12 = testing::random_stochastic(m2, m1, rng);
    const Tensor a12_inv = testing::random_stochastic(n, m1, rng);
    const double score = -std::uniform_real_distribution<double>(0.5, 20.0)(rng);
    const double w = std::uniform_real_distribution<double>(0.0, 1.0)(rng);

    // Brute force: explicit loops on plain arrays.
    Mat d = testing::matmul_oracle(to_mat(a12), to_mat(a1));
    const Mat A2 = to_mat(a2);
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t j = 0; j < d[i].size(); ++j) d[i][j] -= A2[i][j];
    const double trans_oracle = testing::frob_sq(d);
    Mat e = testing::matmul_oracle(to_mat(a1), to_mat(a12_inv));
    for (std::size_t i = 0; i < e.size(); ++i) e[i][i] -= 1.0;
    const double inv_oracle = testing::frob_sq(e);

    Tape tape;
    const Var s = tape.constant(Tensor::scalar(score));
    const double lt = models::loss_transitivity(s, tape.constant(a1), tape.constant(a2), tape.constant(a12), w).item();
    const double li = models::loss_invertibility(s, tape.constant(a1), tape.constant(a12_inv), w).item();
    worst = std::max({worst, std::abs(lt - (score - w * trans_oracle)), std::abs(li - (score - w * inv_oracle)),
                      std::abs(models::transitivity_penalty(a1, a2, a12) - trans_oracle),
                      std::abs(models::invertibility_penalty(a1, a12_inv) - inv_oracle)});
  }
  // Hand cases: penalty 4 at weight 0.2 lowers the objective by 0.8.
  Tape tape;
  const Tensor eye = Tensor::identity(2), swap = Tensor::matrix(2, 2, {0, 1, 1, 0});
  const Var s = tape.constant(Tensor::scalar(-3.0));
  const double hand_t =
      models::loss_transitivity(s, tape.constant(eye), tape.constant(eye), tape.constant(swap), 0.2).item();
  const double hand_i = models::loss_invertibility(s, tape.constant(eye), tape.constant(swap), 0.2).item();
  const Tensor half = Tensor::matrix(2, 2, {0.5, 0.5, 0.5, 0.5});
  const double uniform_pen = models::invertibility_penalty(half, half);
  const double exact_t = models::loss_transitivity(s, tape.constant(eye), tape.constant(eye), tape.constant(eye), 0.2).item();
  const double hand_err = std::max({std::abs(hand_t - (-3.8)), std::abs(hand_i - (-3.8)),
                                    std::abs(uniform_pen - 1.0), std::abs(exact_t - (-3.0))});
  Outcome o;
  o.pass = worst <= 1e-10 && hand_err <= 1e-12;
  o.detail = "20 random sets, max |lib - brute force| = " + num(worst, 3) + "; hand cases max err " + num(hand_err, 3);
  return o;
}

// ------------------------------------------------------------ 3. decoding

Outcome criterion3() {
  std::string detail;
  bool pass = true;
  const decoding::BeamConfig wide{27, 0.8, 3, decoding::SearchMode::joint, false};

  // (a) Random table models, vocab 3 (2 symbols + EOS), length <= 3.
  std::mt19937_64 rng(99);
  std::size_t table_cases = 0;
  for (int trial = 0; trial < 25; ++trial) {
    testing::TableScorer sc(3, 2);
    for (const auto& pre : std::vector<std::vector<int>>{{}, {0}, {1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}}) {
      std::vector<double> p(3);
      std::uniform_real_distribution<double> u(0.05, 1.0);
      double z = 0;
      for (auto& x : p) z += (x = u(rng));
      for (auto& x : p) x /= z;
      sc.set(pre, p);
    }
    auto found = decoding::beam_search(sc, wide).hypotheses;
    auto all = testing::complete_sequences(3, 2, 3);
    std::vector<std::pair<double, std::vector<int>>> ranked;
    for (const auto& s : all) ranked.push_back({sc.sequence_log_prob(s) / decoding::length_penalty(s.size(), 0.8), s});
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    bool ok = found.size() == ranked.size();
    for (std::size_t i = 0; ok && i < ranked.size(); ++i)
      ok = found[i].tokens == ranked[i].second && std::abs(found[i].score - ranked[i].first) < 1e-12;
    pass = pass && ok;
    ++table_cases;
  }

  // (b) A neural decoder whose effective vocabulary is {UNK, a, EOS}: beam
  // search vs exhaustive teacher-forced scoring of every sequence.
  models::ModelConfig cfg = testing::toy_config(Architecture::single);
  cfg.target1_vocab = 5;
  std::size_t neural_ok = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    models::Model model(cfg, seed);
    models::Source x;
    x.tokens = {4, 5};
    Tape tape;
    const Var h = model.encode(tape, x, nn::ForwardContext{});
    decoding::DecoderScorer scorer(model.first_decoder(), tape, {h});
    const auto found = decoding::beam_search(scorer, wide).hypotheses;
    std::vector<std::pair<double, std::vector<int>>> ranked;
    for (auto seq : testing::complete_sequences(3, 2, 3)) {
      for (auto& t : seq) t = t == 0 ? kUnk : (t == 1 ? 4 : kEos);  // 0->UNK, 1->a, 2->EOS
      Tape t2;
      const Var h2 = model.encode(t2, x, nn::ForwardContext{});
      const auto mem = model.first_decoder().prepare(t2, {h2});
      const double lp = model.first_decoder().force(t2, seq, mem, nn::ForwardContext{}).log_prob.item();
      ranked.push_back({lp / decoding::length_penalty(seq.size(), 0.8), seq});
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    bool ok = found.size() == ranked.size();
    for (std::size_t i = 0; ok && i < ranked.size(); ++i)
      ok = found[i].tokens == ranked[i].second && std::abs(found[i].score - ranked[i].first) < 1e-9;
    neural_ok += ok ? 1 : 0;
  }
  pass = pass && neural_ok == 5;

  // (c) Two-phase fixture: brute-force joint optimum over all (Y1, Y2) pairs.
  testing::TwoPhaseFixture fx;
  decoding::BeamConfig k4{4, 0.8, 2, decoding::SearchMode::joint, false};
  auto make = [&](const decoding::Hypothesis<testing::TableScorer::State>& h) { return fx.second_for(h.tokens); };
  const auto joint = decoding::two_phase_decode(fx.first, make, k4, 0.5);
  auto k1 = k4;
  k1.mode = decoding::SearchMode::first_1best;
  const auto best1 = decoding::two_phase_decode(fx.first, make, k1, 0.5);
  double brute = -1e300;
  std::vector<int> b1, b2;
  for (const auto& y1 : testing::complete_sequences(3, 2, 2)) {
    const auto sc2 = fx.second_for(y1);
    for (const auto& y2 : testing::complete_sequences(3, 2, 2)) {
      const double j = 0.5 * fx.first.sequence_log_prob(y1) / decoding::length_penalty(y1.size(), 0.8) +
                       0.5 * sc2.sequence_log_prob(y2) / decoding::length_penalty(y2.size(), 0.8);
      if (j > brute) {
        brute = j;
        b1 = y1;
        b2 = y2;
      }
    }
  }
  const bool joint_ok = joint.first.tokens == b1 && joint.second.tokens == b2 && std::abs(joint.joint - brute) < 1e-12;
  const bool misses = !(best1.first.tokens == b1 && best1.second.tokens == b2) && best1.joint < brute;
  pass = pass && joint_ok && misses;

  Outcome o;
  o.pass = pass;
  o.detail = std::to_string(table_cases) + " table models + " + std::to_string(neural_ok) +
             "/5 neural models match exhaustive ranking; two-phase k=4 " + (joint_ok ? "finds" : "MISSES") +
             " the joint optimum (" + num(brute, 5) + "), first-1best " + (misses ? "misses it" : "DOES NOT miss it") +
             " (" + num(best1.joint, 5) + ")";
  return o;
}

// ------------------------------------------------------------ 4. metrics

Outcome criterion4() {
  const auto prf = eval::make_prf(5.85, 6.82);
  const bool prf_ok = std::abs(prf.f - 6.30) <= 0.01;
  std::mt19937_64 rng(4);
  double worst_cer = 0, worst_bleu = 0, bleu_lo = 1e9, bleu_hi = 0;
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", " "};
  for (int corpus = 0; corpus < 10; ++corpus) {
    std::vector<testing::Seq> hyps, refs;
    std::vector<std::string> hyp_lines, ref_lines;
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      testing::Seq r;
      const std::size_t len = std::uniform_int_distribution<std::size_t>(4, 20)(rng);
      for (std::size_t k = 0; k < len; ++k) r.push_back(alphabet[rng() % 3]);  // dense overlap
      testing::Seq h;
      for (const auto& c : r) {  // noisy copy
        const auto op = rng() % 10;
        if (op == 0) continue;
        h.push_back(op == 1 ? alphabet[rng() % alphabet.size()] : c);
        if (op == 2) h.push_back(alphabet[rng() % alphabet.size()]);
      }
      if (h.empty()) h.push_back("a");
      hyps.push_back(h);
      refs.push_back(r);
      std::string hl, rl;
      for (const auto& c : h) hl += c;
      for (const auto& c : r) rl += c;
      hyp_lines.push_back(hl);
      ref_lines.push_back(rl);
    }
    worst_cer = std::max(worst_cer, std::abs(eval::corpus_cer(hyps, refs) - testing::corpus_cer_oracle(hyps, refs)));
    const double b = eval::char_bleu(hyp_lines, ref_lines);
    bleu_lo = std::min(bleu_lo, b);
    bleu_hi = std::max(bleu_hi, b);
    worst_bleu = std::max(worst_bleu, std::abs(b - testing::bleu_oracle(hyps, refs)));
  }
  Outcome o;
  // Non-degenerate corpora: every BLEU strictly between 0 and 100.
  o.pass = prf_ok && worst_cer <= 1e-6 && worst_bleu <= 1e-6 && bleu_lo > 0 && bleu_hi < 100;
  o.detail = "F(5.85, 6.82) = " + num(prf.f, 6) + "; 10 random corpora: max |CER - oracle| = " + num(worst_cer, 3) +
             ", max |char-BLEU - oracle| = " + num(worst_bleu, 3) +
             " (BLEU range " + num(bleu_lo) + "-" + num(bleu_hi) + ")";
  return o;
}

// ------------------------------------------------------------ synthetic runs

struct SyntheticData {
  VocabSet vocab;
  std::vector<models::SentenceTriple> train, dev, test;
};

fs::path scratch_dir() {
  static const fs::path dir = fs::temp_directory_path() / ("mtseq-acceptance-" + std::to_string(::getpid()));
  return dir;
}

SyntheticData load_synthetic(const std::string& prefix, bool reconstruction) {
  const auto kind = models::SourceKind::text;
  const auto dir = scratch_dir();
  auto tr = corpus::load_parallel(corpus::paths_for_prefix((dir / (prefix + "train")).string()), kind, "train");
  auto dv = corpus::load_parallel(corpus::paths_for_prefix((dir / (prefix + "dev")).string()), kind, "dev");
  auto te = corpus::load_parallel(corpus::paths_for_prefix((dir / (prefix + "test")).string()), kind, "test");
  SyntheticData d;
  d.vocab = corpus::build_vocabs(tr, reconstruction);
  d.train = corpus::encode(tr, d.vocab, reconstruction);
  d.dev = corpus::encode(dv, d.vocab, reconstruction);
  d.test = corpus::encode(te, d.vocab, reconstruction);
  return d;
}

// Small model for desk-scale synthetic runs.
models::ModelConfig synthetic_config(Architecture kind, const VocabSet& v, bool reconstruction = false) {
  models::ModelConfig c;
  c.arch = {kind, reconstruction};
  c.source_vocab = v.source.size();
  c.target1_vocab = v.target1.size();
  c.target2_vocab = kind == Architecture::single ? 0 : v.target2.size();
  c.source_embed = c.target1_embed = c.target2_embed = 16;
  c.encoder_hidden = 32;
  c.decoder_hidden = 32;
  c.attention_dim = 32;
  return c;
}

training::TrainConfig synthetic_train_config(std::uint64_t seed, std::size_t epochs) {
  training::TrainConfig t;
  t.learning_rate = 0.005;
  t.dropout = 0.0;
  t.max_epochs = epochs;
  t.seed = seed;
  return t;
}

std::vector<int> strip_eos(std::vector<int> v) {
  if (!v.empty() && v.back() == kEos) v.pop_back();
  return v;
}

double sequence_accuracy(const models::Model& m, const std::vector<models::SentenceTriple>& data) {
  std::size_t ok = 0;
  for (const auto& t : data) ok += decoding::decode(m, t.x, {}, 0.5).y1 == strip_eos(t.y1) ? 1 : 0;
  return 100.0 * static_cast<double>(ok) / static_cast<double>(data.size());
}

// 100 - CER of the decoded second output.
double second_char_accuracy(const models::Model& m, const std::vector<models::SentenceTriple>& data,
                            const Vocabulary& v) {
  std::vector<eval::Symbols> hyps, refs;
  for (const auto& t : data) {
    hyps.push_back(v.decode(decoding::decode(m, t.x, {}, 0.5).y2));
    refs.push_back(v.decode(t.y2));
  }
  return 100.0 - eval::corpus_cer(hyps, refs);
}

double mean_transitivity_gap(const models::Model& m, const std::vector<models::SentenceTriple>& data) {
  double total = 0;
  for (const auto& t : data) {
    Tape tape;
    const auto r = m.forward(tape, t, nn::ForwardContext{});
    total += models::transitivity_penalty(r.a1.value(), r.a2.value(), r.a12.value());
  }
  return total / static_cast<double>(data.size());
}

struct TriangleRuns {
  bool done = false;
  std::vector<double> multitask_acc, triangle_acc, triangle_gap, triangle_reg_gap;
  double seconds = 0;
};

constexpr std::size_t kComparisonEpochs = 12;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};

TriangleRuns& triangle_runs(const SyntheticData& data, bool with_regularized) {
  static TriangleRuns runs;
  if (runs.done && (!with_regularized || !runs.triangle_reg_gap.empty())) return runs;
  const auto t0 = Clock::now();
  for (std::uint64_t seed : kSeeds) {
    if (!runs.done) {
      models::Model mt(synthetic_config(Architecture::multitask, data.vocab), seed);
      training::Trainer(mt, {}, synthetic_train_config(seed, kComparisonEpochs)).train(data.train, data.dev);
      runs.multitask_acc.push_back(second_char_accuracy(mt, data.test, data.vocab.target2));

      models::Model tri(synthetic_config(Architecture::triangle, data.vocab), seed);
      training::Trainer(tri, {}, synthetic_train_config(seed, kComparisonEpochs)).train(data.train, data.dev);
      runs.triangle_acc.push_back(second_char_accuracy(tri, data.test, data.vocab.target2));
      runs.triangle_gap.push_back(mean_transitivity_gap(tri, data.dev));
      std::cerr << "  seed " << seed << ": multitask Y2 acc " << runs.multitask_acc.back() << ", triangle "
                << runs.triangle_acc.back() << ", triangle gap " << runs.triangle_gap.back() << "\n";
    }
    if (with_regularized) {
      models::Model reg(synthetic_config(Architecture::triangle, data.vocab), seed);
      models::ScoreConfig sc{0.5, 0.2, 0.0};
      training::Trainer(reg, sc, synthetic_train_config(seed, kComparisonEpochs)).train(data.train, data.dev);
      runs.triangle_reg_gap.push_back(mean_transitivity_gap(reg, data.dev));
      std::cerr << "  seed " << seed << ": regularized triangle gap " << runs.triangle_reg_gap.back() << "\n";
    }
  }
  runs.done = true;
  runs.seconds += seconds_since(t0);
  return runs;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : "/") + num(x, 4);
  return s;
}

const SyntheticData& transduction_data() {
  static const SyntheticData d = load_synthetic("", false);
  return d;
}

Outcome criterion5() {
  const auto& data = transduction_data();
  const auto t0 = Clock::now();
  models::Model single(synthetic_config(Architecture::single, data.vocab), 1);
  training::Trainer trainer(single, {}, synthetic_train_config(1, 100));
  std::size_t epochs = 0;
  // Stop once the dev set is decoded perfectly; the best-dev-loss snapshot is
  // restored either way.
  auto hook = [&](const training::EpochLog& e, const models::Model& m) {
    epochs = e.epoch;
    return sequence_accuracy(m, data.dev) < 100.0;
  };
  trainer.train(data.train, data.dev, nullptr, {}, hook);
  const double acc = sequence_accuracy(single, data.test);
  const double single_secs = seconds_since(t0);

  const auto& runs = triangle_runs(data, false);
  const double mt = mean(runs.multitask_acc), tri = mean(runs.triangle_acc);
  Outcome o;
  o.pass = acc >= 95.0 && epochs <= 100 && single_secs < 900.0 && tri >= mt - 1.0;
  o.detail = "single-task test sequence accuracy " + num(acc) + "% after " + std::to_string(epochs) + " epochs in " +
             num(single_secs) + " s; Y2 char accuracy over seeds 1-3 (" + std::to_string(kComparisonEpochs) +
             " epochs): triangle " + num(tri) + " [" + list(runs.triangle_acc) + "] vs multitask " + num(mt) + " [" +
             list(runs.multitask_acc) + "]";
  return o;
}

Outcome criterion6() {
  const auto& runs = triangle_runs(transduction_data(), true);
  const double plain = mean(runs.triangle_gap), reg = mean(runs.triangle_reg_gap);
  Outcome o;
  o.pass = reg < plain;
  o.detail = "mean dev ||A12 A1 - A2||_F^2: lambda_trans=0.2 " + num(reg) + " [" + list(runs.triangle_reg_gap) +
             "] vs unregularized " + num(plain) + " [" + list(runs.triangle_gap) + "]";
  return o;
}

// ------------------------------------------------------------ 7. word discovery

Outcome criterion7() {
  // (a) Oracle block-diagonal attention recovers gold exactly.
  const auto& synth = transduction_data();
  (void)synth;
  const auto dir = scratch_dir();
  std::vector<eval::Segmentation> gold;
  for (const auto& line : corpus::read_lines((dir / "wd-train.gold").string()))
    gold.push_back(eval::parse_segmentation(line));
  std::vector<eval::Segmentation> oracle;
  for (const auto& g : gold) {
    const auto spans = g.spans();
    attention::AttentionMatrix a(g.symbols.size(), spans.size(), std::vector<double>(g.symbols.size() * spans.size(), 0.0));
    for (std::size_t w = 0; w < spans.size(); ++w)
      for (std::size_t s = spans[w].first; s < spans[w].second; ++s) a.at(s, w) = 1.0;
    std::vector<std::string> words(spans.size(), "w");
    oracle.push_back(wd::project_boundaries({a, g.symbols, words}));
  }
  const auto oracle_f = eval::word_discovery_prf(oracle, gold).tokens.f;

  // (b) Reverse-direction reconstruction model with the invertibility
  // regularizer (x = words, y1 = characters, y2 = words).
  const auto t0 = Clock::now();
  auto tr = corpus::load_parallel(corpus::paths_for_prefix((dir / "wd-train").string()), models::SourceKind::text, "train");
  auto dv = corpus::load_parallel(corpus::paths_for_prefix((dir / "wd-dev").string()), models::SourceKind::text, "dev");
  auto swap = [](corpus::Corpus c) {
    for (auto& u : c.utterances) std::swap(u.source, u.target1);
    return c;
  };
  const auto tr_rev = swap(tr), dv_rev = swap(dv);
  const VocabSet vocab = corpus::build_vocabs(tr_rev, true);
  const auto train = corpus::encode(tr_rev, vocab, true);
  const auto dev = corpus::encode(dv_rev, vocab, true);
  models::Model model(synthetic_config(Architecture::cascade, vocab, true), 1);
  models::ScoreConfig sc{0.5, 0.0, 0.5};
  training::Trainer(model, sc, synthetic_train_config(1, kComparisonEpochs)).train(train, dev);

  std::vector<wd::DiscoveryItem> items;
  for (std::size_t i = 0; i < tr.utterances.size(); ++i) {
    wd::DiscoveryItem it;
    it.triple = train[i];
    it.symbols = tr.utterances[i].source;
    it.words = tr.utterances[i].target1;
    items.push_back(std::move(it));
  }
  wd::DiscoverOptions opt;
  opt.direction = wd::Direction::reverse;
  opt.smooth = false;
  const auto found = wd::discover(model, items, opt);
  const auto model_f = eval::word_discovery_prf(found, gold).tokens.f;

  // Random-cut baseline at the gold boundary rate, averaged over 20 draws.
  double cuts = 0, slots = 0;
  for (const auto& g : gold) {
    cuts += static_cast<double>(g.cuts.size());
    slots += static_cast<double>(g.symbols.size() - 1);
  }
  const double rate = cuts / slots;
  std::mt19937_64 rng(77);
  std::bernoulli_distribution coin(rate);
  double baseline = 0;
  for (int draw = 0; draw < 20; ++draw) {
    std::vector<eval::Segmentation> rnd;
    for (const auto& g : gold) {
      eval::Segmentation s{g.symbols, {}};
      for (std::size_t k = 1; k < g.symbols.size(); ++k)
        if (coin(rng)) s.cuts.push_back(k);
      rnd.push_back(s);
    }
    baseline += eval::word_discovery_prf(rnd, gold).tokens.f / 20.0;
  }
  Outcome o;
  o.pass = oracle_f == 100.0 && model_f >= 2.0 * baseline;
  o.detail = "oracle block-diagonal token F " + num(oracle_f) + "; reverse reconstruction + L_inv(0.5) token F " +
             num(model_f) + " vs random-cut baseline " + num(baseline) + " (boundary rate " + num(rate, 3) + ", " +
             num(seconds_since(t0)) + " s)";
  return o;
}

// ------------------------------------------------------------ 8. reference targets

// Runs the CLI in-process and captures stdout.
std::pair<int, std::string> cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  auto* saved = std::cout.rdbuf(out.rdbuf());
  int rc = 0;
  try {
    rc = run_cli(args);
  } catch (...) {
    std::cout.rdbuf(saved);
    throw;
  }
  std::cout.rdbuf(saved);
  return {rc, out.str()};
}

bool has_setting(const std::string& manifest, const std::string& key, const std::string& value) {
  return manifest.find("\n" + key + " = " + value + "\n") != std::string::npos ||
         manifest.rfind(key + " = " + value + "\n", 0) == 0;
}

Outcome criterion8() {
  // The published corpus-scale numbers are reference targets only: they need
  // the original corpora and long training. What is checked here is that the
  // README recipes resolve to the intended configurations.
  const auto dir = scratch_dir();
  const std::string train = (dir / "train").string(), dev = (dir / "dev").string();
  std::string failures;
  auto expect = [&](const std::string& recipe, const std::pair<int, std::string>& r,
                    const std::vector<std::pair<std::string, std::string>>& settings) {
    if (r.first != 0) failures += " " + recipe + "(exit " + std::to_string(r.first) + ")";
    for (const auto& [k, v] : settings)
      if (!has_setting(r.second, k, v)) failures += " " + recipe + "(" + k + ")";
  };
  expect("triangle+L_trans",
         cli({"train", "--arch", "triangle", "--lambda", "0.5", "--trans-reg", "0.2", "--train", train, "--dev", dev,
              "--dry-run"}),
         {{"arch", "triangle"}, {"lambda", "0.5"}, {"trans-reg", "0.20000000000000001"}, {"lr", "0.00020000000000000001"},
          {"dropout", "0.20000000000000001"}, {"epochs", "40"}, {"clip", "5"}});
  expect("decode first-1best",
         cli({"decode", "--model", "best.ckpt", "--input", dev, "--mode", "first-1best", "--dry-run"}),
         {{"mode", "first-1best"}, {"beam", "4"}, {"alpha", "0.80000000000000004"}});
  expect("worddisc reverse+L_inv",
         cli({"worddisc", "--direction", "reverse", "--combine", "--inv-reg", "0.5", "--train",
              (dir / "wd-train").string(), "--dry-run"}),
         {{"direction", "reverse"}, {"combine", "true"}, {"inv-reg", "0.5"}});
  const int misuse = cli({"train", "--arch", "cascade", "--trans-reg", "--train", train, "--dry-run"}).first;
  if (misuse != 2) failures += " cascade+L_trans-not-rejected";
  Outcome o;
  o.pass = failures.empty();
  o.detail = "corpus-scale results are reference targets only (see README); recipe configurations " +
             std::string(failures.empty() ? "resolve as documented, L_trans on cascade exits 2"
                                          : "MISMATCH:" + failures);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto want = [&](int k) { return only.empty() || only.count(k) > 0; };

  fs::create_directories(scratch_dir());
  synthetic::write_dataset(synthetic::generate({}), scratch_dir().string());

  const std::vector<std::pair<int, Outcome (*)()>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7}, {8, criterion8},
  };
  int failed = 0;
  for (const auto& [k, fn] : criteria) {
    if (!want(k)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << k << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::error_code ec;
  fs::remove_all(scratch_dir(), ec);
  return failed == 0 ? 0 : 1;
}
