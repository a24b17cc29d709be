#include "mtseq/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mtseq/checkpoint.hpp"
#include "mtseq/corpus.hpp"
#include "mtseq/decoding.hpp"
#include "mtseq/errors.hpp"
#include "mtseq/evaluation.hpp"
#include "mtseq/synthetic.hpp"
#include "mtseq/training.hpp"
#include "mtseq/word_discovery.hpp"

namespace mtseq {

namespace {

namespace fs = std::filesystem;
using models::Architecture;
using models::SourceKind;

// Thrown for flag combinations CLI11 cannot check on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string join(const std::vector<std::string>& s, const std::string& sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += sep;
    out += s[i];
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Manifest of resolved settings, written as key = value lines that the
// --config option reads back.
using Manifest = std::vector<std::pair<std::string, std::string>>;

void print_manifest(std::ostream& os, const Manifest& m) {
  for (const auto& [k, v] : m) os << k << " = " << v << "\n";
}

void write_manifest(const std::string& path, const std::string& command, const Manifest& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# mtseq " << command << " run manifest; replay with: mtseq " << command
     << " --config " << fs::path(path).filename().string() << "\n";
  print_manifest(os, m);
}

// ---------------------------------------------------------------- flags

struct ModelFlags {
  std::string arch = "single";
  bool reconstruction = false;
  std::string source = "text";
  double lambda = 0.5;
  std::string trans_reg;
  std::string inv_reg;
  CLI::Option* trans_opt = nullptr;
  CLI::Option* inv_opt = nullptr;
  std::size_t embed = 64;
  std::size_t hidden = 64;
  std::size_t encoder_layers = 1;
  std::size_t decoder_layers = 1;
  std::size_t attention_dim = 64;
  double temperature = 1.0;
  std::size_t feature_dim = 39;
  std::size_t speech_layer1 = 128;
  std::size_t speech_layer2 = 128;
  std::size_t speech_layer3 = 512;
};

void add_model_flags(CLI::App* app, ModelFlags& f, bool arch_flags = true) {
  if (arch_flags) {
    app->add_option("--arch", f.arch, "single | multitask | cascade | triangle")
        ->check(CLI::IsMember({"single", "multitask", "cascade", "triangle"}))
        ->capture_default_str();
    app->add_flag("--reconstruction", f.reconstruction,
                  "cascade whose second target is the source itself");
  }
  app->add_option("--source", f.source, "text | speech")
      ->check(CLI::IsMember({"text", "speech"}))
      ->capture_default_str();
  app->add_option("--lambda", f.lambda, "weight of the first task in the score")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  f.trans_opt = app->add_option("--trans-reg", f.trans_reg,
                                "transitivity regularizer weight (bare flag: 0.2)")
                    ->expected(0, 1);
  f.inv_opt = app->add_option("--inv-reg", f.inv_reg,
                              "invertibility regularizer weight (bare flag: 0.2)")
                  ->expected(0, 1);
  app->add_option("--embed", f.embed, "embedding size")->capture_default_str();
  app->add_option("--hidden", f.hidden, "LSTM hidden size")->capture_default_str();
  app->add_option("--encoder-layers", f.encoder_layers, "text encoder depth")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--decoder-layers", f.decoder_layers, "decoder depth")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--attention-dim", f.attention_dim, "attention MLP size")->capture_default_str();
  app->add_option("--temperature", f.temperature, "attention softmax temperature")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--feature-dim", f.feature_dim, "speech feature dimension")->capture_default_str();
  app->add_option("--speech-layer1", f.speech_layer1, "bidirectional layer size per direction")
      ->capture_default_str();
  app->add_option("--speech-layer2", f.speech_layer2)->capture_default_str();
  app->add_option("--speech-layer3", f.speech_layer3)->capture_default_str();
}

double regularizer_weight(const CLI::Option* opt, const std::string& value, const char* name) {
  if (opt == nullptr || opt->count() == 0) return 0.0;
  if (value.empty()) return models::kDefaultRegularizerWeight;
  try {
    std::size_t pos = 0;
    const double w = std::stod(value, &pos);
    if (pos != value.size() || w < 0.0) throw std::invalid_argument(value);
    return w;
  } catch (const std::exception&) {
    throw UsageError(std::string(name) + ": expected a non-negative number, got '" + value + "'");
  }
}

models::ScoreConfig score_config(const ModelFlags& f) {
  models::ScoreConfig s;
  s.lambda = f.lambda;
  s.trans_weight = regularizer_weight(f.trans_opt, f.trans_reg, "--trans-reg");
  s.inv_weight = regularizer_weight(f.inv_opt, f.inv_reg, "--inv-reg");
  return s;
}

models::ModelConfig model_config(const ModelFlags& f, const VocabSet& v) {
  models::ModelConfig c;
  c.arch.kind = models::parse_architecture(f.arch);
  c.arch.reconstruction = f.reconstruction;
  if (f.reconstruction && c.arch.kind != Architecture::cascade)
    throw ConfigError("--reconstruction requires --arch cascade");
  c.source = models::parse_source_kind(f.source);
  if (f.reconstruction && c.source == SourceKind::speech)
    throw ConfigError("--reconstruction needs a text source");
  c.source_vocab = v.source.size();
  c.target1_vocab = v.target1.size();
  c.target2_vocab = c.two_decoders() ? v.target2.size() : 0;
  c.source_embed = c.target1_embed = c.target2_embed = f.embed;
  c.encoder_hidden = c.decoder_hidden = f.hidden;
  c.encoder_layers = f.encoder_layers;
  c.decoder_layers = f.decoder_layers;
  c.attention_dim = f.attention_dim;
  c.attention_temperature = f.temperature;
  c.speech.input_dim = f.feature_dim;
  c.speech.layer1_hidden = f.speech_layer1;
  c.speech.layer2_hidden = f.speech_layer2;
  c.speech.layer3_hidden = f.speech_layer3;
  return c;
}

void append_model_manifest(Manifest& m, const ModelFlags& f, const models::ScoreConfig& s, bool arch) {
  if (arch) {
    m.emplace_back("arch", f.arch);
    m.emplace_back("reconstruction", f.reconstruction ? "true" : "false");
  }
  m.emplace_back("source", f.source);
  m.emplace_back("lambda", fmt(s.lambda));
  if (s.trans_weight > 0) m.emplace_back("trans-reg", fmt(s.trans_weight));
  if (s.inv_weight > 0) m.emplace_back("inv-reg", fmt(s.inv_weight));
  m.emplace_back("embed", std::to_string(f.embed));
  m.emplace_back("hidden", std::to_string(f.hidden));
  m.emplace_back("encoder-layers", std::to_string(f.encoder_layers));
  m.emplace_back("decoder-layers", std::to_string(f.decoder_layers));
  m.emplace_back("attention-dim", std::to_string(f.attention_dim));
  m.emplace_back("temperature", fmt(f.temperature));
  m.emplace_back("feature-dim", std::to_string(f.feature_dim));
  m.emplace_back("speech-layer1", std::to_string(f.speech_layer1));
  m.emplace_back("speech-layer2", std::to_string(f.speech_layer2));
  m.emplace_back("speech-layer3", std::to_string(f.speech_layer3));
}

struct TrainFlags {
  double lr = 0.0002;
  double dropout = 0.2;
  std::size_t epochs = 0;  // 0: 40 for text, 500 for speech
  std::uint64_t seed = 1;
  double clip = 5.0;
  std::size_t threads = 1;
  std::string outdir;
  std::string select = "loss";
  bool no_epoch_checkpoints = false;
  bool dry_run = false;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--dropout", f.dropout, "dropout probability")
      ->check(CLI::Range(0.0, 0.99))
      ->capture_default_str();
  app->add_option("--epochs", f.epochs, "maximum epochs (default: 40 text, 500 speech)");
  app->add_option("--seed", f.seed, "random seed")->capture_default_str();
  app->add_option("--clip", f.clip, "gradient-norm clip threshold (0 disables)")->capture_default_str();
  app->add_option("--threads", f.threads, "dev-evaluation worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--outdir", f.outdir, std::string("output directory (env ") + kOutdirEnv + ")");
  app->add_option("--select", f.select, "dev selection metric: loss | cer1 | cer2 | bleu1 | bleu2")
      ->check(CLI::IsMember({"loss", "cer1", "cer2", "bleu1", "bleu2"}))
      ->capture_default_str();
  app->add_flag("--no-epoch-checkpoints", f.no_epoch_checkpoints, "only write best.ckpt");
  app->add_flag("--dry-run", f.dry_run, "validate and print the resolved settings without training");
}

std::string resolve_outdir(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutdirEnv); env != nullptr && *env != '\0') return env;
  return fallback;
}

training::TrainConfig train_config(const TrainFlags& f, SourceKind kind, const std::string& outdir) {
  training::TrainConfig c;
  c.learning_rate = f.lr;
  c.dropout = f.dropout;
  c.max_epochs = f.epochs != 0 ? f.epochs : (kind == SourceKind::speech ? 500 : 40);
  c.seed = f.seed;
  c.clip_threshold = f.clip;
  c.threads = f.threads;
  c.outdir = outdir;
  c.keep_epoch_checkpoints = !f.no_epoch_checkpoints;
  return c;
}

void append_train_manifest(Manifest& m, const TrainFlags& f, const training::TrainConfig& c) {
  m.emplace_back("lr", fmt(c.learning_rate));
  m.emplace_back("dropout", fmt(c.dropout));
  m.emplace_back("epochs", std::to_string(c.max_epochs));
  m.emplace_back("seed", std::to_string(c.seed));
  m.emplace_back("clip", fmt(c.clip_threshold));
  m.emplace_back("threads", std::to_string(c.threads));
  m.emplace_back("select", f.select);
  if (f.no_epoch_checkpoints) m.emplace_back("no-epoch-checkpoints", "true");
}

struct BeamFlags {
  std::size_t beam = 4;
  double alpha = 0.8;
  std::size_t max_length = 0;
  std::string mode = "joint";
  bool combine_raw = false;
};

void add_beam_flags(CLI::App* app, BeamFlags& f) {
  app->add_option("--beam", f.beam, "beam size per decoder")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--alpha", f.alpha, "length-normalization weight")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--max-length", f.max_length,
                  "maximum output length (0: 3x source for text, frames/2 for speech)")
      ->capture_default_str();
  app->add_option("--mode", f.mode, "joint | first-1best")
      ->check(CLI::IsMember({"joint", "first-1best"}))
      ->capture_default_str();
  app->add_flag("--combine-raw", f.combine_raw, "interpolate raw log-probabilities");
}

decoding::BeamConfig beam_config(const BeamFlags& f) {
  decoding::BeamConfig c;
  c.beam = f.beam;
  c.length_alpha = f.alpha;
  c.max_length = f.max_length;
  c.mode = decoding::parse_search_mode(f.mode);
  c.combine_raw = f.combine_raw;
  decoding::validate(c);
  return c;
}

// ---------------------------------------------------------------- data

struct Split {
  corpus::Corpus corpus;
  std::vector<models::SentenceTriple> triples;
};

corpus::Corpus load_split(const std::string& prefix, SourceKind kind, const std::string& split) {
  return corpus::load_parallel(corpus::paths_for_prefix(prefix), kind, split);
}

void require_target2(const corpus::Corpus& c, const models::ModelConfig& m) {
  if (m.two_decoders() && !m.arch.reconstruction && !c.has_target2)
    throw ConfigError("architecture " + models::to_string(m.arch.kind) + " needs a second target (" +
                      c.split + " has no .y2 file)");
}

std::vector<std::string> decode_symbols(const Vocabulary& v, const std::vector<int>& ids) {
  return v.decode(ids);
}

struct DecodedSet {
  std::vector<std::string> ids;
  std::vector<decoding::DecodeOutput> outputs;
};

DecodedSet decode_all(const models::Model& model, const std::vector<models::SentenceTriple>& data,
                      const decoding::BeamConfig& beam, double lambda) {
  DecodedSet d;
  for (const auto& t : data) {
    d.ids.push_back(t.id);
    d.outputs.push_back(decoding::decode(model, t.x, beam, lambda));
  }
  return d;
}

void write_decoded(const std::string& path, const DecodedSet& d, const VocabSet& v) {
  std::ofstream out(path), y1(path + ".y1"), y2(path + ".y2");
  if (!out || !y1 || !y2) throw std::runtime_error("cannot write " + path);
  for (std::size_t i = 0; i < d.ids.size(); ++i) {
    const auto& o = d.outputs[i];
    const std::string s1 = join(decode_symbols(v.target1, o.y1));
    const std::string s2 = join(decode_symbols(v.target2, o.y2));
    out << d.ids[i] << '\t' << s1 << '\t' << s2 << '\t' << std::setprecision(10) << o.joint_score << '\n';
    y1 << s1 << '\n';
    y2 << s2 << '\n';
  }
}

// Dev metric on decoded output, lower is better.
training::DevMetric make_dev_metric(const std::string& select, const std::vector<models::SentenceTriple>& dev,
                                    const VocabSet& vocab, const decoding::BeamConfig& beam, double lambda) {
  if (select == "loss") return {};
  const bool second = select.back() == '2';
  const bool use_cer = select.rfind("cer", 0) == 0;
  return [&, second, use_cer](const models::Model& m) {
    std::vector<eval::Symbols> hyps, refs;
    const auto& v = second ? vocab.target2 : vocab.target1;
    for (const auto& t : dev) {
      const auto o = decoding::decode(m, t.x, beam, lambda);
      hyps.push_back(v.decode(second ? o.y2 : o.y1));
      refs.push_back(v.decode(second ? t.y2 : t.y1));
    }
    return use_cer ? eval::corpus_cer(hyps, refs) : -eval::bleu(hyps, refs);
  };
}

// ---------------------------------------------------------------- train

struct TrainedRun {
  std::unique_ptr<models::Model> model;
  VocabSet vocab;
  models::ScoreConfig score;
};

TrainedRun train_model(const ModelFlags& mf, const TrainFlags& tf, const BeamFlags& bf,
                       const std::string& train_prefix, const std::string& dev_prefix,
                       const std::string& outdir, const std::string& command, Manifest head = {}) {
  const SourceKind kind = models::parse_source_kind(mf.source);
  const models::ScoreConfig score = score_config(mf);
  auto train_c = load_split(train_prefix, kind, "train");
  auto dev_c = dev_prefix.empty() ? corpus::Corpus{} : load_split(dev_prefix, kind, "dev");

  TrainedRun run;
  run.score = score;
  run.vocab = corpus::build_vocabs(train_c, mf.reconstruction);
  const models::ModelConfig mc = model_config(mf, run.vocab);
  models::validate(mc, score);
  require_target2(train_c, mc);
  if (tf.select != "loss" && dev_prefix.empty()) throw UsageError("--select " + tf.select + " needs --dev");
  if (tf.select.back() == '2' && !mc.two_decoders()) throw UsageError("--select " + tf.select + " needs a second task");
  if (!dev_prefix.empty()) require_target2(dev_c, mc);
  const auto tc = train_config(tf, kind, outdir);
  training::validate(tc);
  const auto beam = beam_config(bf);

  auto train = corpus::encode(train_c, run.vocab, mf.reconstruction);
  auto dev = dev_prefix.empty() ? std::vector<models::SentenceTriple>{}
                                : corpus::encode(dev_c, run.vocab, mf.reconstruction);

  // Callers that rewrite the corpora pass their own header naming the originals.
  Manifest m = std::move(head);
  if (m.empty()) {
    m.emplace_back("train", train_prefix);
    if (!dev_prefix.empty()) m.emplace_back("dev", dev_prefix);
  }
  append_model_manifest(m, mf, score, command == "train");
  append_train_manifest(m, tf, tc);
  if (tf.dry_run) {
    print_manifest(std::cout, m);
    return run;
  }
  fs::create_directories(outdir);
  write_manifest((fs::path(outdir) / "run.conf").string(), command, m);

  run.model = std::make_unique<models::Model>(mc, tc.seed);
  std::cerr << "model: " << models::to_string(mc.arch.kind) << (mc.arch.reconstruction ? " (reconstruction)" : "")
            << ", " << run.model->parameters().scalar_count() << " parameters, " << train.size()
            << " train / " << dev.size() << " dev utterances\n";
  training::Trainer trainer(*run.model, score, tc);
  auto metric = make_dev_metric(tf.select, dev, run.vocab, beam, score.lambda);
  auto hook = [](const training::EpochLog& e, const models::Model&) {
    std::cout << e.epoch << '\t' << e.train_objective << '\t' << e.dev_objective << '\t' << e.seconds << std::endl;
    return true;
  };
  const auto result = trainer.train(train, dev, &run.vocab, metric, hook);
  std::cerr << "best epoch " << result.best_epoch << " (dev " << result.best_dev << ")\n";
  return run;
}

int cmd_train(const ModelFlags& mf, const TrainFlags& tf, const BeamFlags& bf, const std::string& train_prefix,
              const std::string& dev_prefix, const std::string& folds) {
  const std::string outdir = resolve_outdir(tf.outdir, "run");
  if (folds.empty()) {
    if (train_prefix.empty()) throw UsageError("train: --train is required (or --folds)");
    train_model(mf, tf, bf, train_prefix, dev_prefix, outdir, "train");
    return kExitOk;
  }
  if (!train_prefix.empty()) throw UsageError("train: --folds and --train are mutually exclusive");
  // Cross-validation: one run per fold, test outputs concatenated in fold order.
  const auto manifest = corpus::read_fold_manifest(folds);
  const auto beam = beam_config(bf);
  if (tf.dry_run) {
    for (const auto& fold : manifest) {
      std::cout << "[fold " << fold.name << "]\n";
      train_model(mf, tf, bf, fold.train, fold.dev, (fs::path(outdir) / fold.name).string(), "train");
      std::cout << "test = " << fold.test << "\n";
    }
    return kExitOk;
  }
  fs::create_directories(outdir);
  std::ofstream all((fs::path(outdir) / "test.out").string()), all1((fs::path(outdir) / "test.out.y1").string()),
      all2((fs::path(outdir) / "test.out.y2").string()), ref1((fs::path(outdir) / "test.ref1").string()),
      ref2((fs::path(outdir) / "test.ref2").string());
  for (const auto& fold : manifest) {
    const std::string dir = (fs::path(outdir) / fold.name).string();
    auto run = train_model(mf, tf, bf, fold.train, fold.dev, dir, "train");
    if (!run.model) continue;
    const SourceKind kind = run.model->config().source;
    auto test_c = load_split(fold.test, kind, "test");
    const auto test = corpus::encode(test_c, run.vocab, mf.reconstruction);
    const auto decoded = decode_all(*run.model, test, beam, run.score.lambda);
    const std::string path = (fs::path(dir) / "test.out").string();
    write_decoded(path, decoded, run.vocab);
    for (const auto& [src, dst] : {std::pair{path, &all}, {path + ".y1", &all1}, {path + ".y2", &all2}})
      for (const auto& line : corpus::read_lines(src)) *dst << line << '\n';
    for (const auto& u : test_c.utterances) {
      ref1 << join(u.target1) << '\n';
      ref2 << join(mf.reconstruction ? u.source : u.target2) << '\n';
    }
  }
  std::cerr << manifest.size() << " folds; concatenated test output in " << outdir << "/test.out\n";
  return kExitOk;
}

// ---------------------------------------------------------------- decode

std::vector<models::SentenceTriple> load_for_model(const std::string& prefix, const LoadedModel& lm,
                                                   const std::string& split) {
  const auto& mc = lm.model->config();
  auto c = load_split(prefix, mc.source, split);
  return corpus::encode(c, lm.vocab, mc.arch.reconstruction);
}

int cmd_decode(const std::string& model_path, const std::string& input, const std::string& output,
               const std::string& attn_dir, const BeamFlags& bf, CLI::Option* lambda_opt, double lambda,
               bool dry_run) {
  const auto beam = beam_config(bf);
  if (dry_run) {
    print_manifest(std::cout, {{"model", model_path},
                               {"input", input},
                               {"beam", std::to_string(beam.beam)},
                               {"alpha", fmt(beam.length_alpha)},
                               {"max-length", std::to_string(beam.max_length)},
                               {"mode", decoding::to_string(beam.mode)},
                               {"combine-raw", beam.combine_raw ? "true" : "false"},
                               {"lambda", lambda_opt->count() > 0 ? fmt(lambda) : "checkpoint"}});
    return kExitOk;
  }
  auto lm = load_checkpoint(model_path);
  const double lam = lambda_opt->count() > 0 ? lambda : lm.score.lambda;
  const auto data = load_for_model(input, lm, "test");
  const auto decoded = decode_all(*lm.model, data, beam, lam);
  std::size_t incomplete = 0;
  for (const auto& o : decoded.outputs) incomplete += o.incomplete ? 1 : 0;
  if (output.empty()) {
    for (std::size_t i = 0; i < decoded.ids.size(); ++i) {
      const auto& o = decoded.outputs[i];
      std::cout << decoded.ids[i] << '\t' << join(lm.vocab.target1.decode(o.y1)) << '\t'
                << join(lm.vocab.target2.decode(o.y2)) << '\t' << std::setprecision(10) << o.joint_score << '\n';
    }
  } else {
    write_decoded(output, decoded, lm.vocab);
  }
  if (!attn_dir.empty()) {
    fs::create_directories(attn_dir);
    for (std::size_t i = 0; i < decoded.ids.size(); ++i) {
      const auto& o = decoded.outputs[i];
      const fs::path base = fs::path(attn_dir) / decoded.ids[i];
      if (o.a1.rows()) o.a1.save(base.string() + ".a1");
      if (o.a2.rows()) o.a2.save(base.string() + ".a2");
      if (o.a12.rows()) o.a12.save(base.string() + ".a12");
    }
  }
  if (incomplete) std::cerr << incomplete << " utterance(s) hit the length limit without EOS\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& hyp, const std::string& ref, const std::string& metric, bool strip_ws,
             const std::string& seg_hyp, const std::string& seg_gold) {
  std::cout << std::fixed << std::setprecision(2);
  bool did = false;
  if (!hyp.empty() || !ref.empty()) {
    if (hyp.empty() || ref.empty()) throw UsageError("eval: --hyp and --ref go together");
    const auto h = corpus::read_lines(hyp), r = corpus::read_lines(ref);
    if (h.size() != r.size())
      throw ContractError("eval: " + hyp + " has " + std::to_string(h.size()) + " lines, " + ref + " has " +
                          std::to_string(r.size()));
    std::vector<eval::Symbols> hs, rs;
    for (std::size_t i = 0; i < h.size(); ++i) {
      hs.push_back(corpus::split_symbols(h[i]));
      rs.push_back(corpus::split_symbols(r[i]));
    }
    const bool all = metric == "all";
    if (all || metric == "cer") std::cout << "cer\t" << eval::corpus_cer(hs, rs) << '\n';
    if (all || metric == "char-bleu") {
      // Symbol files are already one character per token; raw text is split into characters.
      std::vector<eval::Symbols> hc, rc;
      for (std::size_t i = 0; i < h.size(); ++i) {
        hc.push_back(eval::utf8_chars(h[i], !strip_ws));
        rc.push_back(eval::utf8_chars(r[i], !strip_ws));
      }
      std::cout << "char-bleu\t" << eval::bleu(strip_ws ? hc : hs, strip_ws ? rc : rs) << '\n';
    }
    if (all || metric == "word-bleu") std::cout << "word-bleu\t" << eval::word_bleu(h, r) << '\n';
    did = true;
  }
  if (!seg_hyp.empty() || !seg_gold.empty()) {
    if (seg_hyp.empty() || seg_gold.empty()) throw UsageError("eval: --seg-hyp and --seg-gold go together");
    std::vector<eval::Segmentation> hs, gs;
    for (const auto& l : corpus::read_lines(seg_hyp)) hs.push_back(eval::parse_segmentation(l));
    for (const auto& l : corpus::read_lines(seg_gold)) gs.push_back(eval::parse_segmentation(l));
    const auto s = eval::word_discovery_prf(hs, gs);
    std::cout << "token-precision\t" << s.tokens.precision << "\ntoken-recall\t" << s.tokens.recall
              << "\ntoken-f\t" << s.tokens.f << "\ntype-precision\t" << s.types.precision << "\ntype-recall\t"
              << s.types.recall << "\ntype-f\t" << s.types.f << '\n';
    did = true;
  }
  if (!did) throw UsageError("eval: give --hyp/--ref and/or --seg-hyp/--seg-gold");
  return kExitOk;
}

// ---------------------------------------------------------------- worddisc

struct WordDiscFlags {
  std::string train;
  std::string dev;
  std::string input;
  std::string gold;
  std::string model;
  std::string output;
  std::string direction = "base";
  bool combine = false;
  bool smooth = false;
  bool include_eos = false;
  double extraction_temperature = 0.0;
};

// Word-discovery corpora: .src holds the unsegmented symbols, .y1 the words.
// The reverse direction swaps the two sides.
std::vector<wd::DiscoveryItem> discovery_items(const corpus::Corpus& c, const VocabSet& v, wd::Direction dir,
                                               bool reconstruction) {
  std::vector<wd::DiscoveryItem> items;
  for (const auto& u : c.utterances) {
    wd::DiscoveryItem it;
    it.symbols = u.source;
    it.words = u.target1;
    const auto& x = dir == wd::Direction::base ? u.source : u.target1;
    const auto& y = dir == wd::Direction::base ? u.target1 : u.source;
    it.triple.id = u.id;
    it.triple.x.tokens = v.source.encode(x);
    it.triple.y1 = v.target1.encode(y);
    it.triple.y1.push_back(kEos);
    if (reconstruction) {
      it.triple.y2 = it.triple.x.tokens;
      it.triple.y2.push_back(kEos);
    }
    items.push_back(std::move(it));
  }
  return items;
}

corpus::Corpus swap_sides(corpus::Corpus c) {
  for (auto& u : c.utterances) std::swap(u.source, u.target1);
  return c;
}

// Writes a swapped copy of a corpus so the regular training path can read it.
std::string write_swapped(const std::string& prefix, const std::string& dir, const std::string& name) {
  auto c = swap_sides(load_split(prefix, SourceKind::text, name));
  fs::create_directories(dir);
  const std::string out = (fs::path(dir) / (name + "-reverse")).string();
  std::ofstream src(out + ".src"), y1(out + ".y1"), ids(out + ".ids");
  for (const auto& u : c.utterances) {
    src << join(u.source) << '\n';
    y1 << join(u.target1) << '\n';
    ids << u.id << '\n';
  }
  return out;
}

int cmd_worddisc(WordDiscFlags wf, ModelFlags mf, TrainFlags tf, const BeamFlags& bf) {
  const auto dir = wd::parse_direction(wf.direction);
  if (mf.source != "text") throw ConfigError("word discovery works on text (symbol) sources only");
  const std::string outdir = resolve_outdir(tf.outdir, "worddisc");
  std::unique_ptr<models::Model> model;
  VocabSet vocab;
  if (!wf.model.empty()) {
    auto lm = load_checkpoint(wf.model);
    model = std::move(lm.model);
    vocab = std::move(lm.vocab);
  } else {
    if (wf.train.empty()) throw UsageError("worddisc: --train or --model is required");
    mf.arch = wf.combine ? "cascade" : "single";
    mf.reconstruction = wf.combine;
    // Smoothing trains with a flattened attention softmax.
    if (wf.smooth && mf.temperature == 1.0) mf.temperature = 10.0;
    std::string train = wf.train, dev = wf.dev;
    if (dir == wd::Direction::reverse) {
      const std::string swap_dir =
          tf.dry_run ? (fs::temp_directory_path() / "mtseq-dry-run").string() : outdir;
      train = write_swapped(wf.train, swap_dir, "train");
      if (!dev.empty()) dev = write_swapped(wf.dev, swap_dir, "dev");
    }
    Manifest extra{{"train", wf.train}, {"direction", wf.direction}};
    if (!wf.dev.empty()) extra.emplace_back("dev", wf.dev);
    if (wf.combine) extra.emplace_back("combine", "true");
    if (wf.smooth) extra.emplace_back("smooth", "true");
    if (wf.include_eos) extra.emplace_back("include-eos", "true");
    if (!wf.gold.empty()) extra.emplace_back("gold", wf.gold);
    auto run = train_model(mf, tf, bf, train, dev, outdir, "worddisc", extra);
    if (!run.model) return kExitOk;
    model = std::move(run.model);
    vocab = std::move(run.vocab);
  }
  const auto& mc = model->config();
  const bool recon = mc.arch.kind == Architecture::cascade && mc.arch.reconstruction;
  if (mc.arch.kind != Architecture::single && !recon)
    throw ConfigError("worddisc needs a single-task or reconstruction model");

  const std::string input = wf.input.empty() ? wf.train : wf.input;
  if (input.empty()) throw UsageError("worddisc: --input is required with --model");
  const auto corpus_in = load_split(input, SourceKind::text, "input");
  const auto items = discovery_items(corpus_in, vocab, dir, recon);
  wd::DiscoverOptions opt;
  opt.direction = dir;
  opt.smooth = wf.smooth;
  opt.include_eos = wf.include_eos;
  opt.extraction_temperature = wf.extraction_temperature;
  const auto segs = wd::discover(*model, items, opt);

  const std::string output = wf.output.empty() ? (fs::path(outdir) / "segmentation.txt").string() : wf.output;
  if (!fs::path(output).parent_path().empty()) fs::create_directories(fs::path(output).parent_path());
  {
    std::ofstream os(output);
    if (!os) throw std::runtime_error("cannot write " + output);
    for (const auto& s : segs) os << eval::format_segmentation(s) << '\n';
  }
  std::cerr << "segmentation written to " << output << '\n';
  if (!wf.gold.empty()) return cmd_eval("", "", "all", false, output, wf.gold);
  return kExitOk;
}

// ---------------------------------------------------------------- inspect-attn

int cmd_inspect(const std::string& model_path, const std::string& input, const std::string& id,
                const std::string& outdir_flag, bool decoded, const BeamFlags& bf) {
  auto lm = load_checkpoint(model_path);
  const auto data = load_for_model(input, lm, "input");
  const auto outdir = resolve_outdir(outdir_flag, "attention");
  fs::create_directories(outdir);
  std::cout << "utterance\tmatrix\trows\tcols\tmax_row_deviation\n";
  std::size_t shown = 0;
  for (const auto& t : data) {
    if (!id.empty() && t.id != id) continue;
    std::vector<std::pair<std::string, attention::AttentionMatrix>> mats;
    if (decoded) {
      const auto o = decoding::decode(*lm.model, t.x, beam_config(bf), lm.score.lambda);
      mats = {{"a1", o.a1}, {"a2", o.a2}, {"a12", o.a12}};
    } else {
      Tape tape;
      const auto r = lm.model->forward(tape, t, nn::ForwardContext{});
      if (r.a1.valid()) mats.emplace_back("a1", attention::AttentionMatrix(r.a1.value()));
      if (r.a2.valid()) mats.emplace_back("a2", attention::AttentionMatrix(r.a2.value()));
      if (r.a12.valid()) mats.emplace_back("a12", attention::AttentionMatrix(r.a12.value()));
    }
    for (const auto& [name, m] : mats) {
      if (m.rows() == 0) continue;
      m.save((fs::path(outdir) / (t.id + "." + name)).string());
      std::cout << t.id << '\t' << name << '\t' << m.rows() << '\t' << m.cols() << '\t' << m.max_row_deviation()
                << '\n';
    }
    ++shown;
  }
  if (shown == 0) throw std::runtime_error("inspect-attn: no utterance with id '" + id + "' in " + input);
  return kExitOk;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const synthetic::Config& cfg, const std::string& outdir_flag) {
  const auto outdir = resolve_outdir(outdir_flag, "synthetic");
  synthetic::write_dataset(synthetic::generate(cfg), outdir);
  std::cerr << "synthetic task written to " << outdir << '\n';
  return kExitOk;
}


// Expands "--config FILE" into ordinary flags placed before the command-line
// ones; with take-last semantics the explicit flags win. Keys are option
// names without dashes; a [section] header naming another subcommand is skipped.
std::vector<std::string> expand_config(const CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const auto* s : app.get_subcommands({}))
    if (s->get_name() == args[0]) sub = s;
  if (sub == nullptr) return args;
  std::vector<std::string> rest;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  std::vector<std::string> out{args[0]};
  if (!path.empty()) {
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    for (const auto& item : CLI::ConfigINI().from_file(path)) {
      if (item.name.empty() || item.name == "++" || item.name == "--") continue;
      if (!item.parents.empty() && item.parents.front() != sub->get_name()) continue;
      const CLI::Option* opt = nullptr;
      try {
        opt = sub->get_option("--" + item.name);
      } catch (const CLI::OptionNotFound&) {
        throw UsageError(path + ": unknown setting '" + item.name + "' for " + sub->get_name());
      }
      if (opt->get_expected_max() == 0) {
        const std::string v = item.inputs.empty() ? "true" : item.inputs.front();
        if (v == "true" || v == "1" || v == "yes" || v == "on") out.push_back("--" + item.name);
        continue;
      }
      out.push_back("--" + item.name);
      for (const auto& v : item.inputs) out.push_back(v);
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"mtseq: multitask sequence-to-sequence toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand help for every subcommand");
  // A flag repeated after a --config expansion overrides the file's value.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  const std::string config_help = "key = value settings file (flags take precedence)";

  ModelFlags mf, wd_mf;
  TrainFlags tf, wd_tf;
  BeamFlags bf;

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string train_prefix, dev_prefix, folds;
  train->add_option("--config", config_path, config_help);
  train->add_option("--train", train_prefix, "training corpus prefix (.src/.y1[/.y2/.ids])");
  train->add_option("--dev", dev_prefix, "dev corpus prefix");
  train->add_option("--folds", folds, "fold manifest for cross-validation");
  add_model_flags(train, mf);
  add_train_flags(train, tf);
  add_beam_flags(train, bf);

  // decode
  auto* decode = app.add_subcommand("decode", "decode a corpus with a trained model");
  std::string model_path, input, output, attn_dir;
  double lambda = 0.5;
  decode->add_option("--config", config_path, config_help);
  decode->add_option("--model", model_path, "checkpoint")->required();
  decode->add_option("--input", input, "corpus prefix (.src, optional .ids)")->required();
  decode->add_option("--output", output, "output file (default: stdout); .y1/.y2 written alongside");
  decode->add_option("--attn-dir", attn_dir, "dump attention matrices per utterance");
  auto* lambda_opt = decode->add_option("--lambda", lambda, "joint-score weight (default: checkpoint value)")
                         ->check(CLI::Range(0.0, 1.0));
  add_beam_flags(decode, bf);
  bool decode_dry = false;
  decode->add_flag("--dry-run", decode_dry, "print the resolved search settings and exit");

  // eval
  auto* evalc = app.add_subcommand("eval", "score hypotheses against references");
  std::string hyp, ref, metric = "all", seg_hyp, seg_gold;
  bool strip_ws = false;
  evalc->add_option("--hyp", hyp, "hypothesis file, one utterance per line");
  evalc->add_option("--ref", ref, "reference file");
  evalc->add_option("--metric", metric, "cer | char-bleu | word-bleu | all")
      ->check(CLI::IsMember({"cer", "char-bleu", "word-bleu", "all"}))
      ->capture_default_str();
  evalc->add_flag("--raw-chars", strip_ws,
                  "char-bleu over the raw line's characters with whitespace removed");
  evalc->add_option("--seg-hyp", seg_hyp, "discovered segmentation");
  evalc->add_option("--seg-gold", seg_gold, "gold segmentation");

  // worddisc
  auto* wdc = app.add_subcommand("worddisc", "discover word boundaries from attention");
  WordDiscFlags wf;
  wdc->add_option("--config", config_path, config_help);
  wdc->add_option("--train", wf.train, "prefix: .src unsegmented symbols, .y1 words");
  wdc->add_option("--dev", wf.dev, "dev prefix");
  wdc->add_option("--input", wf.input, "corpus to segment (default: --train)");
  wdc->add_option("--gold", wf.gold, "gold segmentation for scoring");
  wdc->add_option("--model", wf.model, "use this checkpoint instead of training");
  wdc->add_option("--output", wf.output, "segmentation output file");
  wdc->add_option("--direction", wf.direction, "base | reverse")
      ->check(CLI::IsMember({"base", "reverse"}))
      ->capture_default_str();
  wdc->add_flag("--combine", wf.combine, "reconstruction model, A = A1 + A12^T");
  wdc->add_flag("--smooth", wf.smooth, "attention temperature 10 in training plus neighbor averaging");
  wdc->add_flag("--include-eos", wf.include_eos, "keep the end-of-sentence column in the argmax");
  wdc->add_option("--extraction-temperature", wf.extraction_temperature,
                  "attention temperature used when extracting (0: as trained)");
  add_model_flags(wdc, wd_mf, false);
  add_train_flags(wdc, wd_tf);

  // inspect-attn
  auto* insp = app.add_subcommand("inspect-attn", "export attention matrices");
  std::string insp_model, insp_input, insp_id, insp_out;
  bool insp_decoded = false;
  insp->add_option("--model", insp_model, "checkpoint")->required();
  insp->add_option("--input", insp_input, "corpus prefix")->required();
  insp->add_option("--id", insp_id, "utterance id (default: all)");
  insp->add_option("--outdir", insp_out, "where to write <id>.a1/.a2/.a12");
  insp->add_flag("--decoded", insp_decoded, "matrices from beam search instead of teacher forcing");
  add_beam_flags(insp, bf);

  // synth
  auto* synth = app.add_subcommand("synth", "write the bundled synthetic task");
  synthetic::Config sc;
  std::string synth_out;
  synth->add_option("--outdir", synth_out, "output directory");
  synth->add_option("--seed", sc.seed)->capture_default_str();
  synth->add_option("--alphabet", sc.alphabet)->capture_default_str();
  synth->add_option("--lexicon", sc.lexicon)->capture_default_str();
  synth->add_option("--max-length", sc.max_length)->capture_default_str();
  synth->add_option("--train-size", sc.train)->capture_default_str();
  synth->add_option("--dev-size", sc.dev)->capture_default_str();
  synth->add_option("--test-size", sc.test)->capture_default_str();

  try {
    const auto expanded = expand_config(app, args);
    std::vector<std::string> rev(expanded.rbegin(), expanded.rend());
    app.parse(rev);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(mf, tf, bf, train_prefix, dev_prefix, folds);
    if (*decode) return cmd_decode(model_path, input, output, attn_dir, bf, lambda_opt, lambda, decode_dry);
    if (*evalc) return cmd_eval(hyp, ref, metric, strip_ws, seg_hyp, seg_gold);
    if (*wdc) return cmd_worddisc(wf, wd_mf, wd_tf, bf);
    if (*insp) return cmd_inspect(insp_model, insp_input, insp_id, insp_out, insp_decoded, bf);
    if (*synth) return cmd_synth(sc, synth_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace mtseq
