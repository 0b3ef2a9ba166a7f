// cprnn: train, evaluate, convert and analyse CP-factored recurrent models.
//
// Every subcommand accepts --config FILE with key=value lines whose keys are
// the subcommand's long flag names. Values from the file are applied first,
// so flags on the command line win.

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>

#include "cprnn/checkpoint.hpp"
#include "cprnn/constructions.hpp"
#include "cprnn/data.hpp"
#include "cprnn/errors.hpp"
#include "cprnn/training.hpp"
#include "cprnn/witness.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cprnn;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rewrites `cmd ... --config F ...` into `cmd --k1=v1 ... --config F ...`.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || args.size() < 2) return args;
  std::ifstream in(config_path);
  if (!in) throw UsageError("cannot read config file '" + config_path + "'");
  std::vector<std::string> injected;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(config_path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    if (key.empty() || key == "config") throw UsageError(config_path + ":" + std::to_string(lineno) + ": bad key");
    injected.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  out.push_back(args[0]);
  out.push_back(args[1]);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

struct CommonOptions {
  int threads = 0;
  bool serial = false;

  void add(CLI::App* app) {
    app->add_option("--threads", threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    app->add_flag("--serial", serial, "Use the serial reference kernels");
  }
  Exec apply() const {
    if (threads > 0) omp_set_num_threads(threads);
    return serial ? Exec::serial : Exec::parallel;
  }
};

struct DataOptions {
  std::string train, valid, test, data;
  std::vector<double> fractions{0.9, 0.05, 0.05};
  std::size_t synthetic = 0;
  std::uint64_t data_seed = 0;

  void add(CLI::App* app) {
    app->add_option("--train", train, "Training split (UTF-8 text)");
    app->add_option("--valid", valid, "Validation split");
    app->add_option("--test", test, "Test split");
    app->add_option("--data", data, "Single text file, split by --split");
    app->add_option("--split", fractions, "Train/valid/test fractions for --data or --synthetic")
        ->expected(3)
        ->delimiter(',');
    app->add_option("--synthetic", synthetic, "Generate a synthetic corpus of this many bytes");
    app->add_option("--data-seed", data_seed, "Seed of the synthetic corpus");
  }

  json to_json() const {
    return {{"train", train},         {"valid", valid},       {"test", test},
            {"data", data},           {"split", fractions},  {"synthetic", synthetic},
            {"data_seed", data_seed}};
  }

  Corpus load() const {
    const int sources = (!train.empty() || !valid.empty() || !test.empty()) + !data.empty() + (synthetic > 0);
    if (sources != 1) throw UsageError("give exactly one data source: --train/--valid/--test, --data or --synthetic");
    if (!train.empty()) {
      if (valid.empty() || test.empty()) throw UsageError("--train needs --valid and --test");
      return load_corpus(train, valid, test);
    }
    const std::array<double, 3> f{fractions[0], fractions[1], fractions[2]};
    if (!data.empty()) return load_corpus(data, f);
    const std::string text = synthetic_corpus(synthetic, data_seed);
    const Vocab vocab = build_vocab(text);
    return split(encode(text, vocab), vocab, f);
  }
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json rank_report_json(const RankReport& r) {
  json fits = json::array();
  for (const auto& [rank, fit] : r.fits) fits.push_back({{"rank", rank}, {"fit", fit}});
  return {{"estimated_rank", r.estimated_rank},
          {"fits", fits},
          {"restarts_used", r.restarts_used},
          {"tolerance", r.tolerance},
          {"converged", r.converged}};
}

Index rank_of(const CellParams& cell) {
  if (const auto* cp = std::get_if<CpRnnParams>(&cell)) return cp->rank();
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainCmd {
  std::string kind = "cprnn";
  Index n = 32;
  Index rank = 8;
  std::string activation = "tanh";
  TrainConfig cfg;
  int precision_bits = 64;
  std::string out;
  DataOptions data;
  CommonOptions common;

  void add(CLI::App* app) {
    app->add_option("--kind", kind, "rnn, 2rnn, cprnn, cpbirnn or mirnn");
    app->add_option("--n", n, "Hidden size")->check(CLI::PositiveNumber);
    app->add_option("--rank", rank, "CP rank (cprnn, cpbirnn)")->check(CLI::NonNegativeNumber);
    app->add_option("--activation", activation, "linear, tanh or relu");
    app->add_option("--seq-len", cfg.seq_len, "Truncated BPTT window");
    app->add_option("--batch", cfg.batch_size, "Parallel streams per batch");
    app->add_option("--lr", cfg.lr0, "Initial learning rate");
    app->add_option("--max-epochs", cfg.max_epochs, "Epoch cap");
    app->add_option("--grad-clip", cfg.grad_clip_norm, "Global-norm clip, 0 disables");
    app->add_option("--min-delta", cfg.plateau_min_delta, "Smallest validation improvement that counts (nats)");
    app->add_option("--plateau-patience", cfg.plateau_patience, "Epochs without improvement before lr is scaled");
    app->add_option("--plateau-factor", cfg.plateau_factor, "lr multiplier on plateaus");
    app->add_option("--early-stop", cfg.early_stop_patience, "Epochs without improvement before stopping");
    app->add_option("--seed", cfg.seed, "Initialisation and shuffling seed");
    app->add_option("--precision", precision_bits, "64, or 32 to round parameters to float after every step")
        ->check(CLI::IsMember({32, 64}));
    app->add_option("--out", out, "Output directory")->required();
    data.add(app);
    common.add(app);
  }

  json config_json() const {
    return {{"kind", kind},
            {"n", n},
            {"rank", rank},
            {"activation", activation},
            {"seq_len", cfg.seq_len},
            {"batch", cfg.batch_size},
            {"lr", cfg.lr0},
            {"max_epochs", cfg.max_epochs},
            {"grad_clip", cfg.grad_clip_norm},
            {"min_delta", cfg.plateau_min_delta},
            {"plateau_patience", cfg.plateau_patience},
            {"plateau_factor", cfg.plateau_factor},
            {"early_stop", cfg.early_stop_patience},
            {"seed", cfg.seed},
            {"precision", precision_bits},
            {"data", data.to_json()}};
  }

  int run() {
    const Exec exec = common.apply();
    ModelKind k{};
    Activation act{};
    try {
      k = parse_model_kind(kind);
      act = parse_activation(activation);
      cfg.precision = precision_bits == 32 ? Precision::f32 : Precision::f64;
      cfg.validate();
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
    const json config = config_json();
    const Corpus corpus = data.load();
    const auto t0 = std::chrono::steady_clock::now();

    const Index d = corpus.vocab.size();
    const LmModel init = init_params(k, n, d, rank, act, cfg.seed);
    fs::create_directories(out);
    std::ofstream metrics(fs::path(out) / "metrics.jsonl");
    if (!metrics) throw DataError("cannot write metrics in '" + out + "'");
    metrics << json{{"config", config}}.dump() << '\n';
    const TrainResult result = train(
        init, corpus.train, corpus.valid, cfg,
        [&](const EpochMetrics& e) {
          metrics << json{{"epoch", e.epoch},     {"split", e.split}, {"nll", e.nll},
                          {"bpc", e.bpc},         {"lr", e.lr},       {"elapsed_s", e.elapsed_s}}
                         .dump()
                  << '\n'
                  << std::flush;
        },
        exec);

    Checkpoint ckpt{result.best, cfg.seed, config.dump(), corpus.vocab.symbols()};
    save_checkpoint(ckpt, (fs::path(out) / "best.ckpt").string());
    json summary = {{"n_params", count_parameters(result.best)},
                    {"n_params_closed_form", closed_form_param_count(k, n, d, rank, d)},
                    {"vocab_size", d},
                    {"epochs_run", result.epochs_run},
                    {"config", config}};
    if (corpus.test.size() >= 2) summary["test_bpc"] = evaluate(result.best, corpus.test, cfg.batch_size, exec).bpc;
    else summary["test_bpc"] = nullptr;
    if (std::isfinite(result.best_valid_nll)) summary["best_valid_bpc"] = result.best_valid_nll / std::numbers::ln2;
    summary["wall_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_json(fs::path(out) / "summary.json", summary);
    std::cout << summary.dump(2) << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------- eval

struct EvalCmd {
  std::string checkpoint;
  std::string text;
  std::string on = "test";
  int streams = 0;
  DataOptions data;
  CommonOptions common;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Model to evaluate")->required();
    app->add_option("--text", text, "Evaluate a whole text file");
    app->add_option("--on", on, "Split to evaluate with corpus flags")->check(CLI::IsMember({"train", "valid", "test"}));
    app->add_option("--streams", streams, "Contiguous chunks evaluated independently (default: the training batch size)")
        ->check(CLI::PositiveNumber);
    data.add(app);
    common.add(app);
  }

  int run() {
    const Exec exec = common.apply();
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    const Vocab vocab(ckpt.vocab_symbols);
    std::vector<Token> tokens;
    if (!text.empty()) {
      tokens = encode(read_text_file(text), vocab);
    } else {
      const Corpus corpus = data.load();
      if (!(corpus.vocab == vocab)) throw DataError("corpus vocabulary differs from the checkpoint's");
      tokens = on == "train" ? corpus.train : on == "valid" ? corpus.valid : corpus.test;
    }
    if (vocab.size() != ckpt.model.vocab())
      throw DataError("checkpoint stores no vocabulary matching its output size");
    if (streams == 0) {
      const json config = json::parse(ckpt.config_json, nullptr, false);
      streams = config.is_object() && config.contains("batch") && config["batch"].is_number_integer() ? config["batch"].get<int>() : 128;
    }
    const EvalResult r = evaluate(ckpt.model, tokens, streams, exec);
    const json out = {{"checkpoint", checkpoint}, {"kind", to_string(ckpt.model.kind())},
                      {"nll", r.nll},             {"bpc", r.bpc},
                      {"chars", r.chars},         {"streams", streams}};
    std::cout << out.dump(2) << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------- convert

struct ConvertCmd {
  std::string checkpoint;
  std::string to;
  Index rank = -1;
  Index n = -1;
  std::string out;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Source model")->required();
    app->add_option("--to", to, "Target kind: cprnn or cpbirnn")->required();
    app->add_option("--rank", rank, "Target rank for cprnn -> cprnn (pads with zero terms)");
    app->add_option("--n", n, "Target hidden size for cpbirnn -> cpbirnn (n+1 or n-1)");
    app->add_option("--out", out, "Output checkpoint")->required();
  }

  int run() {
    Checkpoint ckpt = load_checkpoint(checkpoint);
    LmModel& m = ckpt.model;
    const ModelKind from = m.kind();
    const ModelKind target = parse_model_kind(to);
    std::string how;
    if (target == ModelKind::cprnn && from == ModelKind::second_order) {
      m.cell = saturate_to_2rnn(std::get<SecondOrderParams>(m.cell));
      how = "saturate_to_2rnn";
    } else if (target == ModelKind::cprnn && from == ModelKind::rnn) {
      m.cell = rnn_as_cprnn(std::get<RnnParams>(m.cell));
      how = "rnn_as_cprnn";
    } else if (target == ModelKind::cprnn && from == ModelKind::mirnn) {
      m.cell = embed_mirnn(std::get<MiRnnParams>(m.cell));
      how = "embed_mirnn";
    } else if (target == from && (from == ModelKind::cprnn || from == ModelKind::cpbirnn) && rank >= 0) {
      auto p = std::get<CpRnnParams>(m.cell);
      if (rank < p.rank()) throw ScopeError("convert: lowering the rank is not an exact conversion");
      while (p.rank() < rank) p = pad_rank(p);
      m.cell = p;
      how = "pad_rank";
    } else if (target == ModelKind::cpbirnn && from == ModelKind::cpbirnn && n >= 0) {
      const auto& p = std::get<CpRnnParams>(m.cell);
      WithReadout w;
      if (n == p.hidden_size() + 1) {
        w = pad_hidden(p, m.out_W);
        how = "pad_hidden";
      } else if (n + 1 == p.hidden_size()) {
        w = reduce_hidden(p, m.out_W);
        how = "reduce_hidden";
      } else {
        throw ScopeError("convert: hidden size can change by exactly one per conversion");
      }
      m.cell = std::move(w.model);
      m.out_W = std::move(w.readout);
    } else {
      throw ScopeError("convert: no exact conversion from " + std::string(to_string(from)) + " to " + to +
                       " with the given options");
    }
    json config = json::parse(ckpt.config_json, nullptr, false);
    if (config.is_discarded() || !config.is_object()) config = json::object();
    config["converted"] = {{"from", checkpoint}, {"via", how}};
    ckpt.config_json = config.dump();
    save_checkpoint(ckpt, out);
    std::cout << json{{"out", out}, {"via", how}, {"kind", to_string(m.kind())}, {"n", m.hidden()},
                      {"rank", rank_of(m.cell)}}
                     .dump(2)
              << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------- equiv-check

struct EquivCmd {
  std::string a, b;
  EquivalenceOptions opts;
  double threshold = 1e-10;

  void add(CLI::App* app) {
    app->add_option("--a", a, "First checkpoint")->required();
    app->add_option("--b", b, "Second checkpoint")->required();
    app->add_option("--n-seqs", opts.n_seqs, "Random input sequences")->check(CLI::PositiveNumber);
    app->add_option("--seq-len", opts.seq_len, "Length of each sequence")->check(CLI::PositiveNumber);
    app->add_option("--seed", opts.seed, "Input seed");
    app->add_option("--threshold", threshold, "Largest deviation reported as equivalent");
  }

  int run() {
    const Checkpoint ca = load_checkpoint(a);
    const Checkpoint cb = load_checkpoint(b);
    if (ca.model.vocab() != cb.model.vocab()) throw DimensionError("models have different vocabulary sizes");
    const double logits = equivalence_certificate(ca.model.cell, cb.model.cell, opts, &ca.model.out_W, &cb.model.out_W);
    const double bias = (ca.model.out_b - cb.model.out_b).cwiseAbs().maxCoeff();
    const double cert = std::max(logits, bias);
    std::cout << json{{"certificate", cert},
                      {"readout_deviation", logits},
                      {"bias_deviation", bias},
                      {"equivalent", cert <= threshold},
                      {"threshold", threshold},
                      {"n_seqs", opts.n_seqs},
                      {"seq_len", opts.seq_len},
                      {"seed", opts.seed}}
                     .dump(2)
              << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------- analyze-rank

struct AnalyzeCmd {
  std::string checkpoint;
  std::string kind = "cpbirnn";
  Index n = 2, d = 3, rank = 2;
  std::string activation = "tanh";
  std::uint64_t seed = 0;
  std::string witness = "S_h";
  AlsConfig als;
  double tolerance = 1e-6;
  CommonOptions common;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Analyse this model's cell");
    app->add_option("--kind", kind, "Random model kind when no checkpoint is given (cpbirnn or cprnn)");
    app->add_option("--n", n, "Hidden size")->check(CLI::PositiveNumber);
    app->add_option("--d", d, "Input size")->check(CLI::PositiveNumber);
    app->add_option("--rank", rank, "CP rank")->check(CLI::NonNegativeNumber);
    app->add_option("--activation", activation, "linear, tanh or relu");
    app->add_option("--seed", seed, "Model seed");
    app->add_option("--witness", witness, "S_h or S_alpha")->check(CLI::IsMember({"S_h", "S_alpha"}));
    app->add_option("--restarts", als.restarts, "ALS restarts per candidate rank")->check(CLI::PositiveNumber);
    app->add_option("--max-iters", als.max_iters, "ALS sweeps per restart")->check(CLI::PositiveNumber);
    app->add_option("--als-seed", als.seed, "ALS initialisation seed");
    app->add_option("--tolerance", tolerance, "Fit threshold 1 - tolerance");
    common.add(app);
  }

  int run() {
    const Exec exec = common.apply();
    CellParams cell;
    json source;
    if (!checkpoint.empty()) {
      cell = load_checkpoint(checkpoint).model.cell;
      source = {{"checkpoint", checkpoint}};
    } else {
      cell = random_cell(parse_model_kind(kind), n, d, rank, parse_activation(activation), seed);
      source = {{"kind", kind}, {"n", n}, {"d", d}, {"rank", rank}, {"activation", activation}, {"seed", seed}};
    }
    WitnessTensor w;
    if (witness == "S_h") {
      w = witness_bruteforce(cell, exec);
    } else {
      const auto* p = std::get_if<CpRnnParams>(&cell);
      if (!p) throw ScopeError("S_alpha is defined for CPRNNs");
      w = witness_alpha_bruteforce(*p, exec);
    }
    const RankBoundResult r = rank_bound_check(w, als, tolerance, exec);
    json out = rank_report_json(r.report);
    out["witness"] = to_string(w.kind);
    out["dims"] = {w.tensor.dims().d1, w.tensor.dims().d2, w.tensor.dims().d3};
    out["source_rank"] = w.source_rank;
    out["bound_holds"] = r.bound_holds;
    out["source"] = source;
    std::cout << out.dump(2) << '\n';
    return kOk;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CP-factored second-order recurrent networks"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  TrainCmd train_cmd;
  EvalCmd eval_cmd;
  ConvertCmd convert_cmd;
  EquivCmd equiv_cmd;
  AnalyzeCmd analyze_cmd;
  struct Entry {
    CLI::App* app;
    std::function<int()> run;
  };
  std::vector<Entry> commands;
  auto add = [&](const char* name, const char* help, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--config", "key=value file; its entries are overridden by flags");
    cmd.add(sub);
    commands.push_back({sub, [&cmd] { return cmd.run(); }});
  };
  add("train", "Train a language model", train_cmd);
  add("eval", "Bits per character of a checkpoint", eval_cmd);
  add("convert", "Exact conversion between model families", convert_cmd);
  add("equiv-check", "Maximum output deviation between two checkpoints", equiv_cmd);
  add("analyze-rank", "CP rank estimate of a witness tensor", analyze_cmd);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args.insert(args.begin(), argv[0]);
    args = expand_config(args);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    for (auto& c : commands)
      if (c.app->parsed()) return c.run();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const ScopeError& e) {
    std::cerr << "out of scope: " << e.what() << '\n';
    return kData;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
