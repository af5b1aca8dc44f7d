// SPDX-License-Identifier: Apache-2.0
//
// ccnn command-line entry point: onehot | train | transfer | eval | synth.
//
// Configuration precedence is flags > --config file > defaults. Each run
// writes manifest.json next to its outputs with the effective config, the
// seed, SHA-256 digests of every input and the list of outputs.
#include "ccnn/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ccnn/embedding.hpp"
#include "ccnn/encounter.hpp"
#include "ccnn/error.hpp"
#include "ccnn/evaluation.hpp"
#include "ccnn/kernels.hpp"
#include "ccnn/rng.hpp"
#include "ccnn/split.hpp"
#include "ccnn/synth.hpp"
#include "ccnn/text.hpp"
#include "ccnn/training.hpp"
#include "ccnn/transfer.hpp"
#include "ccnn/vocabulary.hpp"
#include "json.hpp"

#ifndef CCNN_VERSION
#define CCNN_VERSION "dev"
#endif

namespace ccnn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw_data("failed writing file: " + path.string());
}

class Manifest {
 public:
  Manifest(std::string subcommand, std::uint64_t seed) {
    doc_["tool"] = "ccnn";
    doc_["version"] = CCNN_VERSION;
    doc_["subcommand"] = std::move(subcommand);
    doc_["seed"] = seed;
    doc_["rng"] = std::string(Rng::kAlgorithm);
    doc_["kernels"] = std::string(kernels::active().name);
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
  }

  /// Reads the input, records its digest and returns the bytes.
  std::string read_input(const std::string& role, const std::string& path) {
    std::string bytes = read_file(path);
    doc_["inputs"][role].push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
    return bytes;
  }

  void set_config(json cfg) { doc_["config"] = std::move(cfg); }

  void write_output(const fs::path& dir, const std::string& name, std::string_view content) {
    write_file(dir / name, content);
    doc_["outputs"].push_back(name);
  }

  void finish(const fs::path& dir) { write_file(dir / "manifest.json", doc_.dump(2) + "\n"); }

 private:
  json doc_;
};

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw_usage("--out is required");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_data("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  const std::string text = read_file(path);
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw_usage("config file must hold a JSON object: " + path);
    return j;
  } catch (const json::parse_error& e) {
    throw_usage("config file is not valid JSON (" + path + "): " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training settings shared by train / transfer.

struct FlagOverrides {
  std::optional<double> learning_rate;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::string> optimizer;
  std::optional<std::string> selection;
  std::optional<std::string> freeze;
  std::optional<double> positive_class_weight;
  std::optional<std::size_t> num_filters;
  std::optional<double> dropout;
  std::optional<std::string> cutoff;
  std::optional<double> train_ratio;
  std::optional<std::uint64_t> seed;
};

struct RunSettings {
  TrainConfig train;
  std::size_t num_filters = 100;
  double dropout = 0.5;
  AdmitDate cutoff = kDefaultCutoff;
  double train_ratio = kDefaultTrainRatio;
  std::uint64_t seed = 0;
};

json settings_json(const RunSettings& s) {
  return json{{"learning_rate", s.train.learning_rate},
              {"epochs", s.train.epochs},
              {"batch_size", s.train.batch_size},
              {"optimizer", std::string(to_string(s.train.optimizer))},
              {"adam_beta1", s.train.adam_beta1},
              {"adam_beta2", s.train.adam_beta2},
              {"adam_epsilon", s.train.adam_epsilon},
              {"selection", std::string(to_string(s.train.selection))},
              {"freeze", to_string(s.train.freeze)},
              {"positive_class_weight", s.train.positive_class_weight},
              {"num_filters", s.num_filters},
              {"dropout", s.dropout},
              {"cutoff", format_date(s.cutoff)},
              {"train_ratio", s.train_ratio},
              {"seed", s.seed}};
}

RunSettings resolve_settings(const json& file, const FlagOverrides& flags) {
  static const std::set<std::string> kKeys{"learning_rate", "epochs",   "batch_size",  "optimizer",
                                           "adam_beta1",    "adam_beta2", "adam_epsilon", "selection",
                                           "freeze",        "positive_class_weight", "num_filters", "dropout",
                                           "cutoff",        "train_ratio", "seed"};
  for (const auto& [k, _] : file.items()) {
    if (!kKeys.contains(k)) throw_usage("unknown config key: " + k);
  }
  RunSettings s;
  try {
    s.train.learning_rate = flags.learning_rate.value_or(file.value("learning_rate", s.train.learning_rate));
    s.train.epochs = flags.epochs.value_or(file.value("epochs", s.train.epochs));
    s.train.batch_size = flags.batch_size.value_or(file.value("batch_size", s.train.batch_size));
    s.train.optimizer = parse_optimizer(flags.optimizer.value_or(file.value("optimizer", std::string("adam"))));
    s.train.adam_beta1 = file.value("adam_beta1", s.train.adam_beta1);
    s.train.adam_beta2 = file.value("adam_beta2", s.train.adam_beta2);
    s.train.adam_epsilon = file.value("adam_epsilon", s.train.adam_epsilon);
    s.train.selection =
        parse_selection(flags.selection.value_or(file.value("selection", std::string("best_validation_auroc"))));
    s.train.freeze = parse_freeze_mask(flags.freeze.value_or(file.value("freeze", std::string("none"))));
    s.train.positive_class_weight =
        flags.positive_class_weight.value_or(file.value("positive_class_weight", s.train.positive_class_weight));
    s.num_filters = flags.num_filters.value_or(file.value("num_filters", s.num_filters));
    s.dropout = flags.dropout.value_or(file.value("dropout", s.dropout));
    s.cutoff = parse_date(flags.cutoff.value_or(file.value("cutoff", format_date(kDefaultCutoff))));
    s.train_ratio = flags.train_ratio.value_or(file.value("train_ratio", s.train_ratio));
    s.seed = flags.seed.value_or(file.value("seed", std::uint64_t{0}));
  } catch (const json::exception& e) {
    throw_usage(std::string("bad value in config file: ") + e.what());
  }
  s.train.seed = s.seed;
  validate(s.train);
  if (s.num_filters == 0) throw_usage("num_filters must be positive");
  if (!(s.dropout >= 0.0 && s.dropout < 1.0)) throw_usage("dropout must lie in [0, 1)");
  if (!(s.train_ratio > 0.0 && s.train_ratio < 1.0)) throw_usage("train_ratio must lie strictly between 0 and 1");
  return s;
}

void add_training_flags(CLI::App* cmd, FlagOverrides& f) {
  cmd->add_option("--lr", f.learning_rate, "Learning rate (default 0.001)");
  cmd->add_option("--epochs", f.epochs, "Training epochs (default 30)");
  cmd->add_option("--batch-size", f.batch_size, "Mini-batch size (default 32)");
  cmd->add_option("--optimizer", f.optimizer, "adam | sgd (default adam)");
  cmd->add_option("--selection", f.selection, "best_validation_auroc | final_epoch");
  cmd->add_option("--pos-weight", f.positive_class_weight, "Loss weight of positive examples (default 1)");
  cmd->add_option("--cutoff", f.cutoff, "Test-window start date YYYYMMDD (default 20140601)");
  cmd->add_option("--train-ratio", f.train_ratio, "Train share of the pre-cutoff records (default 0.8)");
}

std::string describe_window(const DatasetSplit& split, std::string_view site) {
  return std::string(site) + " admit_date < " + format_date(split.date_cutoff) + " (train " +
         std::to_string(split.train.size()) + ", validation " + std::to_string(split.validation.size()) +
         ", split seed " + std::to_string(split.split_seed) + ")";
}

json history_json(const TrainHistory& h, const json& config, std::uint64_t seed) {
  auto rec = [](const EpochRecord& r) {
    json j{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"validation_loss", r.validation_loss}};
    j["validation_auroc"] = r.validation_auroc ? json(*r.validation_auroc) : json(nullptr);
    return j;
  };
  json epochs = json::array();
  for (const auto& e : h.epochs) epochs.push_back(rec(e));
  return json{{"config", config},
              {"seed", seed},
              {"rng", std::string(Rng::kAlgorithm)},
              {"initial", rec(h.initial)},
              {"epochs", epochs},
              {"selected_epoch", h.selected_epoch},
              {"selection_metric", h.selection_metric},
              {"warnings", h.warnings}};
}

struct CommonOptions {
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string kernels = "auto";
};

void add_common(CLI::App* cmd, CommonOptions& c, bool with_config) {
  cmd->add_option("--out", c.out, "Output directory")->required();
  if (with_config) cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "Seed for every random choice in this run");
  cmd->add_option("--kernels", c.kernels, "auto | scalar | avx2 (default auto)");
}

// ---------------------------------------------------------------------------

int cmd_onehot(const CommonOptions& c, const std::string& vocab_path, std::ostream& out) {
  const fs::path dir = prepare_out_dir(c.out);
  Manifest m("onehot", c.seed.value_or(0));
  const auto vocab = ConceptVocabulary::parse(m.read_input("vocab", vocab_path));
  const auto table = build_one_hot_table(vocab);
  m.set_config(json{{"vocab", vocab_path}});
  m.write_output(dir, "onehot.emb.jsonl", serialize_embedding_table(table));
  m.finish(dir);
  out << "one-hot table: " << table.size() << " vectors, dimension " << table.dimension() << "\n";
  return kExitOk;
}

struct DataInputs {
  std::string data;
  std::string vocab;
  std::string table;
};

int cmd_train(const CommonOptions& c, const DataInputs& in, FlagOverrides flags, std::ostream& out) {
  if (c.seed) flags.seed = c.seed;
  const RunSettings s = resolve_settings(load_config_file(c.config), flags);
  if (s.train.freeze.all()) {
    throw_usage("--freeze conv,fc leaves nothing to train; local training needs at least one trainable group");
  }
  const fs::path dir = prepare_out_dir(c.out);
  Manifest m("train", s.seed);
  if (!c.config.empty()) m.read_input("config", c.config);
  const auto vocab = ConceptVocabulary::parse(m.read_input("vocab", in.vocab));
  const auto records = parse_encounters(m.read_input("data", in.data), vocab);
  const auto table = load_embedding_table(m.read_input("table", in.table));
  const json cfg = settings_json(s);
  m.set_config(cfg);

  const auto split = make_dataset_split(records, s.cutoff, s.train_ratio, derive_seed(s.seed, seed_stream::split));
  const auto bound = bind_table(vocab, table);
  const auto train_ds = encode_dataset(split.train, vocab, bound);
  const auto val_ds = encode_dataset(split.validation, vocab, bound);
  const auto model = init_model(s.num_filters, table.dimension(), s.dropout, derive_seed(s.seed, seed_stream::init));
  const auto result = train(model, train_ds, val_ds, s.train);

  const Provenance prov{"ccnn train", Scenario::local, s.seed, describe_window(split, "local"), cfg};
  m.write_output(dir, "checkpoint.json", save_checkpoint(result.model, table.source_tag(), prov));
  m.write_output(dir, "history.json", history_json(result.history, cfg, s.seed).dump(2) + "\n");
  m.finish(dir);
  out << "trained " << table.source_tag() << " model: selected epoch " << result.history.selected_epoch << " of "
      << result.history.epochs.size();
  const auto& sel = result.history.selected_epoch == 0 ? result.history.initial
                                                        : result.history.epochs[result.history.selected_epoch - 1];
  if (sel.validation_auroc) out << ", validation AUROC " << *sel.validation_auroc;
  out << "\n";
  return kExitOk;
}

int cmd_transfer(const CommonOptions& c, const std::string& ckpt_path, const std::string& strategy_name,
                 const DataInputs& in, FlagOverrides flags, std::ostream& out) {
  if (c.seed) flags.seed = c.seed;
  const TransferStrategy strategy = parse_strategy(strategy_name);
  if (flags.freeze) throw_usage("--freeze is set by the transfer strategy");
  const RunSettings s = resolve_settings(load_config_file(c.config), flags);
  const fs::path dir = prepare_out_dir(c.out);
  Manifest m("transfer", s.seed);
  if (!c.config.empty()) m.read_input("config", c.config);
  const Checkpoint source = load_checkpoint(m.read_input("source_checkpoint", ckpt_path));

  json cfg = settings_json(s);
  cfg["strategy"] = std::string(to_string(strategy));
  cfg["freeze"] = to_string(freeze_mask_for(strategy));
  cfg["num_filters"] = source.model.num_filters();
  cfg["dropout"] = source.model.dropout_rate();
  m.set_config(cfg);

  const bool have_data = !in.data.empty();
  if (!have_data && strategy != TransferStrategy::direct_share) {
    throw_usage("--data, --vocab and --table are required for strategy " + strategy_name);
  }
  std::optional<DatasetSplit> split;
  std::optional<EncodedDataset> train_ds, val_ds, test_ds;
  if (have_data) {
    if (in.vocab.empty() || in.table.empty()) throw_usage("--data needs --vocab and --table");
    const auto vocab = ConceptVocabulary::parse(m.read_input("vocab", in.vocab));
    const auto table = load_embedding_table(m.read_input("table", in.table));
    const auto bound = bind_table(vocab, table);
    check_composable(source, bound);
    const auto records = parse_encounters(m.read_input("data", in.data), vocab);
    split = make_dataset_split(records, s.cutoff, s.train_ratio, derive_seed(s.seed, seed_stream::split));
    train_ds = encode_dataset(split->train, vocab, bound);
    val_ds = encode_dataset(split->validation, vocab, bound);
    test_ds = encode_dataset(split->test, vocab, bound);
  }

  const auto result = run_transfer(source, strategy, train_ds ? &*train_ds : nullptr, val_ds ? &*val_ds : nullptr,
                                   s.train);
  const std::string window = "source: " + source.provenance.data_window + "; target: " +
                             (split ? describe_window(*split, "target") : std::string("none (no target updates)"));
  const Provenance prov{"ccnn transfer", scenario_for(strategy), s.seed, window, cfg};
  m.write_output(dir, "checkpoint.json", save_checkpoint(result.model, source.source_tag, prov));
  m.write_output(dir, "history.json", history_json(result.history, cfg, s.seed).dump(2) + "\n");
  if (test_ds && !test_ds->empty()) {
    const EvalReport report = evaluate_encoded(result.model, *test_ds, scenario_for(strategy));
    m.write_output(dir, "report.json", reports_to_json({report}));
    out << to_string(strategy) << ": target test AUROC " << report.auroc << " (" << report.n_positive << "+/"
        << report.n_negative << "-)\n";
  } else {
    out << to_string(strategy) << ": no target test records; checkpoint written\n";
  }
  m.finish(dir);
  return kExitOk;
}

int cmd_eval(const CommonOptions& c, const std::vector<std::string>& ckpts, const std::vector<std::string>& tables,
             const std::string& data, const std::string& vocab_path, const std::optional<std::string>& cutoff,
             bool all_records, std::ostream& out) {
  const fs::path dir = prepare_out_dir(c.out);
  Manifest m("eval", c.seed.value_or(0));
  const auto vocab = ConceptVocabulary::parse(m.read_input("vocab", vocab_path));
  const auto records = parse_encounters(m.read_input("data", data), vocab);
  const AdmitDate cut = cutoff ? parse_date(*cutoff) : kDefaultCutoff;
  const auto test = all_records ? records : split_by_date(records, cut).post;
  m.set_config(json{{"cutoff", format_date(cut)}, {"all_records", all_records}});

  std::vector<EmbeddingTable> loaded;
  for (const auto& t : tables) loaded.push_back(load_embedding_table(m.read_input("table", t)));
  std::vector<EvalReport> reports;
  for (const auto& path : ckpts) {
    const Checkpoint ck = load_checkpoint(m.read_input("checkpoint", path));
    const auto it = std::find_if(loaded.begin(), loaded.end(),
                                 [&](const EmbeddingTable& t) { return t.source_tag() == ck.source_tag; });
    if (it == loaded.end()) throw_data("no --table with source tag '" + ck.source_tag + "' for checkpoint " + path);
    const auto bound = bind_table(vocab, *it);
    check_composable(ck, bound);
    reports.push_back(evaluate_encoded(ck.model, encode_dataset(test, vocab, bound), ck.provenance.scenario));
    out << path << ": " << ck.source_tag << " / " << to_string(ck.provenance.scenario) << " AUROC "
        << reports.back().auroc << "\n";
  }
  m.write_output(dir, "report.json", reports_to_json(reports));
  m.write_output(dir, "results.tsv", render_result_table(reports));
  m.finish(dir);
  return kExitOk;
}

int cmd_synth(const CommonOptions& c, const std::string& vocab_path, std::ostream& out) {
  const fs::path dir = prepare_out_dir(c.out);
  SynthConfig cfg;
  if (!c.config.empty()) cfg = synth_config_from_json(read_file(c.config));
  if (c.seed) cfg.seed = *c.seed;
  Manifest m("synth", cfg.seed);
  if (!c.config.empty()) m.read_input("config", c.config);
  const ConceptVocabulary vocab =
      vocab_path.empty() ? influenza_vocabulary() : ConceptVocabulary::parse(m.read_input("vocab", vocab_path));
  m.set_config(json::parse(synth_config_to_json(cfg)));

  const auto sites = generate_synthetic_sites(cfg, vocab);
  m.write_output(dir, "vocabulary.json", vocab.to_json());
  m.write_output(dir, "synth_config.json", synth_config_to_json(cfg));
  m.write_output(dir, "source.csv", write_encounters(sites.source, vocab));
  m.write_output(dir, "target.csv", write_encounters(sites.target, vocab));
  m.write_output(dir, "onehot.emb.jsonl", serialize_embedding_table(build_one_hot_table(vocab)));
  m.write_output(dir, "semantic.emb.jsonl",
                 serialize_embedding_table(
                     synthetic_semantic_table(vocab, cfg.synonym_pairs, cfg.semantic_dimension, cfg.seed)));
  m.finish(dir);
  out << "synthetic sites: " << sites.source.size() << " source, " << sites.target.size() << " target encounters\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Clinical-concept embedding CNN with cross-site transfer", "ccnn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CCNN_VERSION);

  CommonOptions common;
  DataInputs inputs;
  FlagOverrides flags;

  std::string vocab_only;
  auto* onehot = app.add_subcommand("onehot", "Write the one-hot embedding table for a vocabulary");
  add_common(onehot, common, false);
  onehot->add_option("--vocab", vocab_only, "Vocabulary JSON")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a local model on one site");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--data", inputs.data, "Encounter CSV")->required();
  train_cmd->add_option("--vocab", inputs.vocab, "Vocabulary JSON")->required();
  train_cmd->add_option("--table", inputs.table, "Embedding table (.emb.jsonl)")->required();
  add_training_flags(train_cmd, flags);
  train_cmd->add_option("--freeze", flags.freeze, "Frozen groups: none | conv | fc");
  train_cmd->add_option("--filters", flags.num_filters, "Number of conv filters (default 100)");
  train_cmd->add_option("--dropout", flags.dropout, "Dropout rate on pooled features (default 0.5)");

  std::string ckpt_path, strategy;
  auto* transfer_cmd = app.add_subcommand("transfer", "Adapt a source-site checkpoint to a target site");
  add_common(transfer_cmd, common, true);
  transfer_cmd->add_option("--source-ckpt", ckpt_path, "Source checkpoint")->required();
  transfer_cmd->add_option("--strategy", strategy, "direct | linear | full")->required();
  transfer_cmd->add_option("--data", inputs.data, "Target encounter CSV");
  transfer_cmd->add_option("--vocab", inputs.vocab, "Vocabulary JSON");
  transfer_cmd->add_option("--table", inputs.table, "Embedding table (.emb.jsonl)");
  add_training_flags(transfer_cmd, flags);
  transfer_cmd->add_option("--freeze", flags.freeze, "(rejected: set by --strategy)");

  std::vector<std::string> eval_ckpts, eval_tables;
  std::optional<std::string> eval_cutoff;
  bool all_records = false;
  auto* eval_cmd = app.add_subcommand("eval", "Score checkpoints on a test window and write a report");
  add_common(eval_cmd, common, false);
  eval_cmd->add_option("--ckpt", eval_ckpts, "Checkpoint (repeatable)")->required();
  eval_cmd->add_option("--table", eval_tables, "Embedding table (repeatable, matched by source tag)")->required();
  eval_cmd->add_option("--data", inputs.data, "Encounter CSV")->required();
  eval_cmd->add_option("--vocab", inputs.vocab, "Vocabulary JSON")->required();
  eval_cmd->add_option("--cutoff", eval_cutoff, "Test window starts at this date YYYYMMDD (default 20140601)");
  eval_cmd->add_flag("--all-records", all_records, "Score every record instead of the post-cutoff window");

  std::string synth_vocab;
  auto* synth_cmd = app.add_subcommand("synth", "Generate paired synthetic sites and embedding tables");
  add_common(synth_cmd, common, true);
  synth_cmd->add_option("--vocab", synth_vocab, "Vocabulary JSON (default: built-in influenza schema)");

  std::vector<std::string> argv_storage{"ccnn"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    kernels::select(common.kernels);
    if (onehot->parsed()) return cmd_onehot(common, vocab_only, out);
    if (train_cmd->parsed()) return cmd_train(common, inputs, flags, out);
    if (transfer_cmd->parsed()) return cmd_transfer(common, ckpt_path, strategy, inputs, flags, out);
    if (eval_cmd->parsed()) {
      return cmd_eval(common, eval_ckpts, eval_tables, inputs.data, inputs.vocab, eval_cutoff, all_records, out);
    }
    if (synth_cmd->parsed()) return cmd_synth(common, synth_vocab, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::usage: return kExitUsage;
      case ErrorKind::data: return kExitData;
      case ErrorKind::numeric: return kExitNumeric;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace ccnn::cli
