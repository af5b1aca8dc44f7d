// SPDX-License-Identifier: Apache-2.0
#include "ccnn/transfer.hpp"

#include <cmath>

#include "ccnn/error.hpp"
#include "ccnn/text.hpp"

namespace ccnn {

using nlohmann::json;

namespace {

constexpr std::string_view kCheckpointFormat = "ccnn-checkpoint";

json provenance_json(const Provenance& p) {
  return json{{"created_by", p.created_by},
              {"scenario", std::string(to_string(p.scenario))},
              {"seed", p.seed},
              {"data_window", p.data_window},
              {"config", p.config}};
}

void require_provenance(const Provenance& p) {
  if (p.created_by.empty()) throw_data("checkpoint provenance needs created_by");
  if (p.data_window.empty()) throw_data("checkpoint provenance needs a data_window description");
  if (!p.config.is_object()) throw_data("checkpoint provenance config must be an object");
}

// Reads an array of finite numbers of the given length.
std::vector<double> read_reals(const json& j, std::size_t expected, const std::string& what) {
  if (!j.is_array()) throw_data("checkpoint field " + what + " must be an array");
  if (j.size() != expected) {
    throw_data("checkpoint field " + what + " has " + std::to_string(j.size()) + " values, expected " +
               std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& x : j) {
    if (!x.is_number()) throw_data("checkpoint field " + what + " must contain numbers");
    const double v = x.get<double>();
    if (!std::isfinite(v)) throw_numeric("non-finite value in checkpoint field " + what);
    out.push_back(v);
  }
  return out;
}

Matrix read_matrix(const json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) {
    throw_data("checkpoint field " + what + " must have " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto v = read_reals(j[r], cols, what + "[" + std::to_string(r) + "]");
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

void append_matrix(std::string& out, const Matrix& m) {
  out += "[\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    append_real_array(out, m.row(r));
    out += r + 1 < m.rows() ? ",\n" : "\n";
  }
  out += "]";
}

}  // namespace

std::string save_checkpoint(const CnnModel& model, std::string_view source_tag, const Provenance& provenance) {
  if (source_tag.empty()) throw_data("checkpoint needs a source tag");
  require_provenance(provenance);
  std::string out = "{\n";
  out += "\"format\":" + json_quote(kCheckpointFormat) + ",\n";
  out += "\"format_version\":" + std::to_string(kCheckpointVersion) + ",\n";
  out += "\"source_tag\":" + json_quote(source_tag) + ",\n";
  out += "\"dimension\":" + std::to_string(model.dimension()) + ",\n";
  out += "\"num_filters\":" + std::to_string(model.num_filters()) + ",\n";
  out += "\"dropout_rate\":" + format_real(model.dropout_rate()) + ",\n";
  out += "\"init_seed\":" + std::to_string(model.init_seed()) + ",\n";
  out += "\"provenance\":" + provenance_json(provenance).dump() + ",\n";
  out += "\"conv_filters\":";
  append_matrix(out, model.conv_filters());
  out += ",\n\"fc_weights\":";
  append_matrix(out, model.fc_weights());
  out += ",\n\"fc_bias\":";
  append_real_array(out, model.fc_bias());
  out += "\n}\n";
  return out;
}

Checkpoint load_checkpoint(std::string_view file_content) {
  json doc;
  try {
    doc = json::parse(file_content);
  } catch (const json::parse_error& e) {
    throw_data(std::string("checkpoint is not valid JSON: ") + e.what());
  } catch (const json::out_of_range&) {
    throw_numeric("checkpoint contains a number outside the double range");
  }
  if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat) {
    throw_data("not a ccnn checkpoint (format field missing or wrong)");
  }
  if (!doc.contains("format_version") || !doc["format_version"].is_number_integer()) {
    throw_data("checkpoint has no format_version");
  }
  const int version = doc["format_version"].get<int>();
  if (version != kCheckpointVersion) {
    throw_data("checkpoint version mismatch: file has version " + std::to_string(version) + ", supported " +
               std::to_string(kCheckpointVersion));
  }
  auto require_uint = [&](const char* key) -> std::uint64_t {
    if (!doc.contains(key) || !doc[key].is_number_unsigned()) {
      throw_data(std::string("checkpoint field ") + key + " must be a non-negative integer");
    }
    return doc[key].get<std::uint64_t>();
  };
  const std::size_t dim = require_uint("dimension");
  const std::size_t filters = require_uint("num_filters");
  const std::uint64_t init_seed = require_uint("init_seed");
  if (dim == 0 || filters == 0) throw_data("checkpoint dimension and num_filters must be positive");
  if (!doc.contains("source_tag") || !doc["source_tag"].is_string() || doc["source_tag"].get<std::string>().empty()) {
    throw_data("checkpoint needs a non-empty source_tag");
  }
  if (!doc.contains("dropout_rate") || !doc["dropout_rate"].is_number()) throw_data("checkpoint needs dropout_rate");

  Checkpoint ck{version, doc["source_tag"].get<std::string>(),
                CnnModel(read_matrix(doc.value("conv_filters", json()), filters, dim, "conv_filters"),
                         read_matrix(doc.value("fc_weights", json()), kNumClasses, filters, "fc_weights"),
                         [&] {
                           const auto b = read_reals(doc.value("fc_bias", json()), kNumClasses, "fc_bias");
                           return Logits{b[0], b[1]};
                         }(),
                         doc["dropout_rate"].get<double>(), init_seed),
                {}};

  const auto prov = doc.find("provenance");
  if (prov == doc.end() || !prov->is_object()) throw_data("checkpoint has no provenance; refusing to load");
  try {
    ck.provenance.created_by = prov->at("created_by").get<std::string>();
    ck.provenance.scenario = parse_scenario(prov->at("scenario").get<std::string>());
    ck.provenance.seed = prov->at("seed").get<std::uint64_t>();
    ck.provenance.data_window = prov->at("data_window").get<std::string>();
    ck.provenance.config = prov->at("config");
  } catch (const json::exception& e) {
    throw_data(std::string("incomplete checkpoint provenance: ") + e.what());
  }
  require_provenance(ck.provenance);
  return ck;
}

void check_composable(const Checkpoint& checkpoint, const BoundTable& table) {
  if (checkpoint.model.dimension() != table.dimension()) {
    throw_data("dimension mismatch: checkpoint expects embedding dimension " +
               std::to_string(checkpoint.model.dimension()) + ", table '" + table.source_tag + "' has dimension " +
               std::to_string(table.dimension()));
  }
  if (checkpoint.source_tag != table.source_tag) {
    throw_data("embedding family mismatch: checkpoint was trained with '" + checkpoint.source_tag +
               "', table is '" + table.source_tag + "'");
  }
}

FreezeMask freeze_mask_for(TransferStrategy strategy) {
  switch (strategy) {
    case TransferStrategy::direct_share: return {true, true};
    case TransferStrategy::tune_linear: return {true, false};
    case TransferStrategy::tune_conv_and_linear: return {false, false};
  }
  return {true, true};
}

Scenario scenario_for(TransferStrategy strategy) {
  switch (strategy) {
    case TransferStrategy::direct_share: return Scenario::direct;
    case TransferStrategy::tune_linear: return Scenario::tune_linear;
    case TransferStrategy::tune_conv_and_linear: return Scenario::tune_full;
  }
  return Scenario::direct;
}

std::string_view to_string(TransferStrategy strategy) {
  switch (strategy) {
    case TransferStrategy::direct_share: return "direct_share";
    case TransferStrategy::tune_linear: return "tune_linear";
    case TransferStrategy::tune_conv_and_linear: return "tune_conv_and_linear";
  }
  return "direct_share";
}

TransferStrategy parse_strategy(std::string_view text) {
  if (text == "direct" || text == "direct_share") return TransferStrategy::direct_share;
  if (text == "linear" || text == "tune_linear") return TransferStrategy::tune_linear;
  if (text == "full" || text == "tune_conv_and_linear") return TransferStrategy::tune_conv_and_linear;
  throw_usage("unknown transfer strategy: '" + std::string(text) + "' (expected direct, linear, full)");
}

TrainResult run_transfer(const Checkpoint& source, TransferStrategy strategy, const EncodedDataset* target_train,
                         const EncodedDataset* target_val, TrainConfig cfg) {
  for (const EncodedDataset* d : {target_train, target_val}) {
    if (d != nullptr && !d->empty()) check_composable(source, d->table);
  }
  if (strategy == TransferStrategy::direct_share) {
    TrainHistory history;
    history.selection_metric = "none (direct share)";
    if (target_val != nullptr && !target_val->empty()) {
      history.initial = evaluate_dataset(source.model, *target_val);
      if (target_train != nullptr && !target_train->empty()) {
        history.initial.train_loss = evaluate_dataset(source.model, *target_train).validation_loss;
      }
    }
    return TrainResult{source.model, std::move(history)};
  }
  if (target_train == nullptr || target_train->empty() || target_val == nullptr || target_val->empty()) {
    throw_data("target training and validation data are required for " + std::string(to_string(strategy)));
  }
  cfg.freeze = freeze_mask_for(strategy);
  return train(source.model, *target_train, *target_val, cfg);
}

}  // namespace ccnn
