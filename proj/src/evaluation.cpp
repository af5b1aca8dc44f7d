// SPDX-License-Identifier: Apache-2.0
#include "ccnn/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ccnn/error.hpp"
#include "ccnn/text.hpp"

namespace ccnn {

RankStatistic rank_statistic(std::span<const double> scores, std::span<const Outcome> labels) {
  if (scores.size() != labels.size()) throw_data("scores and labels differ in length");
  for (double s : scores) {
    if (!std::isfinite(s)) throw_numeric("non-finite score in AUROC input");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  RankStatistic out;
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share the midrank
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == Outcome::positive) positive_rank_sum += midrank;
    }
    i = j;
  }
  for (Outcome l : labels) (l == Outcome::positive ? out.n_positive : out.n_negative) += 1;
  const double np = static_cast<double>(out.n_positive);
  out.u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return out;
}

double auroc(std::span<const double> scores, std::span<const Outcome> labels) {
  const RankStatistic r = rank_statistic(scores, labels);
  if (r.n_positive == 0 || r.n_negative == 0) {
    throw_numeric("AUROC undefined: labels contain a single class (" + std::to_string(r.n_positive) +
                  " positive, " + std::to_string(r.n_negative) + " negative)");
  }
  return r.u / (static_cast<double>(r.n_positive) * static_cast<double>(r.n_negative));
}

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::local: return "local";
    case Scenario::direct: return "direct";
    case Scenario::tune_linear: return "tune_linear";
    case Scenario::tune_full: return "tune_full";
  }
  return "local";
}

Scenario parse_scenario(std::string_view text) {
  for (Scenario s : {Scenario::local, Scenario::direct, Scenario::tune_linear, Scenario::tune_full}) {
    if (text == to_string(s)) return s;
  }
  throw_data("unknown scenario tag: " + std::string(text));
}

std::vector<double> score_dataset(const CnnModel& model, const EncodedDataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  if (data.empty()) return out;
  const StoreScores store = score_store(model, *data.table.pair_rows);
  for (const auto& inst : data.instances) {
    out.push_back(predict_proba(model, RowSet::indexed(*data.table.pair_rows, inst.rows), &store));
  }
  return out;
}

EvalReport evaluate_encoded(const CnnModel& model, const EncodedDataset& test_set, Scenario scenario) {
  if (test_set.empty()) throw_data("test set is empty");
  EvalReport r;
  r.source_tag = test_set.table.source_tag;
  r.scenario = scenario;
  r.scores = score_dataset(model, test_set);
  std::vector<Outcome> labels;
  labels.reserve(test_set.size());
  for (const auto& inst : test_set.instances) labels.push_back(inst.outcome);
  r.auroc = auroc(r.scores, labels);
  for (Outcome l : labels) (l == Outcome::positive ? r.n_positive : r.n_negative) += 1;
  std::string digest_input;
  for (double s : r.scores) {
    digest_input += format_real(s);
    digest_input.push_back('\n');
  }
  r.score_digest = sha256_hex(digest_input);
  return r;
}

EvalReport evaluate_model(const CnnModel& model, const std::vector<EncounterRecord>& test_set,
                          const EmbeddingTable& table, const ConceptVocabulary& vocab, Scenario scenario) {
  if (test_set.empty()) throw_data("test set is empty");
  if (table.dimension() != model.dimension()) {
    throw_data("dimension mismatch: model dimension " + std::to_string(model.dimension()) + ", table '" +
               table.source_tag() + "' dimension " + std::to_string(table.dimension()));
  }
  return evaluate_encoded(model, encode_dataset(test_set, vocab, bind_table(vocab, table)), scenario);
}

std::string reports_to_json(const std::vector<EvalReport>& reports) {
  std::string out = "{\"reports\":[";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out += i == 0 ? "\n" : ",\n";
    out += "  {\"source_tag\":" + json_quote(r.source_tag) + ",\"scenario\":" + json_quote(to_string(r.scenario)) +
           ",\"auroc\":" + format_real(r.auroc) + ",\"n_positive\":" + std::to_string(r.n_positive) +
           ",\"n_negative\":" + std::to_string(r.n_negative) + ",\"score_digest\":" + json_quote(r.score_digest) +
           "}";
  }
  out += "\n]}\n";
  return out;
}

std::string render_result_table(const std::vector<EvalReport>& reports) {
  static constexpr std::array kColumns{Scenario::local, Scenario::direct, Scenario::tune_linear,
                                       Scenario::tune_full};
  std::vector<std::string> sources;
  for (const auto& r : reports) {
    if (std::find(sources.begin(), sources.end(), r.source_tag) == sources.end()) sources.push_back(r.source_tag);
  }
  std::string out = "embedding";
  for (Scenario s : kColumns) {
    out.push_back('\t');
    out += to_string(s);
  }
  out.push_back('\n');
  for (const auto& src : sources) {
    out += src;
    for (Scenario s : kColumns) {
      out.push_back('\t');
      const auto it = std::find_if(reports.rbegin(), reports.rend(),
                                   [&](const EvalReport& r) { return r.source_tag == src && r.scenario == s; });
      if (it == reports.rend()) {
        out.push_back('-');
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", it->auroc);
        out += buf;
      }
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace ccnn
