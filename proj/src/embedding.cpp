// SPDX-License-Identifier: Apache-2.0
#include "ccnn/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>

#include "ccnn/error.hpp"
#include "ccnn/text.hpp"
#include "json.hpp"

namespace ccnn {

using nlohmann::json;

namespace {

std::string key_of(std::string_view concept_id, std::string_view label) {
  std::string k(concept_id);
  k.push_back('\x1f');
  k.append(label);
  return k;
}

// NaN / Infinity are not JSON literals, so the parser rejects them. This
// spots them as array elements so the error names the actual problem.
bool mentions_non_finite(std::string_view line) {
  auto skip_space = [&](std::size_t i) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return i;
  };
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '[' && line[i] != ',') continue;
    std::size_t j = skip_space(i + 1);
    if (j < line.size() && (line[j] == '-' || line[j] == '+')) ++j;
    std::string word;
    while (j < line.size() && std::isalpha(static_cast<unsigned char>(line[j]))) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(line[j]))));
      ++j;
    }
    j = skip_space(j);
    const bool closed = j < line.size() && (line[j] == ',' || line[j] == ']');
    if (closed && (word == "nan" || word == "inf" || word == "infinity")) return true;
  }
  return false;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::string source_tag)
    : dimension_(dimension), source_tag_(std::move(source_tag)) {
  if (dimension_ == 0) throw_data("embedding dimension must be positive");
}

void EmbeddingTable::add(std::string_view concept_id, std::string_view label, std::span<const double> vector) {
  if (vector.size() != dimension_) {
    throw_data("dimension mismatch: vector for (" + std::string(concept_id) + ", " + std::string(label) +
               ") has length " + std::to_string(vector.size()) + ", table dimension is " +
               std::to_string(dimension_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) {
      throw_numeric("non-finite value in vector for (" + std::string(concept_id) + ", " + std::string(label) + ")");
    }
  }
  if (!index_.emplace(key_of(concept_id, label), keys_.size()).second) {
    throw_data("duplicate embedding key (" + std::string(concept_id) + ", " + std::string(label) + ")");
  }
  keys_.emplace_back(std::string(concept_id), std::string(label));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view concept_id, std::string_view label) const {
  const auto it = index_.find(key_of(concept_id, label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingTable build_one_hot_table(const ConceptVocabulary& vocab) {
  if (vocab.size() == 0) throw_data("cannot build a one-hot table for an empty vocabulary");
  const std::size_t dim = vocab.one_hot_dimension();
  EmbeddingTable table(dim, std::string(kOneHotTag));
  std::vector<double> v(dim, 0.0);
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const auto& e = vocab.entry(k);
    for (std::size_t l = 0; l < e.labels.size(); ++l) {
      const std::size_t hot = vocab.pair_id(k, l);
      v[hot] = 1.0;
      table.add(e.id, e.labels[l], v);
      v[hot] = 0.0;
    }
  }
  return table;
}

EmbeddingTable load_embedding_table(std::string_view file_content) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    while (pos < file_content.size()) {
      std::size_t end = file_content.find('\n', pos);
      if (end == std::string_view::npos) end = file_content.size();
      std::string_view line = file_content.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") != std::string_view::npos) return line;
    }
    return std::nullopt;
  };
  auto parse_line = [&](std::string_view line) {
    try {
      return json::parse(line);
    } catch (const json::parse_error&) {
      if (mentions_non_finite(line)) {
        throw_numeric("line " + std::to_string(line_no) + ": non-finite value in embedding file");
      }
      throw_data("line " + std::to_string(line_no) + ": malformed JSON in embedding file");
    } catch (const json::out_of_range&) {
      throw_numeric("line " + std::to_string(line_no) + ": value outside the double range");
    }
  };

  const auto header_line = next_line();
  if (!header_line) throw_data("embedding file is empty");
  const json header = parse_line(*header_line);
  if (!header.is_object() || !header.contains("dimension") || !header.contains("source_tag")) {
    throw_data("embedding header must be an object with dimension and source_tag");
  }
  if (!header["dimension"].is_number_unsigned() || header["dimension"].get<std::uint64_t>() == 0) {
    throw_data("embedding header dimension must be a positive integer");
  }
  if (!header["source_tag"].is_string() || header["source_tag"].get<std::string>().empty()) {
    throw_data("embedding header source_tag must be a non-empty string");
  }
  EmbeddingTable table(header["dimension"].get<std::size_t>(), header["source_tag"].get<std::string>());

  std::vector<double> v;
  while (const auto line = next_line()) {
    const json rec = parse_line(*line);
    if (!rec.is_object() || !rec.contains("concept") || !rec.contains("label") || !rec.contains("vector") ||
        !rec["concept"].is_string() || !rec["label"].is_string() || !rec["vector"].is_array()) {
      throw_data("line " + std::to_string(line_no) + ": record needs string concept, string label, vector array");
    }
    v.clear();
    for (const auto& x : rec["vector"]) {
      if (!x.is_number()) throw_data("line " + std::to_string(line_no) + ": vector entries must be numbers");
      v.push_back(x.get<double>());
    }
    try {
      table.add(rec["concept"].get<std::string>(), rec["label"].get<std::string>(), v);
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (table.size() == 0) throw_data("embedding file has a header but no vectors");
  return table;
}

std::string serialize_embedding_table(const EmbeddingTable& table) {
  std::string out = "{\"dimension\":" + std::to_string(table.dimension()) +
                    ",\"source_tag\":" + json_quote(table.source_tag()) + "}\n";
  out.reserve(out.size() + table.size() * (table.dimension() * 24 + 48));
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += "{\"concept\":" + json_quote(table.concept_of(i)) + ",\"label\":" + json_quote(table.label_of(i)) +
           ",\"vector\":";
    append_real_array(out, table.vector(i));
    out += "}\n";
  }
  return out;
}

EncodedInstance encode_instance(const EncounterRecord& record, const ConceptVocabulary& vocab,
                                const EmbeddingTable& table) {
  if (record.labels.size() != vocab.size()) {
    throw_data("encounter " + record.encounter_id + " was not parsed against this vocabulary");
  }
  EncodedInstance out{Matrix(vocab.size(), table.dimension()), record.outcome};
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const std::string& label = record.label_of(vocab, k);
    const auto entry = table.find(vocab.entry(k).id, label);
    if (!entry) {
      throw_data("embedding table '" + table.source_tag() + "' has no vector for (" + vocab.entry(k).id + ", " +
                 label + ")");
    }
    const auto src = table.vector(*entry);
    std::copy(src.begin(), src.end(), out.matrix.row(k).begin());
  }
  return out;
}

BoundTable bind_table(const ConceptVocabulary& vocab, const EmbeddingTable& table) {
  auto rows = std::make_shared<Matrix>(vocab.one_hot_dimension(), table.dimension());
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const auto& e = vocab.entry(k);
    for (std::size_t l = 0; l < e.labels.size(); ++l) {
      const auto entry = table.find(e.id, e.labels[l]);
      if (!entry) {
        throw_data("embedding table '" + table.source_tag() + "' has no vector for (" + e.id + ", " +
                   e.labels[l] + ")");
      }
      const auto src = table.vector(*entry);
      std::copy(src.begin(), src.end(), rows->row(vocab.pair_id(k, l)).begin());
    }
  }
  return BoundTable{std::move(rows), table.source_tag()};
}

EncodedDataset encode_dataset(const std::vector<EncounterRecord>& records, const ConceptVocabulary& vocab,
                              const BoundTable& table) {
  if (!table.pair_rows || table.pair_rows->rows() != vocab.one_hot_dimension()) {
    throw_data("bound table does not match the vocabulary");
  }
  EncodedDataset out{table, {}};
  out.instances.reserve(records.size());
  for (const auto& r : records) {
    if (r.labels.size() != vocab.size()) {
      throw_data("encounter " + r.encounter_id + " was not parsed against this vocabulary");
    }
    IndexedInstance inst;
    inst.outcome = r.outcome;
    inst.rows.resize(vocab.size());
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      inst.rows[k] = static_cast<std::uint32_t>(vocab.pair_id(k, r.labels[k]));
    }
    out.instances.push_back(std::move(inst));
  }
  return out;
}

}  // namespace ccnn
