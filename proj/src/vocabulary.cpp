// SPDX-License-Identifier: Apache-2.0
#include "ccnn/vocabulary.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "ccnn/error.hpp"
#include "json.hpp"

namespace ccnn {

using nlohmann::json;

namespace {

constexpr std::string_view kVocabularyFormat = "ccnn-vocabulary";
constexpr int kVocabularyVersion = 1;

}  // namespace

bool ConceptEntry::is_binary_finding() const {
  return labels.size() == 2 && labels[0] == kPresent && labels[1] == kAbsent;
}

ConceptVocabulary::ConceptVocabulary(std::vector<ConceptEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw_data("vocabulary has no concepts");
  offsets_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    ConceptEntry& e = entries_[i];
    if (e.id.empty()) throw_data("vocabulary concept " + std::to_string(i) + " has an empty id");
    if (!index_.emplace(e.id, i).second) throw_data("duplicate concept id in vocabulary: " + e.id);
    if (e.labels.size() < 2) throw_data("concept " + e.id + " needs at least two labels");
    std::unordered_set<std::string> seen;
    for (const auto& l : e.labels) {
      if (l.empty()) throw_data("concept " + e.id + " has an empty label");
      if (!seen.insert(l).second) throw_data("concept " + e.id + " repeats label " + l);
    }
    if (!e.default_label && e.is_binary_finding()) e.default_label = std::string(kAbsent);
    if (e.default_label && !seen.contains(*e.default_label)) {
      throw_data("default label " + *e.default_label + " of concept " + e.id + " is not an allowed label");
    }
    offsets_.push_back(pair_count_);
    pair_count_ += e.labels.size();
  }
}

std::optional<std::size_t> ConceptVocabulary::find(std::string_view concept_id) const {
  const auto it = index_.find(std::string(concept_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> ConceptVocabulary::label_index(std::size_t concept_index,
                                                          std::string_view label) const {
  const auto& labels = entries_.at(concept_index).labels;
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

ConceptVocabulary ConceptVocabulary::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_data(std::string("vocabulary is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kVocabularyFormat) {
    throw_data("vocabulary document must be an object with format \"ccnn-vocabulary\"");
  }
  if (doc.value("version", 0) != kVocabularyVersion) throw_data("unsupported vocabulary version");
  const auto concepts = doc.find("concepts");
  if (concepts == doc.end() || !concepts->is_array()) throw_data("vocabulary needs a \"concepts\" array");

  std::vector<ConceptEntry> entries;
  for (const auto& c : *concepts) {
    try {
      ConceptEntry e;
      e.id = c.at("id").get<std::string>();
      e.labels = c.at("labels").get<std::vector<std::string>>();
      if (c.contains("default")) e.default_label = c.at("default").get<std::string>();
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw_data(std::string("malformed vocabulary entry: ") + e.what());
    }
  }
  return ConceptVocabulary(std::move(entries));
}

std::string ConceptVocabulary::to_json() const {
  // One concept per line keeps the file diffable.
  std::string out = "{\"format\":\"ccnn-vocabulary\",\"version\":1,\"concepts\":[\n";
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    json j{{"id", e.id}, {"labels", e.labels}};
    if (e.default_label && !e.is_binary_finding()) j["default"] = *e.default_label;
    out += "  " + j.dump();
    out += (i + 1 < entries_.size()) ? ",\n" : "\n";
  }
  out += "]}\n";
  return out;
}

ConceptVocabulary influenza_vocabulary() {
  static constexpr std::array<std::string_view, 69> kFindings = {
      "cough",          "productive_cough",
      "nonproductive_cough", "subjective_fever",
      "feverish",       "chills",
      "rigors",         "sweats",
      "myalgia",        "generalized_aches_and_pains",
      "arthralgia",     "headache",
      "malaise",        "fatigue",
      "lethargy",       "sore_throat",
      "pharyngeal_erythema", "tonsillar_exudate",
      "hoarseness",     "rhinorrhea",
      "runny_nose",     "nasal_congestion",
      "sneezing",       "sinus_pain",
      "ear_pain",       "conjunctivitis",
      "dyspnea",        "shortness_of_breath",
      "wheezing",       "tachypnea",
      "chest_pain",     "chest_tightness",
      "rales",          "rhonchi",
      "hypoxemia",      "cyanosis",
      "nausea",         "vomiting",
      "diarrhea",       "abdominal_pain",
      "anorexia",       "dehydration",
      "dizziness",      "syncope",
      "altered_mental_status", "confusion",
      "irritability",   "seizure",
      "neck_stiffness", "rash",
      "lymphadenopathy", "tachycardia",
      "hypotension",    "asthma_history",
      "copd_history",   "pneumonia_on_imaging",
      "infiltrate",     "otitis_media",
      "bronchitis",     "croup",
      "influenza_like_illness", "sick_contact",
      "recent_travel",  "poor_feeding",
      "decreased_activity", "back_pain",
      "weakness",       "stridor",
      "apnea",
  };
  std::vector<ConceptEntry> entries;
  entries.reserve(kFindings.size() + 2);
  for (const auto id : kFindings) {
    entries.push_back({std::string(id), {std::string(kPresent), std::string(kAbsent)}, std::nullopt});
  }
  entries.push_back({"temperature", {"High grade", "Low grade", "Inconsequential", "No info"}, "No info"});
  entries.push_back({"age_group", {"0-5", "6-64", "65+"}, std::nullopt});
  return ConceptVocabulary(std::move(entries));
}

}  // namespace ccnn
