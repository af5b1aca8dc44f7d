// SPDX-License-Identifier: Apache-2.0
#include "ccnn/synth.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "ccnn/error.hpp"
#include "ccnn/rng.hpp"
#include "json.hpp"

namespace ccnn {

using nlohmann::json;

namespace {

constexpr std::chrono::sys_days kFirstDay{std::chrono::year{2008} / std::chrono::June / 1};
constexpr std::chrono::sys_days kLastDay{std::chrono::year{2015} / std::chrono::May / 31};

// Synonym routing relative to one site.
enum class Role : std::uint8_t { plain, signal, hidden };

std::vector<Role> site_roles(const SynthConfig& cfg, const ConceptVocabulary& vocab, bool source_site) {
  std::vector<Role> roles(vocab.size(), Role::plain);
  for (const auto& c : cfg.signal_concepts) roles[*vocab.find(c)] = Role::signal;
  for (const auto& p : cfg.synonym_pairs) {
    const std::size_t here = *vocab.find(source_site ? p.source_concept : p.target_concept);
    const std::size_t there = *vocab.find(source_site ? p.target_concept : p.source_concept);
    roles[here] = Role::signal;
    roles[there] = Role::hidden;
  }
  return roles;
}

std::vector<EncounterRecord> generate_site(const SynthConfig& cfg, const ConceptVocabulary& vocab,
                                           bool source_site) {
  const std::size_t n = source_site ? cfg.n_source : cfg.n_target;
  const double prevalence = source_site ? cfg.prevalence_source : cfg.prevalence_target;
  const auto roles = site_roles(cfg, vocab, source_site);
  const double p_boost = boosted_rate(cfg.background_rate, cfg.signal_strength);
  const auto n_days = static_cast<std::uint64_t>((kLastDay - kFirstDay).count() + 1);
  const std::uint16_t present = 0;  // binary findings are {P, A}
  const std::uint16_t absent = 1;

  Rng rng(derive_seed(cfg.seed, source_site ? seed_stream::synth_source : seed_stream::synth_target));
  std::vector<EncounterRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    EncounterRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "%s%06zu", source_site ? "S" : "T", i + 1);
    r.encounter_id = id;
    r.outcome = rng.bernoulli(prevalence) ? Outcome::positive : Outcome::negative;
    r.admit_date = std::chrono::year_month_day{kFirstDay + std::chrono::days{rng.below(n_days)}};
    r.labels.resize(vocab.size());
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      const auto& e = vocab.entry(k);
      if (e.is_binary_finding()) {
        const double u = rng.uniform();
        double p = cfg.background_rate;
        if (roles[k] == Role::hidden) p = 0.0;
        if (roles[k] == Role::signal && r.outcome == Outcome::positive) p = p_boost;
        r.labels[k] = u < p ? present : absent;
      } else {
        r.labels[k] = static_cast<std::uint16_t>(rng.below(e.labels.size()));
      }
    }
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      if (!rng.bernoulli(cfg.noise_rate)) continue;
      const std::size_t n_labels = vocab.entry(k).labels.size();
      const std::uint64_t shift = 1 + rng.below(n_labels - 1);
      r.labels[k] = static_cast<std::uint16_t>((r.labels[k] + shift) % n_labels);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

void normalise(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
}

}  // namespace

double boosted_rate(double background_rate, double signal_strength) {
  if (std::isinf(signal_strength)) return 1.0;
  const double odds = background_rate / (1.0 - background_rate) * std::exp(signal_strength);
  return odds / (1.0 + odds);
}

void validate(const SynthConfig& cfg, const ConceptVocabulary& vocab) {
  if (cfg.n_source < 1 || cfg.n_target < 1) throw_data("synthetic site sizes must be at least 1");
  for (double p : {cfg.prevalence_source, cfg.prevalence_target}) {
    if (!(p > 0.0 && p < 1.0)) throw_data("invalid probability: prevalence must lie in (0, 1)");
  }
  if (!(cfg.background_rate > 0.0 && cfg.background_rate < 1.0)) {
    throw_data("invalid probability: background_rate must lie in (0, 1)");
  }
  if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate <= 1.0)) throw_data("invalid probability: noise_rate must lie in [0, 1]");
  if (!(cfg.signal_strength >= 0.0)) throw_data("signal_strength must be non-negative");
  if (cfg.semantic_dimension < 2) throw_data("semantic_dimension must be at least 2");

  std::unordered_set<std::string> used;
  auto claim = [&](const std::string& c) {
    const auto k = vocab.find(c);
    if (!k) throw_data("synthetic config names unknown concept: " + c);
    if (!vocab.entry(*k).is_binary_finding()) throw_data("synthetic signal concept must be a P/A finding: " + c);
    if (!used.insert(c).second) throw_data("concept used more than once in synthetic config: " + c);
  };
  for (const auto& c : cfg.signal_concepts) claim(c);
  for (const auto& p : cfg.synonym_pairs) {
    if (p.source_concept == p.target_concept) throw_data("synonym pair must name two distinct concepts: " + p.source_concept);
    claim(p.source_concept);
    claim(p.target_concept);
  }
}

SynthConfig synth_config_from_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw_data(std::string("synthetic config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw_data("synthetic config must be a JSON object");
  static const std::unordered_set<std::string> kKeys{
      "n_source",        "n_target",      "prevalence_source", "prevalence_target", "signal_concepts",
      "synonym_pairs",   "signal_strength", "noise_rate",      "background_rate",   "semantic_dimension",
      "seed"};
  for (const auto& [k, _] : doc.items()) {
    if (!kKeys.contains(k)) throw_data("unknown synthetic config key: " + k);
  }
  SynthConfig cfg;
  try {
    cfg.n_source = doc.value("n_source", cfg.n_source);
    cfg.n_target = doc.value("n_target", cfg.n_target);
    cfg.prevalence_source = doc.value("prevalence_source", cfg.prevalence_source);
    cfg.prevalence_target = doc.value("prevalence_target", cfg.prevalence_target);
    cfg.signal_concepts = doc.value("signal_concepts", cfg.signal_concepts);
    if (doc.contains("synonym_pairs")) {
      cfg.synonym_pairs.clear();
      for (const auto& p : doc["synonym_pairs"]) {
        cfg.synonym_pairs.push_back({p.at(0).get<std::string>(), p.at(1).get<std::string>()});
      }
    }
    cfg.signal_strength = doc.value("signal_strength", cfg.signal_strength);
    cfg.noise_rate = doc.value("noise_rate", cfg.noise_rate);
    cfg.background_rate = doc.value("background_rate", cfg.background_rate);
    cfg.semantic_dimension = doc.value("semantic_dimension", cfg.semantic_dimension);
    cfg.seed = doc.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw_data(std::string("malformed synthetic config: ") + e.what());
  }
  return cfg;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
  json pairs = json::array();
  for (const auto& p : cfg.synonym_pairs) pairs.push_back({p.source_concept, p.target_concept});
  const json doc{{"n_source", cfg.n_source},
                 {"n_target", cfg.n_target},
                 {"prevalence_source", cfg.prevalence_source},
                 {"prevalence_target", cfg.prevalence_target},
                 {"signal_concepts", cfg.signal_concepts},
                 {"synonym_pairs", pairs},
                 {"signal_strength", cfg.signal_strength},
                 {"noise_rate", cfg.noise_rate},
                 {"background_rate", cfg.background_rate},
                 {"semantic_dimension", cfg.semantic_dimension},
                 {"seed", cfg.seed}};
  return doc.dump(2) + "\n";
}

SyntheticSites generate_synthetic_sites(const SynthConfig& cfg, const ConceptVocabulary& vocab) {
  validate(cfg, vocab);
  return {generate_site(cfg, vocab, true), generate_site(cfg, vocab, false)};
}

EmbeddingTable synthetic_semantic_table(const ConceptVocabulary& vocab, const std::vector<SynonymPair>& pairs,
                                        std::size_t dimension, std::uint64_t seed) {
  if (dimension < 2) throw_data("semantic table dimension must be at least 2");
  constexpr double kSynonymOffset = 0.25;   // tangent offset: cosine = 1 / sqrt(1 + 0.25^2)
  constexpr double kAbsentConcept = 0.35;   // weight of the concept direction in "A" vectors

  Rng rng(derive_seed(seed, seed_stream::synth_table));
  std::vector<std::vector<double>> direction(vocab.size());
  for (std::size_t k = 0; k < vocab.size(); ++k) direction[k] = random_unit(rng, dimension);

  for (const auto& p : pairs) {
    const auto a = vocab.find(p.source_concept);
    const auto b = vocab.find(p.target_concept);
    if (!a || !b) throw_data("synonym pair names unknown concept");
    const auto& u = direction[*a];
    std::vector<double> t = random_unit(rng, dimension);
    double along = 0.0;
    for (std::size_t i = 0; i < dimension; ++i) along += t[i] * u[i];
    for (std::size_t i = 0; i < dimension; ++i) t[i] -= along * u[i];
    normalise(t);
    std::vector<double> v(dimension);
    for (std::size_t i = 0; i < dimension; ++i) v[i] = u[i] + kSynonymOffset * t[i];
    normalise(v);
    direction[*b] = std::move(v);
  }

  const std::vector<double> negation = random_unit(rng, dimension);
  EmbeddingTable table(dimension, std::string(kSyntheticSemanticTag));
  std::vector<double> v(dimension);
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const auto& e = vocab.entry(k);
    if (e.is_binary_finding()) {
      table.add(e.id, kPresent, direction[k]);
      for (std::size_t i = 0; i < dimension; ++i) v[i] = negation[i] + kAbsentConcept * direction[k][i];
      normalise(v);
      table.add(e.id, kAbsent, v);
    } else {
      for (const auto& label : e.labels) table.add(e.id, label, random_unit(rng, dimension));
    }
  }
  return table;
}

}  // namespace ccnn
