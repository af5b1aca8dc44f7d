// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic two-site encounter generator.
//
// Each encounter draws a latent outcome with the site's prevalence. Binary
// findings are "P" with a background rate b; for positive encounters the
// signal findings use the boosted rate odds(b) * exp(signal_strength)
// instead. Shared signal findings behave the same at both sites. For each
// synonym pair the source site documents the finding only under
// source_concept and the target site only under target_concept; the other
// member of the pair is never charted at that site. Categorical concepts are
// uniform over their labels. Finally every assignment is flipped with
// probability noise_rate (binary: P <-> A; categorical: a different label
// chosen uniformly).

#include <cstdint>
#include <string>
#include <vector>

#include "ccnn/embedding.hpp"
#include "ccnn/encounter.hpp"
#include "ccnn/vocabulary.hpp"

namespace ccnn {

struct SynonymPair {
  std::string source_concept;
  std::string target_concept;

  bool operator==(const SynonymPair&) const = default;
};

struct SynthConfig {
  std::size_t n_source = 2000;
  std::size_t n_target = 2000;
  double prevalence_source = 0.15;
  double prevalence_target = 0.15;
  std::vector<std::string> signal_concepts{"cough", "headache"};
  std::vector<SynonymPair> synonym_pairs{{"myalgia", "generalized_aches_and_pains"},
                                         {"rhinorrhea", "runny_nose"},
                                         {"dyspnea", "shortness_of_breath"},
                                         {"feverish", "subjective_fever"}};
  double signal_strength = 2.0;
  double noise_rate = 0.05;
  double background_rate = 0.1;
  std::size_t semantic_dimension = 64;
  std::uint64_t seed = 7;

  bool operator==(const SynthConfig&) const = default;
};

/// Throws Error(data) when the configuration is inconsistent with itself or
/// with the vocabulary.
void validate(const SynthConfig& cfg, const ConceptVocabulary& vocab);

SynthConfig synth_config_from_json(std::string_view json_text);
std::string synth_config_to_json(const SynthConfig& cfg);

struct SyntheticSites {
  std::vector<EncounterRecord> source;
  std::vector<EncounterRecord> target;
};

/// Admission dates are uniform over 2008-06-01 .. 2015-05-31. Deterministic
/// in cfg.seed.
SyntheticSites generate_synthetic_sites(const SynthConfig& cfg, const ConceptVocabulary& vocab);

/// Probability that a signal finding is charted "P" for a positive encounter.
double boosted_rate(double background_rate, double signal_strength);

inline constexpr std::string_view kSyntheticSemanticTag = "synthetic-semantic";

/// Stand-in for a language-model table: every concept gets a random unit
/// direction, and the target member of each synonym pair is that direction
/// rotated by a fixed angle (cosine 0.97) so the two "P" vectors are near
/// duplicates. "A" vectors mix a shared negation direction with a small
/// component of the concept direction; categorical labels get independent
/// random unit vectors.
EmbeddingTable synthetic_semantic_table(const ConceptVocabulary& vocab, const std::vector<SynonymPair>& pairs,
                                        std::size_t dimension, std::uint64_t seed);

}  // namespace ccnn
