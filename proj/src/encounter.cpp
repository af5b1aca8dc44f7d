// SPDX-License-Identifier: Apache-2.0
#include "ccnn/encounter.hpp"

#include <charconv>
#include <cstdio>
#include <optional>
#include <unordered_set>

#include "ccnn/error.hpp"

namespace ccnn {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw_data("line " + std::to_string(line_no) + ": unterminated quoted field");
  fields.emplace_back(trim(cur));
  return fields;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

AdmitDate parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 8) throw_data("malformed date (expected YYYYMMDD): '" + std::string(text) + "'");
  int y = 0;
  unsigned m = 0, d = 0;
  const auto parse_part = [&](std::size_t pos, std::size_t len, auto& out) {
    const char* b = text.data() + pos;
    const auto r = std::from_chars(b, b + len, out);
    if (r.ec != std::errc{} || r.ptr != b + len) {
      throw_data("malformed date (expected YYYYMMDD): '" + std::string(text) + "'");
    }
  };
  parse_part(0, 4, y);
  parse_part(4, 2, m);
  parse_part(6, 2, d);
  const AdmitDate date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw_data("malformed date (no such calendar day): '" + std::string(text) + "'");
  return date;
}

std::string format_date(AdmitDate date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d%02u%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::vector<EncounterRecord> parse_encounters(std::string_view csv_content,
                                              const ConceptVocabulary& vocab) {
  if (csv_content.size() >= 3 && csv_content.substr(0, 3) == "\xEF\xBB\xBF") csv_content.remove_prefix(3);

  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start <= csv_content.size();) {
    std::size_t end = csv_content.find('\n', start);
    if (end == std::string_view::npos) end = csv_content.size();
    lines.push_back(csv_content.substr(start, end - start));
    start = end + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw_data("encounter CSV is empty (missing header row)");

  const auto header = split_csv_line(lines[0], 1);
  std::optional<std::size_t> col_id, col_date, col_outcome;
  // concept index per column, or nullopt for the fixed columns
  std::vector<std::optional<std::size_t>> column_concept(header.size());
  std::vector<bool> concept_seen(vocab.size(), false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name == "encounter_id") {
      col_id = c;
    } else if (name == "admit_date") {
      col_date = c;
    } else if (name == "outcome") {
      col_outcome = c;
    } else if (const auto k = vocab.find(name)) {
      if (concept_seen[*k]) throw_data("duplicate column in header: " + name);
      concept_seen[*k] = true;
      column_concept[c] = *k;
    } else {
      throw_data("unknown concept column in header: '" + name + "'");
    }
  }
  if (!col_id) throw_data("missing required header column: encounter_id");
  if (!col_date) throw_data("missing required header column: admit_date");
  if (!col_outcome) throw_data("missing required header column: outcome");
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    if (!concept_seen[k] && !vocab.entry(k).default_label) {
      throw_data("missing required header column: " + vocab.entry(k).id + " (concept has no default label)");
    }
  }

  std::vector<EncounterRecord> records;
  records.reserve(lines.size() - 1);
  std::unordered_set<std::string> ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty()) continue;
    const auto fields = split_csv_line(lines[li], line_no);
    if (fields.size() != header.size()) {
      throw_data("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                 " fields, found " + std::to_string(fields.size()));
    }
    EncounterRecord r;
    r.encounter_id = fields[*col_id];
    if (r.encounter_id.empty()) throw_data("line " + std::to_string(line_no) + ": empty encounter_id");
    if (!ids.insert(r.encounter_id).second) throw_data("duplicate encounter_id: " + r.encounter_id);
    try {
      r.admit_date = parse_date(fields[*col_date]);
    } catch (const Error& e) {
      throw_data("line " + std::to_string(line_no) + ": " + e.what());
    }
    const std::string& outcome = fields[*col_outcome];
    if (outcome == "0") {
      r.outcome = Outcome::negative;
    } else if (outcome == "1") {
      r.outcome = Outcome::positive;
    } else {
      throw_data("line " + std::to_string(line_no) + ": outcome must be 0 or 1, got '" + outcome + "'");
    }

    std::vector<bool> assigned(vocab.size(), false);
    r.labels.assign(vocab.size(), 0);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!column_concept[c] || fields[c].empty()) continue;
      const std::size_t k = *column_concept[c];
      const auto li_idx = vocab.label_index(k, fields[c]);
      if (!li_idx) {
        throw_data("line " + std::to_string(line_no) + ": unknown label '" + fields[c] + "' for concept " +
                   vocab.entry(k).id);
      }
      r.labels[k] = static_cast<std::uint16_t>(*li_idx);
      assigned[k] = true;
    }
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      if (assigned[k]) continue;
      const auto& def = vocab.entry(k).default_label;
      if (!def) {
        throw_data("line " + std::to_string(line_no) + ": missing value for concept " + vocab.entry(k).id);
      }
      r.labels[k] = static_cast<std::uint16_t>(*vocab.label_index(k, *def));
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string write_encounters(const std::vector<EncounterRecord>& records, const ConceptVocabulary& vocab) {
  std::string out = "encounter_id,admit_date,outcome";
  for (const auto& e : vocab.entries()) {
    out.push_back(',');
    out += csv_field(e.id);
  }
  out.push_back('\n');
  for (const auto& r : records) {
    out += csv_field(r.encounter_id);
    out.push_back(',');
    out += format_date(r.admit_date);
    out.push_back(',');
    out += r.outcome == Outcome::positive ? "1" : "0";
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      out.push_back(',');
      out += csv_field(r.label_of(vocab, k));
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace ccnn
