#pragma once

#include <unicode/unorm2.h>
#include <unicode/ustring.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "retag/dataset.hpp"
#include "retag/errors.hpp"
#include "retag/types.hpp"

namespace retag {

// Canonical form used for label comparison: surrounding whitespace trimmed,
// Unicode NFC. Nothing fuzzier — silently repairing near-miss labels would
// hide exactly the failures the audit exists to expose. Byte sequences that
// are not valid UTF-8 pass through unchanged.
inline std::string canonical_label(const std::string& raw) {
  std::size_t begin = 0, end = raw.size();
  auto is_space = [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
  };
  while (begin < end && is_space(static_cast<unsigned char>(raw[begin]))) ++begin;
  while (end > begin && is_space(static_cast<unsigned char>(raw[end - 1]))) --end;
  std::string trimmed = raw.substr(begin, end - begin);

  UErrorCode status = U_ZERO_ERROR;
  const UNormalizer2* nfc = unorm2_getNFCInstance(&status);
  if (U_FAILURE(status)) return trimmed;

  std::u16string u16(trimmed.size() + 1, u'\0');
  int32_t len16 = 0;
  status = U_ZERO_ERROR;
  u_strFromUTF8(u16.data(), static_cast<int32_t>(u16.size()), &len16, trimmed.data(),
                static_cast<int32_t>(trimmed.size()), &status);
  if (U_FAILURE(status)) return trimmed;
  u16.resize(static_cast<std::size_t>(len16));

  std::u16string normalized(u16.size() * 3 + 16, u'\0');
  status = U_ZERO_ERROR;
  const int32_t out16 = unorm2_normalize(nfc, u16.data(), static_cast<int32_t>(u16.size()),
                                         normalized.data(),
                                         static_cast<int32_t>(normalized.size()), &status);
  if (U_FAILURE(status)) return trimmed;
  normalized.resize(static_cast<std::size_t>(out16));

  std::string out(normalized.size() * 4 + 4, '\0');
  int32_t len8 = 0;
  status = U_ZERO_ERROR;
  u_strToUTF8(out.data(), static_cast<int32_t>(out.size()), &len8, normalized.data(),
              static_cast<int32_t>(normalized.size()), &status);
  if (U_FAILURE(status)) return trimmed;
  out.resize(static_cast<std::size_t>(len8));
  return out;
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct Offense {
  std::string doc_id;
  std::string label;          // the invalid label, verbatim
  std::string nearest_valid;  // advisory only, by string similarity
};

struct AuditReport {
  std::size_t n_samples = 0;
  std::size_t n_hallucinating_samples = 0;
  double rate = 0.0;  // hallucinating samples / samples
  std::vector<Offense> offending;
  std::vector<std::pair<std::string, std::size_t>> top_hallucinated;  // count desc, then alpha
  // Per-label-instance view (not part of the per-sample rate above).
  std::size_t n_label_instances = 0;
  std::size_t n_invalid_label_instances = 0;
  double label_rate = 0.0;
};

// e.g. 0.009 -> "0.9%", 0.0012 -> "0.12%"
inline std::string format_rate(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g%%", rate * 100.0);
  return std::string(buf);
}

namespace detail {

struct RawPrediction {
  std::string doc_id;
  std::vector<std::string> labels;
};

inline AuditReport audit_raw(const std::vector<RawPrediction>& samples, const Taxonomy& taxonomy) {
  if (samples.empty()) fail(Errc::EmptyPredictions, "no prediction samples to audit");

  std::set<std::string> valid;
  for (const auto& e : taxonomy.entries()) valid.insert(canonical_label(e.id));

  AuditReport report;
  report.n_samples = samples.size();
  std::map<std::string, std::size_t> invalid_counts;
  for (const auto& sample : samples) {
    std::set<std::string> distinct(sample.labels.begin(), sample.labels.end());
    report.n_label_instances += distinct.size();
    bool hallucinating = false;
    for (const auto& label : distinct) {
      if (valid.count(canonical_label(label))) continue;
      hallucinating = true;
      ++report.n_invalid_label_instances;
      ++invalid_counts[label];
      std::size_t best_distance = static_cast<std::size_t>(-1);
      std::string best_id;
      for (const auto& e : taxonomy.entries()) {
        const std::size_t d =
            std::min(edit_distance(label, e.id), edit_distance(label, e.name));
        if (d < best_distance || (d == best_distance && e.id < best_id)) {
          best_distance = d;
          best_id = e.id;
        }
      }
      report.offending.push_back({sample.doc_id, label, best_id});
    }
    if (hallucinating) ++report.n_hallucinating_samples;
  }
  report.rate =
      static_cast<double>(report.n_hallucinating_samples) / static_cast<double>(report.n_samples);
  report.label_rate =
      report.n_label_instances == 0
          ? 0.0
          : static_cast<double>(report.n_invalid_label_instances) /
                static_cast<double>(report.n_label_instances);
  report.top_hallucinated.assign(invalid_counts.begin(), invalid_counts.end());
  std::sort(report.top_hallucinated.begin(), report.top_hallucinated.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  return report;
}

}  // namespace detail

// Audits a predictions.jsonl file (engine schema; "scores" optional, as in
// generative-model output dumps). The input file is only ever read.
inline AuditReport audit_predictions(const std::string& path, const Taxonomy& taxonomy) {
  std::vector<detail::RawPrediction> samples;
  detail::for_each_jsonl_line(path, [&](std::size_t line_no, const json& obj) {
    const std::string where = path + ":" + std::to_string(line_no);
    if (!obj.is_object()) fail(Errc::MalformedLine, where + ": expected an object");
    detail::RawPrediction raw;
    raw.doc_id = detail::require_string(obj, "doc_id", where);
    auto it = obj.find("labels");
    if (it == obj.end() || !it->is_array())
      fail(Errc::MalformedLine, where + ": missing or non-array field \"labels\"");
    for (const auto& l : *it) {
      if (!l.is_string()) fail(Errc::MalformedLine, where + ": labels must be strings");
      raw.labels.push_back(l.get<std::string>());
    }
    samples.push_back(std::move(raw));
  });
  return detail::audit_raw(samples, taxonomy);
}

inline AuditReport audit_prediction_sets(const std::vector<PredictionSet>& preds,
                                         const Taxonomy& taxonomy) {
  std::vector<detail::RawPrediction> samples;
  samples.reserve(preds.size());
  for (const auto& p : preds) {
    detail::RawPrediction raw;
    raw.doc_id = p.doc_id;
    for (const auto& item : p.items) raw.labels.push_back(item.label);
    samples.push_back(std::move(raw));
  }
  return detail::audit_raw(samples, taxonomy);
}

// Returns the labels of `pred` that are not in the taxonomy; empty means the
// prediction is safe to release.
inline std::vector<LabelId> validate_or_reject(const PredictionSet& pred,
                                               const Taxonomy& taxonomy) {
  std::set<std::string> valid;
  for (const auto& e : taxonomy.entries()) valid.insert(canonical_label(e.id));
  std::vector<LabelId> invalid;
  for (const auto& item : pred.items) {
    if (!valid.count(canonical_label(item.label))) invalid.push_back(item.label);
  }
  return invalid;
}

}  // namespace retag
