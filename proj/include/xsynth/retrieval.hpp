#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "xsynth/dts.hpp"
#include "xsynth/embedding.hpp"
#include "xsynth/filters.hpp"
#include "xsynth/selector.hpp"

namespace xsynth {

struct RetrievalParams {
  std::size_t k = 10;
  double alpha = 0.5;    // lexical weight in content relevance
  double bm25_k1 = 1.2;  // term-frequency saturation
  FilterParams filters;
  /// Replace the attention factor with a constant (content-only baseline).
  bool content_only = false;
};

// ---------------------------------------------------------------------------
// Content relevance
// ---------------------------------------------------------------------------

struct ContentScore {
  double lexical_raw = 0.0;
  double lexical = 0.0;   // min-max normalized across the candidates for this query
  double semantic = 0.0;  // cosine clamped to [0,1]
  double content = 0.0;   // alpha * lexical + (1 - alpha) * semantic
};

/// Per-artifact term statistics and embeddings over the catalog texts.
class ContentIndex {
 public:
  ContentIndex() = default;

  ContentIndex(const Catalog& catalog, const Embedder& embedder, double k1 = 1.2) : embedder_(&embedder), k1_(k1) {
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      const auto& id = catalog.artifacts()[i].artifact_id;
      const auto& text = catalog.text(i);
      auto& tf = tf_[id];
      for (const auto& t : tokenize(text)) tf[t] += 1.0;
      for (const auto& [t, _] : tf) df_[t] += 1.0;
      embeddings_.emplace(id, embedder.embed(text));
    }
    n_docs_ = static_cast<double>(catalog.size());
  }

  double idf(const std::string& term) const {
    auto it = df_.find(term);
    const double df = it == df_.end() ? 0.0 : it->second;
    return std::log(1.0 + (n_docs_ - df + 0.5) / (df + 0.5));
  }

  /// Saturating tf · idf summed over distinct query terms.
  double lexical_raw(const std::vector<std::string>& query_terms, const std::string& artifact_id) const {
    auto it = tf_.find(artifact_id);
    if (it == tf_.end()) return 0.0;
    double s = 0.0;
    for (const auto& t : query_terms) {
      auto f = it->second.find(t);
      if (f == it->second.end()) continue;
      s += idf(t) * f->second / (f->second + k1_);
    }
    return s;
  }

  std::map<std::string, ContentScore> score(std::string_view query, std::span<const Artifact> candidates,
                                            double alpha) const {
    std::vector<std::string> terms = tokenize(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    const auto q = embedder_->embed(query);

    std::map<std::string, ContentScore> out;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& a : candidates) {
      ContentScore s;
      s.lexical_raw = lexical_raw(terms, a.artifact_id);
      auto e = embeddings_.find(a.artifact_id);
      s.semantic = e == embeddings_.end() ? 0.0 : std::clamp(cosine(q, e->second), 0.0, 1.0);
      lo = first ? s.lexical_raw : std::min(lo, s.lexical_raw);
      hi = first ? s.lexical_raw : std::max(hi, s.lexical_raw);
      first = false;
      out.emplace(a.artifact_id, s);
    }
    for (auto& [_, s] : out) {
      if (hi > lo)
        s.lexical = (s.lexical_raw - lo) / (hi - lo);
      else
        s.lexical = s.lexical_raw > 0.0 ? 1.0 : 0.0;
      s.content = alpha * s.lexical + (1.0 - alpha) * s.semantic;
    }
    return out;
  }

  const std::map<std::string, Embedding>& embeddings() const noexcept { return embeddings_; }

 private:
  const Embedder* embedder_ = nullptr;
  double k1_ = 1.2;
  double n_docs_ = 0.0;
  std::map<std::string, std::map<std::string, double>> tf_;
  std::map<std::string, double> df_;
  std::map<std::string, Embedding> embeddings_;
};

// ---------------------------------------------------------------------------
// Attention blending and weighting
// ---------------------------------------------------------------------------

using FilterMaps = std::array<ImportanceMap, kFilterCount>;

/// Σ_k m_k · I_k(a). Artifacts missing from a map contribute 0 for it.
inline std::map<std::string, double> blended_attention(const ModalityDistribution& modality, const FilterMaps& maps) {
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < kFilterCount; ++k)
    for (const auto& [id, _] : maps[k].scores) out.emplace(id, 0.0);
  for (auto& [id, v] : out)
    for (std::size_t k = 0; k < kFilterCount; ++k) v += modality[k] * maps[k].score(id);
  return out;
}

inline double combined_weight(double attention, double content) {
  if (attention < 0.0 || content < 0.0) throw ValidationError("weight", "attention and content must be >= 0");
  return attention * content;
}

// ---------------------------------------------------------------------------
// Per-user inputs
// ---------------------------------------------------------------------------

/// Everything shared by all individuals for one query.
struct RetrievalScope {
  const EventLog* log = nullptr;
  std::vector<Artifact> candidates;             // artifacts touched by anyone in the lookback
  std::vector<Observation> window_all;          // all participants, short window
  CohortDwell cohort;                           // scoped cohort, short window
  std::map<std::string, double> cohort_share;   // full roster, short window
  const std::map<std::string, Embedding>* embeddings = nullptr;
  std::map<std::string, ContentScore> content;  // this query's content scores per candidate
};

struct UserContext {
  std::string participant_id;
  std::vector<Observation> events;  // this participant, short window
  std::vector<Session> sessions;
  DigitalTwinSignature dts;
  BaselineStats baseline;
};

inline FilterMaps compute_filter_maps(const UserContext& u, const RetrievalScope& scope, const FilterParams& params) {
  static const std::map<std::string, Embedding> kNoEmbeddings;
  const auto& emb = scope.embeddings ? *scope.embeddings : kNoEmbeddings;
  FilterMaps maps;
  maps[filter_index(FilterKind::Proportional)] = proportional(u.events, scope.candidates);
  maps[filter_index(FilterKind::Inverse)] = inverse(u.events, scope.candidates, u.dts, scope.cohort_share, params);
  maps[filter_index(FilterKind::Differential)] = differential(u.events, scope.candidates, u.baseline, params);
  maps[filter_index(FilterKind::Recurrent)] = recurrent(u.events, u.sessions, scope.candidates);
  maps[filter_index(FilterKind::Comparative)] = comparative(u.events, scope.candidates, emb, params);
  maps[filter_index(FilterKind::Sequential)] = sequential(u.events, u.baseline, scope.candidates);
  maps[filter_index(FilterKind::Collective)] = collective(scope.cohort, scope.candidates, params);
  return maps;
}

// ---------------------------------------------------------------------------
// Evidence
// ---------------------------------------------------------------------------

struct EvidenceItem {
  std::string participant_id;
  Artifact artifact;
  std::string title;
  double weight = 0.0;
  double attention = 0.0;
  double content = 0.0;
  FilterKind dominant_filter = FilterKind::Proportional;
  std::string annotation;
  std::vector<std::size_t> event_refs;
  Attributes attributes;  // consensus ui attributes over the referenced events
  std::string snippet;    // most recent screen text on the artifact

  /// Citation key used by synthesis results.
  std::string ref() const { return participant_id + "/" + artifact.artifact_id; }
  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return &v;
    return nullptr;
  }
  friend bool operator==(const EvidenceItem&, const EvidenceItem&) = default;
};

struct EvidenceSet {
  std::string participant_id;
  std::vector<EvidenceItem> items;  // weight-descending, ties by artifact_id
  friend bool operator==(const EvidenceSet&, const EvidenceSet&) = default;
};

namespace detail {

inline std::string fmt_num(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

inline std::string annotate(FilterKind k, double raw, const Artifact& a) {
  switch (k) {
    case FilterKind::Proportional: return "Proportional: dwelled " + fmt_num(raw / 60.0, 1) + " min in window";
    case FilterKind::Inverse:
      return "Inverse: untouched artifact in owned domain '" + a.domain + "' (ownership x cohort share " +
             fmt_num(raw) + ")";
    case FilterKind::Differential:
      return "Differential: domain '" + a.domain + "' deviates from baseline (signal " + fmt_num(raw) + ")";
    case FilterKind::Recurrent: return "Recurrent: revisited " + fmt_num(raw, 0) + " times";
    case FilterKind::Comparative: return "Comparative: " + fmt_num(raw, 0) + " rapid alternations with similar artifacts";
    case FilterKind::Sequential:
      return "Sequential: reached via unusual domain transition (surprise " + fmt_num(raw) + " nats)";
    case FilterKind::Collective: return "Collective: cohort focus score " + fmt_num(raw);
  }
  return {};
}

/// Most frequent value per key; ties go to the most recent event.
inline Attributes consensus_attributes(const EventLog& log, const std::vector<std::size_t>& refs) {
  std::map<std::string, std::map<std::string, std::pair<int, std::size_t>>> counts;
  std::vector<std::string> key_order;
  for (auto i : refs) {
    for (const auto& [k, v] : log[i].ui_attributes) {
      if (!counts.count(k)) key_order.push_back(k);
      auto& c = counts[k][v];
      c.first += 1;
      c.second = std::max(c.second, i + 1);
    }
  }
  Attributes out;
  for (const auto& k : key_order) {
    const auto& vals = counts[k];
    auto best = vals.begin();
    for (auto it = vals.begin(); it != vals.end(); ++it)
      if (it->second > best->second) best = it;
    out.emplace_back(k, best->first);
  }
  return out;
}

}  // namespace detail

/// Ranks candidates by w = I^attn · I^content (or by content alone in the
/// content-only baseline), drops zero weights, keeps the top K.
inline EvidenceSet rank_evidence(const UserContext& u, const RetrievalScope& scope, const FilterMaps& maps,
                                 const ModalityDistribution& modality, const RetrievalParams& params) {
  if (params.k == 0) throw ValidationError("k", "must be >= 1");
  const auto attention = blended_attention(modality, maps);
  EvidenceSet set;
  set.participant_id = u.participant_id;
  std::vector<EvidenceItem> items;
  for (const auto& a : scope.candidates) {
    auto c = scope.content.find(a.artifact_id);
    const double content = c == scope.content.end() ? 0.0 : c->second.content;
    auto at = attention.find(a.artifact_id);
    const double attn = params.content_only ? 1.0 : (at == attention.end() ? 0.0 : at->second);
    const double w = combined_weight(attn, content);
    if (!(w > 0.0)) continue;
    EvidenceItem item;
    item.participant_id = u.participant_id;
    item.artifact = a;
    item.weight = w;
    item.attention = attn;
    item.content = content;
    std::size_t dom = 0;
    double best = -1.0;
    for (std::size_t k = 0; k < kFilterCount; ++k) {
      const double contrib = modality[k] * maps[k].score(a.artifact_id);
      if (contrib > best) {
        best = contrib;
        dom = k;
      }
    }
    item.dominant_filter = filter_at(dom);
    item.annotation = params.content_only ? "Content match only"
                                          : detail::annotate(item.dominant_filter, maps[dom].raw_value(a.artifact_id), a);
    items.push_back(std::move(item));
  }
  std::sort(items.begin(), items.end(), [](const EvidenceItem& x, const EvidenceItem& y) {
    if (x.weight != y.weight) return x.weight > y.weight;
    return x.artifact.artifact_id < y.artifact.artifact_id;
  });
  if (items.size() > params.k) items.resize(params.k);

  // Supporting events: the participant's own, else the cohort's, in the window.
  for (auto& item : items) {
    for (const auto& o : u.events)
      if (o.artifact_id == item.artifact.artifact_id) item.event_refs.push_back(o.event);
    if (item.event_refs.empty())
      for (const auto& o : scope.window_all)
        if (o.artifact_id == item.artifact.artifact_id) item.event_refs.push_back(o.event);
    if (scope.log && !item.event_refs.empty()) {
      item.attributes = detail::consensus_attributes(*scope.log, item.event_refs);
      const auto& last = (*scope.log)[item.event_refs.back()];
      item.snippet = last.screen_text;
      item.title = last.screen_title;
    } else {
      item.title = item.artifact.title_key;
    }
  }
  set.items = std::move(items);
  return set;
}

inline EvidenceSet retrieve_for_user(const UserContext& u, const RetrievalScope& scope,
                                     const ModalityDistribution& modality, const RetrievalParams& params) {
  const auto maps = compute_filter_maps(u, scope, params.filters);
  return rank_evidence(u, scope, maps, modality, params);
}

inline double mean_content(const EvidenceSet& s) {
  if (s.items.empty()) return 0.0;
  double t = 0.0;
  for (const auto& i : s.items) t += i.content;
  return t / static_cast<double>(s.items.size());
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline Json to_json(const Artifact& a) {
  return Json{{"artifact_id", a.artifact_id}, {"app", a.app}, {"title_key", a.title_key}, {"domain", a.domain},
              {"domain_index", a.domain_index}};
}

inline Artifact artifact_from_json(const Json& j) {
  return Artifact{j.at("artifact_id").get<std::string>(), j.at("app").get<std::string>(),
                  j.at("title_key").get<std::string>(), j.at("domain").get<std::string>(),
                  j.at("domain_index").get<std::size_t>()};
}

inline Json attributes_to_json(const Attributes& attrs) {
  Json j = Json::array();
  for (const auto& [k, v] : attrs) j.push_back(Json{{"key", k}, {"value", v}});
  return j;
}

inline Attributes attributes_from_json(const Json& j) {
  Attributes a;
  for (const auto& kv : j) a.emplace_back(kv.at("key").get<std::string>(), kv.at("value").get<std::string>());
  return a;
}

/// Evidence export record; the extra fields make a trace replayable.
inline Json to_json(const EvidenceItem& e) {
  return Json{{"participant_id", e.participant_id},
              {"artifact_id", e.artifact.artifact_id},
              {"weight", e.weight},
              {"attention", e.attention},
              {"content", e.content},
              {"dominant_filter", std::string(filter_name(e.dominant_filter))},
              {"annotation", e.annotation},
              {"event_refs", e.event_refs},
              {"artifact", to_json(e.artifact)},
              {"title", e.title},
              {"attributes", attributes_to_json(e.attributes)},
              {"snippet", e.snippet}};
}

inline EvidenceItem evidence_from_json(const Json& j) {
  EvidenceItem e;
  e.participant_id = j.at("participant_id").get<std::string>();
  e.artifact = artifact_from_json(j.at("artifact"));
  e.weight = j.at("weight").get<double>();
  e.attention = j.at("attention").get<double>();
  e.content = j.at("content").get<double>();
  e.dominant_filter = filter_from_name(j.at("dominant_filter").get<std::string>());
  e.annotation = j.at("annotation").get<std::string>();
  e.event_refs = j.at("event_refs").get<std::vector<std::size_t>>();
  e.title = j.value("title", "");
  e.attributes = attributes_from_json(j.value("attributes", Json::array()));
  e.snippet = j.value("snippet", "");
  return e;
}

inline Json evidence_array(const std::vector<EvidenceSet>& sets) {
  Json arr = Json::array();
  for (const auto& s : sets)
    for (const auto& i : s.items) arr.push_back(to_json(i));
  return arr;
}

}  // namespace xsynth
