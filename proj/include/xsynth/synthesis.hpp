#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xsynth/retrieval.hpp"

namespace xsynth {

class SynthesisError : public Error {
 public:
  using Error::Error;
};

struct Proposal {
  std::string account;
  std::string description;
  Attributes attributes;
  std::vector<std::string> evidence_refs;

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
      if (k == key) return &v;
    return nullptr;
  }
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct SynthesisResult {
  std::string response_text;
  std::vector<Proposal> proposals;
  std::vector<std::string> annotations;  // "<ref>: <annotation>" for every evidence item consumed
  friend bool operator==(const SynthesisResult&, const SynthesisResult&) = default;
};

class Synthesizer {
 public:
  virtual ~Synthesizer() = default;
  virtual SynthesisResult synthesize(std::string_view query, const std::vector<EvidenceSet>& evidence) const = 0;
};

inline std::vector<std::string> collect_annotations(const std::vector<EvidenceSet>& evidence) {
  std::vector<std::string> out;
  for (const auto& s : evidence)
    for (const auto& i : s.items) out.push_back(i.ref() + ": " + i.annotation);
  return out;
}

struct TemplateParams {
  std::string cluster_key = "account";
  /// Minimum share of the total evidence weight a cluster needs to be proposed.
  double min_cluster_share = 0.15;
  /// Minimum absolute cluster weight.
  double min_cluster_weight = 0.0;
  std::size_t min_items = 2;
  std::size_t max_facts = 4;
  std::size_t snippet_chars = 240;
};

/// Groups evidence by the cluster attribute (account) and proposes one
/// opportunity per sufficiently weighted cluster. Every claim cites only
/// evidence it was given.
class TemplateSynthesizer final : public Synthesizer {
 public:
  explicit TemplateSynthesizer(TemplateParams params = {}) : params_(std::move(params)) {}

  SynthesisResult synthesize(std::string_view /*query*/, const std::vector<EvidenceSet>& evidence) const override {
    SynthesisResult result;
    result.annotations = collect_annotations(evidence);

    struct Cluster {
      std::string label;
      double weight = 0.0;
      std::vector<const EvidenceItem*> items;
    };
    std::map<std::string, Cluster> clusters;
    double total = 0.0;
    for (const auto& s : evidence) {
      for (const auto& item : s.items) {
        total += item.weight;
        const std::string* key = item.attribute(params_.cluster_key);
        if (!key || key->empty()) continue;
        auto& c = clusters[normalize_space_lower(*key)];
        if (c.label.empty()) c.label = *key;
        c.weight += item.weight;
        c.items.push_back(&item);
      }
    }

    std::vector<const Cluster*> chosen;
    for (const auto& [_, c] : clusters) {
      if (c.items.size() < params_.min_items) continue;
      if (c.weight < params_.min_cluster_weight) continue;
      if (total <= 0.0 || c.weight / total < params_.min_cluster_share) continue;
      chosen.push_back(&c);
    }
    std::sort(chosen.begin(), chosen.end(), [](const Cluster* a, const Cluster* b) {
      if (a->weight != b->weight) return a->weight > b->weight;
      return a->label < b->label;
    });

    for (const Cluster* c : chosen) {
      auto items = c->items;
      std::stable_sort(items.begin(), items.end(), [](const EvidenceItem* a, const EvidenceItem* b) {
        if (a->weight != b->weight) return a->weight > b->weight;
        return a->ref() < b->ref();
      });
      Proposal p;
      p.account = c->label;
      p.attributes = merge_attributes(items);
      std::string desc = "Opportunity for " + c->label;
      for (const auto& [k, v] : p.attributes)
        if (k != params_.cluster_key) desc += ", " + k + " " + v;
      desc += ". Evidence:";
      std::set<std::string> seen;
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto ref = items[i]->ref();
        if (seen.insert(ref).second) p.evidence_refs.push_back(ref);
        if (i < params_.max_facts) desc += " " + fact(*items[i]) + ";";
      }
      p.description = std::move(desc);
      result.proposals.push_back(std::move(p));
    }

    if (result.proposals.empty()) {
      result.response_text = "No new leads: the retrieved evidence does not support an opportunity.";
    } else {
      result.response_text = "Proposed " + std::to_string(result.proposals.size()) + " opportunit" +
                             (result.proposals.size() == 1 ? "y" : "ies") + ":";
      for (const auto& p : result.proposals) result.response_text += "\n- " + p.description;
    }
    return result;
  }

  const TemplateParams& params() const noexcept { return params_; }

 private:
  /// For each key, the value carrying the most evidence weight.
  static Attributes merge_attributes(const std::vector<const EvidenceItem*>& items) {
    std::vector<std::string> keys;
    std::map<std::string, std::map<std::string, double>> mass;
    for (const auto* it : items) {
      for (const auto& [k, v] : it->attributes) {
        if (!mass.count(k)) keys.push_back(k);
        mass[k][v] += it->weight;
      }
    }
    Attributes out;
    for (const auto& k : keys) {
      const auto& vals = mass[k];
      auto best = vals.begin();
      for (auto v = vals.begin(); v != vals.end(); ++v)
        if (v->second > best->second) best = v;
      out.emplace_back(k, best->first);
    }
    return out;
  }

  std::string fact(const EvidenceItem& e) const {
    std::string text = e.snippet.empty() ? e.title : e.snippet;
    if (text.size() > params_.snippet_chars) text = text.substr(0, params_.snippet_chars) + "...";
    return "[" + e.artifact.app + "] " + text + " (" + e.annotation + ")";
  }

  TemplateParams params_;
};

/// Citation closure: every cited ref must be a retrieved item.
inline bool citations_resolve(const SynthesisResult& r, const std::vector<EvidenceSet>& evidence) {
  std::set<std::string> refs;
  for (const auto& s : evidence)
    for (const auto& i : s.items) refs.insert(i.ref());
  for (const auto& p : r.proposals)
    for (const auto& ref : p.evidence_refs)
      if (!refs.count(ref)) return false;
  return true;
}

inline Json to_json(const Proposal& p) {
  return Json{{"account", p.account},
              {"description", p.description},
              {"attributes", attributes_to_json(p.attributes)},
              {"evidence_refs", p.evidence_refs}};
}

inline Proposal proposal_from_json(const Json& j) {
  Proposal p;
  p.account = j.value("account", "");
  p.description = j.value("description", "");
  if (auto it = j.find("attributes"); it != j.end()) {
    if (it->is_object()) {
      for (const auto& [k, v] : it->items()) p.attributes.emplace_back(k, v.get<std::string>());
    } else {
      p.attributes = attributes_from_json(*it);
    }
  }
  p.evidence_refs = j.value("evidence_refs", std::vector<std::string>{});
  return p;
}

inline Json to_json(const SynthesisResult& r) {
  Json proposals = Json::array();
  for (const auto& p : r.proposals) proposals.push_back(to_json(p));
  return Json{{"response_text", r.response_text}, {"proposals", std::move(proposals)}, {"annotations", r.annotations}};
}

inline SynthesisResult synthesis_from_json(const Json& j) {
  SynthesisResult r;
  r.response_text = j.value("response_text", "");
  for (const auto& p : j.value("proposals", Json::array())) r.proposals.push_back(proposal_from_json(p));
  r.annotations = j.value("annotations", std::vector<std::string>{});
  return r;
}

}  // namespace xsynth
