#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xsynth/dts.hpp"
#include "xsynth/embedding.hpp"
#include "xsynth/filters.hpp"

namespace xsynth {

using ModalityDistribution = std::array<double, kFilterCount>;

inline ModalityDistribution uniform_modality() {
  ModalityDistribution m;
  m.fill(1.0 / static_cast<double>(kFilterCount));
  return m;
}

inline ModalityDistribution one_hot(FilterKind k) {
  ModalityDistribution m{};
  m[filter_index(k)] = 1.0;
  return m;
}

inline FilterKind argmax_filter(const ModalityDistribution& m) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < m.size(); ++i)
    if (m[i] > m[best]) best = i;
  return filter_at(best);
}

/// Numerically stable softmax (max-subtracted).
inline ModalityDistribution softmax(std::span<const double> logits) {
  if (logits.size() != kFilterCount) throw DimensionError("softmax: expected 7 logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  ModalityDistribution p;
  double s = 0.0;
  for (std::size_t i = 0; i < kFilterCount; ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (auto& x : p) x /= s;
  return p;
}

// ---------------------------------------------------------------------------
// Phase 1: rule classifier
// ---------------------------------------------------------------------------

/// Filter → cue phrases. Cues match at word starts after light suffix
/// stripping, so "ignored" matches "ignore" and "anomal" matches "anomalies".
struct CueLexicon {
  std::map<FilterKind, std::vector<std::string>> cues;

  static CueLexicon defaults() {
    return CueLexicon{{
        {FilterKind::Inverse, {"ignored", "missed", "should have", "didn't", "absence"}},
        {FilterKind::Differential, {"unusual", "changed", "drop", "anomal", "deviat"}},
        {FilterKind::Recurrent, {"kept returning", "repeatedly", "again and again", "revisit"}},
        {FilterKind::Comparative, {"comparing", "versus", "vs", "evaluating", "alternativ"}},
        {FilterKind::Sequential, {"order", "sequence", "before", "after", "workflow"}},
        {FilterKind::Collective, {"team", "everyone", "consensus", "across the group"}},
        {FilterKind::Proportional, {"focused", "spent time", "attention on", "dwell"}},
    }};
  }

  static CueLexicon from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("cue lexicon: expected an object of filter → cue list");
    CueLexicon lex;
    for (const auto& [name, list] : j.items()) {
      FilterKind k;
      try {
        k = filter_from_name(name);
      } catch (const ParseError&) {
        throw ConfigError("cue lexicon: unknown filter '" + name + "'");
      }
      if (!list.is_array()) throw ConfigError("cue lexicon: cue list for '" + name + "' must be an array");
      lex.cues[k] = list.get<std::vector<std::string>>();
    }
    return lex;
  }

  Json to_json() const {
    Json j = Json::object();
    for (const auto& [k, list] : cues) j[std::string(filter_name(k))] = list;
    return j;
  }
};

struct RuleVerdict {
  std::optional<FilterKind> filter;  // empty = Ambiguous
  std::vector<std::pair<FilterKind, std::string>> matched;

  bool ambiguous() const noexcept { return !filter.has_value(); }
};

namespace detail {

inline bool ends_with(const std::string& s, std::string_view suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

inline std::string light_stem(std::string w) {
  if (w.size() > 5 && ends_with(w, "ing")) return w.substr(0, w.size() - 3);
  if (w.size() > 4 && (ends_with(w, "ed") || ends_with(w, "es"))) return w.substr(0, w.size() - 2);
  if (w.size() > 3 && ends_with(w, "e")) return w.substr(0, w.size() - 1);
  if (w.size() > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us"))
    return w.substr(0, w.size() - 1);
  return w;
}

inline std::vector<std::string> stems(std::string_view text) {
  auto toks = tokenize(text);
  for (auto& t : toks) t = light_stem(std::move(t));
  return toks;
}

inline bool cue_matches(const std::vector<std::string>& query, const std::vector<std::string>& cue) {
  if (cue.empty() || cue.size() > query.size()) return false;
  for (std::size_t i = 0; i + cue.size() <= query.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < cue.size() && ok; ++j) ok = query[i + j].rfind(cue[j], 0) == 0;
    if (ok) return true;
  }
  return false;
}

}  // namespace detail

/// Exactly one cue family matched → that filter; none or several → Ambiguous.
inline RuleVerdict rule_classify(std::string_view query, const CueLexicon& lexicon = CueLexicon::defaults()) {
  const auto q = detail::stems(query);
  RuleVerdict v;
  std::vector<FilterKind> families;
  for (const auto& [kind, cues] : lexicon.cues) {
    for (const auto& cue : cues) {
      if (detail::cue_matches(q, detail::stems(cue))) {
        v.matched.emplace_back(kind, cue);
        if (std::find(families.begin(), families.end(), kind) == families.end()) families.push_back(kind);
      }
    }
  }
  if (families.size() == 1) v.filter = families.front();
  return v;
}

// ---------------------------------------------------------------------------
// Phase 2: MLP
// ---------------------------------------------------------------------------

struct SelectorDims {
  std::size_t d_q = HashingEmbedder::kDefaultDim;
  std::size_t d = 8;
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 64;

  std::size_t input() const noexcept { return d_q + dts_feature_size(d); }
  friend bool operator==(const SelectorDims&, const SelectorDims&) = default;
};

/// Fully connected layer, weights row-major [out][in].
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_, std::size_t out_) : in(in_), out(out_), weights(in_ * out_, 0.0), bias(out_, 0.0) {}

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Three-layer MLP [q; DTS] → 256 → 64 → 7 with ReLU between layers.
class SelectorModel {
 public:
  static constexpr int kFormatVersion = 1;

  SelectorModel() : SelectorModel(SelectorDims{}) {}

  /// Zero-initialized.
  explicit SelectorModel(const SelectorDims& dims) : dims_(dims) {
    layers_[0] = DenseLayer(dims.input(), dims.hidden1);
    layers_[1] = DenseLayer(dims.hidden1, dims.hidden2);
    layers_[2] = DenseLayer(dims.hidden2, kFilterCount);
  }

  /// Uniform(−a, a), a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static SelectorModel initialized(const SelectorDims& dims, std::uint64_t seed) {
    SelectorModel m(dims);
    std::mt19937_64 rng(seed);
    for (auto& layer : m.layers_) {
      const double a = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
      for (auto& x : layer.weights) x = a * (2.0 * unit(rng) - 1.0);
    }
    return m;
  }

  /// [0,1) from the top 53 bits; portable unlike std::uniform_real_distribution.
  static double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

  const SelectorDims& dims() const noexcept { return dims_; }
  const std::array<DenseLayer, 3>& layers() const noexcept { return layers_; }
  std::array<DenseLayer, 3>& layers() noexcept { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  /// Flat parameter access in layer order: weights then bias per layer.
  double& parameter(std::size_t i) {
    for (auto& l : layers_) {
      if (i < l.weights.size()) return l.weights[i];
      i -= l.weights.size();
      if (i < l.bias.size()) return l.bias[i];
      i -= l.bias.size();
    }
    throw std::out_of_range("parameter index");
  }
  double parameter(std::size_t i) const { return const_cast<SelectorModel*>(this)->parameter(i); }

  bool all_finite() const {
    for (const auto& l : layers_) {
      for (double x : l.weights)
        if (!std::isfinite(x)) return false;
      for (double x : l.bias)
        if (!std::isfinite(x)) return false;
    }
    return true;
  }

  /// `this += scale * other`, shapes must agree.
  void axpy(double scale, const SelectorModel& other) {
    if (!(other.dims_ == dims_)) throw DimensionError("axpy: model shapes differ");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      auto& a = layers_[k];
      const auto& b = other.layers_[k];
      for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += scale * b.weights[i];
      for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += scale * b.bias[i];
    }
  }

  /// FNV-1a over the raw parameter bytes; used to audit weight changes.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](double x) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof x);
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    for (const auto& l : layers_) {
      for (double x : l.weights) mix(x);
      for (double x : l.bias) mix(x);
    }
    return h;
  }

  Json to_json() const {
    Json layers = Json::array();
    for (const auto& l : layers_)
      layers.push_back(Json{{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
    return Json{{"format", "xsynth-selector"}, {"version", kFormatVersion}, {"d_q", dims_.d_q},      {"d", dims_.d},
                {"hidden", {dims_.hidden1, dims_.hidden2}},            {"layers", std::move(layers)}};
  }

  static SelectorModel from_json(const Json& j) {
    try {
      if (j.value("format", "") != "xsynth-selector") throw ConfigError("model file: not an xsynth selector");
      if (j.at("version").get<int>() != kFormatVersion) throw ConfigError("model file: unsupported version");
      SelectorDims dims;
      dims.d_q = j.at("d_q").get<std::size_t>();
      dims.d = j.at("d").get<std::size_t>();
      const auto hidden = j.at("hidden").get<std::vector<std::size_t>>();
      if (hidden.size() != 2) throw ConfigError("model file: expected two hidden sizes");
      dims.hidden1 = hidden[0];
      dims.hidden2 = hidden[1];
      SelectorModel m(dims);
      const auto& layers = j.at("layers");
      if (layers.size() != 3) throw ConfigError("model file: expected three layers");
      for (std::size_t k = 0; k < 3; ++k) {
        auto& l = m.layers_[k];
        if (layers[k].at("in").get<std::size_t>() != l.in || layers[k].at("out").get<std::size_t>() != l.out)
          throw ConfigError("model file: layer " + std::to_string(k + 1) + " dimensions inconsistent with d_q/d");
        auto w = layers[k].at("weights").get<std::vector<double>>();
        auto b = layers[k].at("bias").get<std::vector<double>>();
        if (w.size() != l.weights.size() || b.size() != l.bias.size())
          throw ConfigError("model file: layer " + std::to_string(k + 1) + " has wrong parameter count");
        l.weights = std::move(w);
        l.bias = std::move(b);
      }
      if (!m.all_finite()) throw ConfigError("model file: non-finite parameters");
      return m;
    } catch (const nlohmann::json::exception& ex) {
      throw ConfigError(std::string("model file: ") + ex.what());
    }
  }

  friend bool operator==(const SelectorModel&, const SelectorModel&) = default;

 private:
  SelectorDims dims_;
  std::array<DenseLayer, 3> layers_;
};

/// Intermediate values of one forward pass, kept for backprop.
struct ForwardPass {
  std::vector<double> input, z1, h1, z2, h2, logits;
  ModalityDistribution probs{};
};

namespace detail {
inline void dense(const DenseLayer& l, std::span<const double> x, std::vector<double>& z) {
  z.assign(l.out, 0.0);
  for (std::size_t o = 0; o < l.out; ++o) {
    const double* row = &l.weights[o * l.in];
    double s = l.bias[o];
    for (std::size_t i = 0; i < l.in; ++i) s += row[i] * x[i];
    z[o] = s;
  }
}
inline std::vector<double> relu(const std::vector<double>& z) {
  std::vector<double> h(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) h[i] = z[i] > 0.0 ? z[i] : 0.0;
  return h;
}
}  // namespace detail

inline ForwardPass forward_pass(const SelectorModel& model, std::span<const double> input) {
  if (input.size() != model.dims().input())
    throw DimensionError("selector input has " + std::to_string(input.size()) + " entries, model expects " +
                         std::to_string(model.dims().input()));
  ForwardPass f;
  f.input.assign(input.begin(), input.end());
  const auto& L = model.layers();
  detail::dense(L[0], f.input, f.z1);
  f.h1 = detail::relu(f.z1);
  detail::dense(L[1], f.h1, f.z2);
  f.h2 = detail::relu(f.z2);
  detail::dense(L[2], f.h2, f.logits);
  f.probs = softmax(f.logits);
  return f;
}

inline std::vector<double> selector_input(std::span<const double> q, std::span<const double> dts_features) {
  std::vector<double> x(q.begin(), q.end());
  x.insert(x.end(), dts_features.begin(), dts_features.end());
  return x;
}

/// softmax(f_θ([q; DTS])).
inline ModalityDistribution forward(const SelectorModel& model, std::span<const double> q,
                                    std::span<const double> dts_features) {
  if (q.size() != model.dims().d_q) throw DimensionError("query embedding dimension mismatch");
  if (dts_features.size() != dts_feature_size(model.dims().d)) throw DimensionError("DTS feature length mismatch");
  return forward_pass(model, selector_input(q, dts_features)).probs;
}

struct TrainingExample {
  std::string query;
  std::vector<double> dts_features;
  FilterKind target = FilterKind::Proportional;
};

/// A training example with its query already embedded.
struct PreparedExample {
  std::vector<double> input;  // [q; DTS]
  std::size_t target = 0;     // 0-based filter index
};

inline PreparedExample prepare(const TrainingExample& ex, const Embedder& embedder) {
  const auto q = embedder.embed(ex.query);
  return {selector_input(q, ex.dts_features), filter_index(ex.target)};
}

inline std::vector<PreparedExample> prepare(std::span<const TrainingExample> data, const Embedder& embedder) {
  std::vector<PreparedExample> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(prepare(ex, embedder));
  return out;
}

struct LossAndGradient {
  double loss = 0.0;
  SelectorModel gradient;
};

/// −log m_target for one pass, via log-sum-exp.
inline double nll(const ForwardPass& f, std::size_t target) {
  const double mx = *std::max_element(f.logits.begin(), f.logits.end());
  double s = 0.0;
  for (double l : f.logits) s += std::exp(l - mx);
  return -(f.logits[target] - mx - std::log(s));
}

inline double mean_loss(const SelectorModel& model, std::span<const PreparedExample> batch) {
  if (batch.empty()) throw ValidationError("batch", "empty batch");
  double total = 0.0;
  for (const auto& ex : batch) total += nll(forward_pass(model, ex.input), ex.target);
  return total / static_cast<double>(batch.size());
}

/// Mean negative log-likelihood over the batch and its analytic gradient.
inline LossAndGradient loss_and_gradient(const SelectorModel& model, std::span<const PreparedExample> batch) {
  if (batch.empty()) throw ValidationError("batch", "empty batch");
  LossAndGradient out{0.0, SelectorModel(model.dims())};
  auto& G = out.gradient.layers();
  const auto& L = model.layers();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::vector<double> d_logits(kFilterCount), d_h2, d_z2, d_h1, d_z1;
  for (const auto& ex : batch) {
    if (ex.target >= kFilterCount) throw ValidationError("target", "filter index out of range");
    const auto f = forward_pass(model, ex.input);
    out.loss += nll(f, ex.target) * inv_n;

    for (std::size_t k = 0; k < kFilterCount; ++k) d_logits[k] = (f.probs[k] - (k == ex.target ? 1.0 : 0.0)) * inv_n;

    // layer 3
    d_h2.assign(L[2].in, 0.0);
    for (std::size_t o = 0; o < L[2].out; ++o) {
      G[2].bias[o] += d_logits[o];
      for (std::size_t i = 0; i < L[2].in; ++i) {
        G[2].w(o, i) += d_logits[o] * f.h2[i];
        d_h2[i] += L[2].w(o, i) * d_logits[o];
      }
    }
    d_z2.resize(d_h2.size());
    for (std::size_t i = 0; i < d_h2.size(); ++i) d_z2[i] = f.z2[i] > 0.0 ? d_h2[i] : 0.0;

    // layer 2
    d_h1.assign(L[1].in, 0.0);
    for (std::size_t o = 0; o < L[1].out; ++o) {
      if (d_z2[o] == 0.0) continue;
      G[1].bias[o] += d_z2[o];
      for (std::size_t i = 0; i < L[1].in; ++i) {
        G[1].w(o, i) += d_z2[o] * f.h1[i];
        d_h1[i] += L[1].w(o, i) * d_z2[o];
      }
    }
    d_z1.resize(d_h1.size());
    for (std::size_t i = 0; i < d_h1.size(); ++i) d_z1[i] = f.z1[i] > 0.0 ? d_h1[i] : 0.0;

    // layer 1
    for (std::size_t o = 0; o < L[0].out; ++o) {
      if (d_z1[o] == 0.0) continue;
      G[0].bias[o] += d_z1[o];
      double* grow = &G[0].weights[o * L[0].in];
      for (std::size_t i = 0; i < L[0].in; ++i) grow[i] += d_z1[o] * f.input[i];
    }
  }
  return out;
}

inline LossAndGradient loss_and_gradient(const SelectorModel& model, std::span<const TrainingExample> batch,
                                         const Embedder& embedder) {
  const auto prepared = prepare(batch, embedder);
  return loss_and_gradient(model, prepared);
}

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(std::size_t step)
      : Error("training diverged: non-finite loss at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

struct TrainParams {
  std::uint64_t seed = 7;
  double learning_rate = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 16;
};

struct TrainResult {
  SelectorModel model;
  std::vector<double> loss_curve;  // [0] = initial full-set loss, then one entry per epoch
};

/// Plain mini-batch gradient descent with seeded Fisher–Yates shuffling.
inline TrainResult train(SelectorModel model, std::span<const PreparedExample> data, const TrainParams& params) {
  if (data.empty()) throw ValidationError("dataset", "training set is empty");
  if (params.batch_size == 0) throw ValidationError("batch_size", "must be positive");
  TrainResult result{std::move(model), {}};
  result.loss_curve.push_back(mean_loss(result.model, data));

  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<PreparedExample> batch;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + params.batch_size); ++i)
        batch.push_back(data[order[i]]);
      auto lg = loss_and_gradient(result.model, batch);
      if (!std::isfinite(lg.loss)) throw TrainingDiverged(step);
      result.model.axpy(-params.learning_rate, lg.gradient);
      ++step;
    }
    const double epoch_loss = mean_loss(result.model, data);
    if (!std::isfinite(epoch_loss) || !result.model.all_finite()) throw TrainingDiverged(step);
    result.loss_curve.push_back(epoch_loss);
  }
  return result;
}

inline TrainResult train(SelectorModel model, std::span<const TrainingExample> data, const TrainParams& params,
                         const Embedder& embedder) {
  const auto prepared = prepare(data, embedder);
  return train(std::move(model), std::span<const PreparedExample>(prepared), params);
}

// ---------------------------------------------------------------------------
// Two-phase routing
// ---------------------------------------------------------------------------

enum class SelectorMode { Hybrid, MlpOnly, RuleOnly };

inline SelectorMode selector_mode_from_name(std::string_view s) {
  if (s == "hybrid") return SelectorMode::Hybrid;
  if (s == "mlp-only") return SelectorMode::MlpOnly;
  if (s == "rule-only") return SelectorMode::RuleOnly;
  throw ConfigError("unknown selector mode '" + std::string(s) + "'");
}

struct Selection {
  ModalityDistribution distribution{};
  RuleVerdict verdict;
  bool used_mlp = false;
};

/// Hybrid: unambiguous rule verdict → one-hot; otherwise the MLP. Without a
/// model the ambiguous case falls back to the uniform distribution.
class ModalitySelector {
 public:
  ModalitySelector(const SelectorModel* model, const Embedder& embedder, CueLexicon lexicon = CueLexicon::defaults(),
                   SelectorMode mode = SelectorMode::Hybrid)
      : model_(model), embedder_(&embedder), lexicon_(std::move(lexicon)), mode_(mode) {
    if (mode_ == SelectorMode::MlpOnly && model_ == nullptr)
      throw ConfigError("mlp-only selection requires a trained model");
  }

  Selection select(std::string_view query, const DigitalTwinSignature& dts) const {
    Selection s;
    s.verdict = rule_classify(query, lexicon_);
    if (mode_ != SelectorMode::MlpOnly && !s.verdict.ambiguous()) {
      s.distribution = one_hot(*s.verdict.filter);
      return s;
    }
    if (mode_ == SelectorMode::RuleOnly || model_ == nullptr) {
      s.distribution = uniform_modality();
      return s;
    }
    mlp_calls_.fetch_add(1, std::memory_order_relaxed);
    s.used_mlp = true;
    const auto q = embedder_->embed(query);
    s.distribution = forward(*model_, q, dts.features());
    return s;
  }

  std::size_t mlp_invocations() const noexcept { return mlp_calls_.load(std::memory_order_relaxed); }
  const CueLexicon& lexicon() const noexcept { return lexicon_; }
  SelectorMode mode() const noexcept { return mode_; }
  const SelectorModel* model() const noexcept { return model_; }

 private:
  const SelectorModel* model_;
  const Embedder* embedder_;
  CueLexicon lexicon_;
  SelectorMode mode_;
  mutable std::atomic<std::size_t> mlp_calls_{0};
};

inline Json to_json(const ModalityDistribution& m) {
  Json j = Json::object();
  for (auto k : kAllFilters) j[std::string(filter_name(k))] = m[filter_index(k)];
  return j;
}

inline ModalityDistribution modality_from_json(const Json& j) {
  ModalityDistribution m{};
  for (auto k : kAllFilters) m[filter_index(k)] = j.at(std::string(filter_name(k))).get<double>();
  return m;
}

}  // namespace xsynth
