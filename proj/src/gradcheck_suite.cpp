#include "gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crf.hpp"
#include "encoder.hpp"
#include "model.hpp"
#include "stgcn.hpp"

namespace gp {

using nlohmann::json;
using nn::Tensor;

namespace {

using Params = nn::ParamSet<double>;

constexpr std::size_t kMaxDraws = 200;

void fill_normal(Tensor<double>& t, Rng& rng, double scale = 1.0) {
  for (auto& v : t.values()) v = scale * rng.normal();
}

double weighted_sum(const Tensor<double>& y, const Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
  return s;
}

double min_abs(const Tensor<double>& t) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : t.values()) m = std::min(m, std::abs(v));
  return m;
}

Tensor<double> scalar(double v) {
  Tensor<double> t({1});
  t[0] = v;
  return t;
}

// Random tree over a handful of joints.
StGraph small_graph(Rng& rng, std::size_t nodes) {
  std::vector<Edge> edges;
  for (std::size_t i = 1; i < nodes; ++i) edges.emplace_back(rng.below(i), i);
  return build_partitions(edges, 0, nodes);
}

// Calls draw(rng) with fresh generators until it reports a kink distance of
// at least the margin. Returns the number of rejected draws.
template <typename Draw>
std::size_t draw_away_from_kinks(std::uint64_t seed, std::uint64_t tag, Draw&& draw) {
  for (std::size_t attempt = 0; attempt < kMaxDraws; ++attempt) {
    Rng rng = Rng::derive(seed, tag, attempt);
    if (draw(rng) >= kKinkMargin) return attempt;
  }
  throw DomainError("could not draw a gradient-check point away from rectifier kinks");
}

struct Outcome {
  nn::GradCheckReport report;
  std::size_t redraws = 0;
};

Outcome check_stgcn_block(std::uint64_t seed, bool residual) {
  const std::size_t n = 2, frames = 4, nodes = 5, c_in = residual ? 4 : 3, c_out = 4;
  StGraph graph;
  Params p;
  StgcnBlock block;
  std::size_t input = 0;
  Tensor<double> w({n, frames, nodes, c_out});
  Outcome out;
  out.redraws = draw_away_from_kinks(seed, residual ? 2 : 1, [&](Rng& rng) {
    graph = small_graph(rng, nodes);
    p = Params();
    block = StgcnBlock::create(p, "block", c_in, c_out, nodes, 3, residual, nn::Activation::relu);
    input = p.add("input", {n, frames, nodes, c_in});
    block.init(p, rng);
    fill_normal(p.value(input), rng);
    for (auto& v : p.value(block.importance).values()) v = 1.0 + 0.2 * rng.normal();
    for (auto& v : p.value(block.spatial_b).values()) v = 0.1 * rng.normal();
    for (auto& v : p.value(block.temporal_b).values()) v = 0.1 * rng.normal();
    fill_normal(w, rng);
    StgcnBlock::Cache<double> cache;
    block.forward(p, graph, p.value(input), &cache);
    return std::min(min_abs(cache.spatial_pre), min_abs(cache.output_pre));
  });
  out.report = nn::grad_check(
      [&](Params& ps, bool with_grad) {
        StgcnBlock::Cache<double> cache;
        const auto y = block.forward(ps, graph, ps.value(input), &cache);
        if (with_grad) {
          auto g = ps.make_grads();
          g[input] += block.backward(ps, graph, cache, w, g, true);
          ps.accumulate(g);
        }
        return scalar(weighted_sum(y, w));
      },
      p);
  return out;
}

Outcome check_mhsa(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 3);
  const std::size_t t = 5, d = 8;
  Params p;
  const auto mhsa = MultiHeadAttention::create(p, "mhsa", d, 2);
  const auto input = p.add("input", {t, d});
  for (auto& b : p) fill_normal(b.value, rng, 0.5);
  Tensor<double> w({t, d});
  fill_normal(w, rng);
  return {nn::grad_check(
      [&](Params& ps, bool with_grad) {
        MultiHeadAttention::Cache<double> cache;
        const auto y = mhsa.forward(ps, ps.value(input), &cache);
        if (with_grad) {
          auto g = ps.make_grads();
          g[input] += mhsa.backward(ps, cache, w, g);
          ps.accumulate(g);
        }
        return scalar(weighted_sum(y, w));
      },
      p)};
}

Outcome check_ffn(std::uint64_t seed) {
  const std::size_t t = 5, d = 8;
  Params p;
  const auto ffn = FeedForward::create(p, "ffn", d, 12);
  const auto input = p.add("input", {t, d});
  Tensor<double> w({t, d});
  Outcome out;
  out.redraws = draw_away_from_kinks(seed, 4, [&](Rng& rng) {
    for (auto& b : p) fill_normal(b.value, rng, 0.5);
    fill_normal(w, rng);
    FeedForward::Cache<double> cache;
    ffn.forward(p, p.value(input), &cache);
    return min_abs(cache.hidden_pre);
  });
  out.report = nn::grad_check(
      [&](Params& ps, bool with_grad) {
        FeedForward::Cache<double> cache;
        const auto y = ffn.forward(ps, ps.value(input), &cache);
        if (with_grad) {
          auto g = ps.make_grads();
          g[input] += ffn.backward(ps, cache, w, g);
          ps.accumulate(g);
        }
        return scalar(weighted_sum(y, w));
      },
      p);
  return out;
}

Outcome check_layernorm(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 5);
  const std::size_t t = 5, d = 8;
  Params p;
  const auto ln = nn::LayerNorm::create(p, "norm", d);
  const auto input = p.add("input", {t, d});
  for (auto& b : p) fill_normal(b.value, rng);
  Tensor<double> w({t, d});
  fill_normal(w, rng);
  return {nn::grad_check(
      [&](Params& ps, bool with_grad) {
        nn::LayerNorm::Cache<double> cache;
        const auto y = ln.forward(ps, ps.value(input), &cache);
        if (with_grad) {
          auto g = ps.make_grads();
          g[input] += ln.backward(ps, cache, w, g);
          ps.accumulate(g);
        }
        return scalar(weighted_sum(y, w));
      },
      p)};
}

Outcome check_head(std::uint64_t seed) {
  const std::size_t t = 5, d = 8;
  Params p;
  const auto head = Head::create(p, d, 6, 4);
  const auto input = p.add("input", {t, d});
  Tensor<double> w({t, 4});
  Outcome out;
  out.redraws = draw_away_from_kinks(seed, 6, [&](Rng& rng) {
    for (auto& b : p) fill_normal(b.value, rng, 0.5);
    fill_normal(w, rng);
    Head::Cache<double> cache;
    head.forward(p, p.value(input), &cache);
    return min_abs(cache.pre);
  });
  out.report = nn::grad_check(
      [&](Params& ps, bool with_grad) {
        Head::Cache<double> cache;
        const auto y = head.forward(ps, ps.value(input), &cache);
        if (with_grad) {
          auto g = ps.make_grads();
          g[input] += head.backward(ps, cache, w, g);
          ps.accumulate(g);
        }
        return scalar(weighted_sum(y, w));
      },
      p);
  return out;
}

Outcome check_crf(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 7);
  const std::size_t t = 6, labels = seed % 2 ? 2 : 4;
  Params p;
  const auto em = p.add("emissions", {t, labels});
  const auto tr = p.add("transitions", {labels, labels});
  const auto st = p.add("start", {labels});
  const auto en = p.add("end", {labels});
  for (auto& b : p) fill_normal(b.value, rng);
  std::vector<std::uint8_t> gold(t);
  for (auto& g : gold) g = static_cast<std::uint8_t>(rng.below(labels));
  return {nn::grad_check(
      [&](Params& ps, bool with_grad) {
        const CrfParams<double> cp(ps.value(tr), ps.value(st), ps.value(en));
        if (!with_grad) return scalar(crf_nll(ps.value(em), gold, cp));
        CrfGrads<double> cg;
        const double v = crf_nll(ps.value(em), gold, cp, &cg);
        auto g = ps.make_grads();
        g[em] += cg.emissions;
        g[tr] += cg.transitions;
        g[st] += cg.start;
        g[en] += cg.end;
        ps.accumulate(g);
        return scalar(v);
      },
      p)};
}

Outcome check_classification(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, 8);
  const std::size_t t = 6, labels = seed % 2 ? 2 : 4;
  Params p;
  const auto em = p.add("emissions", {t, labels});
  fill_normal(p.value(em), rng);
  std::vector<std::uint8_t> gold(t);
  for (auto& g : gold) g = static_cast<std::uint8_t>(rng.below(labels));
  return {nn::grad_check(
      [&](Params& ps, bool with_grad) {
        if (!with_grad) return scalar(classification_nll(ps.value(em), gold));
        Tensor<double> d;
        const double v = classification_nll(ps.value(em), gold, &d);
        auto g = ps.make_grads();
        g[em] += d;
        ps.accumulate(g);
        return scalar(v);
      },
      p)};
}

Outcome check_encoder(std::uint64_t seed) {
  EncoderConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.ffn_dim = 12;
  cfg.layers = 2;
  cfg.positional = seed % 2 ? PositionalMode::learned : PositionalMode::sinusoidal;
  const std::size_t t = 5;
  Params p;
  const auto enc = Encoder::create(p, cfg);
  const auto input = p.add("input", {t, cfg.d_model});
  Tensor<double> w({t, cfg.d_model});
  Outcome out;
  out.redraws = draw_away_from_kinks(seed, 9, [&](Rng& rng) {
    enc.init(p, rng);
    for (auto& b : p) {
      if (b.name.find(".gain") != std::string::npos) {
        for (auto& v : b.value.values()) v = 1.0 + 0.2 * rng.normal();
      } else {
        fill_normal(b.value, rng, 0.3);
      }
    }
    fill_normal(w, rng);
    Encoder::Cache<double> cache;
    enc.forward(p, p.value(input), nullptr, &cache);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& l : cache.layers) m = std::min(m, min_abs(l.ffn.hidden_pre));
    return m;
  });
  out.report = nn::grad_check(
      [&](Params& ps, bool with_grad) {
        Encoder::Cache<double> cache;
        const auto y = enc.forward(ps, ps.value(input), nullptr, &cache);
        if (with_grad) {
          auto g = ps.make_grads();
          g[input] += enc.backward(ps, cache, w, g);
          ps.accumulate(g);
        }
        return scalar(weighted_sum(y, w));
      },
      p);
  return out;
}

Outcome check_model(std::uint64_t seed) {
  ModelConfig mc;
  mc.stgcn.channels = {4, 6};
  mc.stgcn.temporal_kernel = 3;
  mc.encoder.heads = 2;
  mc.encoder.layers = 1;
  mc.encoder.ffn_dim = 8;
  mc.head_hidden = 5;
  mc.variant = ModelVariant::all()[seed % 8];
  const std::size_t t = 3, frames = 4, nodes = 5;
  std::optional<Model<double>> m;
  Tensor<double> x({t, frames, nodes, kFeatureChannels});
  std::vector<std::uint8_t> gold(t);
  Outcome out;
  out.redraws = draw_away_from_kinks(seed, 10, [&](Rng& rng) {
    m.emplace(mc, small_graph(rng, nodes));
    m->init(rng.next_u64());
    for (auto& b : m->params()) {
      for (auto& v : b.value.values()) v += 0.1 * rng.normal();
    }
    fill_normal(x, rng);
    for (auto& g : gold) g = static_cast<std::uint8_t>(rng.below(m->num_labels()));
    Model<double>::Cache cache;
    m->forward(x, nullptr, &cache);
    double margin = min_abs(cache.head.pre);
    for (const auto& b : cache.embed.blocks) margin = std::min({margin, min_abs(b.spatial_pre), min_abs(b.output_pre)});
    for (const auto& l : cache.encoder.layers) margin = std::min(margin, min_abs(l.ffn.hidden_pre));
    return margin;
  });
  out.report = nn::grad_check(
      [&](Params& ps, bool with_grad) {
        if (!with_grad) return scalar(m->loss(x, gold));
        auto g = ps.make_grads();
        const double v = m->loss(x, gold, &g);
        ps.accumulate(g);
        return scalar(v);
      },
      m->params());
  return out;
}

}  // namespace

const std::vector<std::string>& gradcheck_layers() {
  static const std::vector<std::string> layers = {"stgcn_block", "stgcn_block_residual", "mhsa",   "ffn",
                                                  "layernorm",   "head",                 "crf_nll", "classification_nll"};
  return layers;
}

const std::vector<std::string>& gradcheck_composites() {
  static const std::vector<std::string> layers = {"encoder", "model"};
  return layers;
}

LayerCheck check_layer(const std::string& layer, std::uint64_t seed, double threshold) {
  Outcome o;
  if (layer == "stgcn_block") {
    o = check_stgcn_block(seed, false);
  } else if (layer == "stgcn_block_residual") {
    o = check_stgcn_block(seed, true);
  } else if (layer == "mhsa") {
    o = check_mhsa(seed);
  } else if (layer == "ffn") {
    o = check_ffn(seed);
  } else if (layer == "layernorm") {
    o = check_layernorm(seed);
  } else if (layer == "head") {
    o = check_head(seed);
  } else if (layer == "crf_nll") {
    o = check_crf(seed);
  } else if (layer == "classification_nll") {
    o = check_classification(seed);
  } else if (layer == "encoder") {
    o = check_encoder(seed);
  } else if (layer == "model") {
    o = check_model(seed);
  } else {
    throw ConfigError("unknown layer type '" + layer + "' for gradient checking");
  }
  LayerCheck c;
  c.layer = layer;
  c.seed = seed;
  c.report = o.report;
  c.redraws = o.redraws;
  c.passed = c.report.max_rel_error <= threshold;
  c.gating = std::find(gradcheck_composites().begin(), gradcheck_composites().end(), layer) ==
             gradcheck_composites().end();
  return c;
}

GradCheckSuiteResult run_gradcheck_suite(std::size_t seeds, std::uint64_t base_seed, double threshold,
                                         bool composites) {
  GradCheckSuiteResult r;
  r.threshold = threshold;
  auto run = [&](const std::vector<std::string>& layers) {
    for (const auto& layer : layers) {
      for (std::size_t s = 0; s < seeds; ++s) r.checks.push_back(check_layer(layer, base_seed + s, threshold));
    }
  };
  run(gradcheck_layers());
  if (composites) run(gradcheck_composites());
  return r;
}

bool GradCheckSuiteResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const LayerCheck& c) { return c.passed || !c.gating; });
}

double GradCheckSuiteResult::max_error() const {
  double m = 0.0;
  for (const auto& c : checks) {
    if (c.gating) m = std::max(m, c.report.max_rel_error);
  }
  return m;
}

json GradCheckSuiteResult::to_json() const {
  json layers = json::object();
  for (const auto& c : checks) {
    auto& entry = layers[c.layer];
    if (entry.is_null()) {
      entry = {{"seeds", 0},     {"max_rel_error", 0.0},       {"redraws", 0},
               {"passed", true}, {"gating", c.gating}, {"worst", json::object()}};
    }
    entry["seeds"] = entry["seeds"].get<int>() + 1;
    entry["redraws"] = entry["redraws"].get<std::size_t>() + c.redraws;
    entry["passed"] = entry["passed"].get<bool>() && c.passed;
    if (c.report.max_rel_error >= entry["max_rel_error"].get<double>()) {
      entry["max_rel_error"] = c.report.max_rel_error;
      entry["worst"] = {{"seed", c.seed},
                        {"block", c.report.worst_block},
                        {"index", c.report.worst_index},
                        {"analytic", c.report.analytic},
                        {"numeric", c.report.numeric}};
    }
  }
  return {{"threshold", threshold}, {"kink_margin", kKinkMargin}, {"passed", passed()},
          {"max_rel_error", max_error()}, {"layers", layers}};
}

}  // namespace gp
