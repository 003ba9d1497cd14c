#include "napa/losses.hpp"

#include "napa/error.hpp"

#include <cmath>

namespace napa {

namespace {

constexpr const char* kNames[kNumLossTerms] = {"style", "feat",  "tv",      "sent",  "srgb",
                                               "hsv",   "cos",   "content", "cent",  "pose_2d",
                                               "depth", "style_sup", "cos_sup", "feat_sup"};

torch::Tensor features_at(FeatureExtractor& fx, const torch::Tensor& x, const std::string& layer) {
  return fx.extract(x, {layer}).at(layer);
}

torch::Tensor broadcast_batch(const torch::Tensor& t, long n) {
  return t.size(0) == n ? t : t.expand({n, t.size(1), t.size(2), t.size(3)});
}

}  // namespace

const std::array<LossTerm, kNumLossTerms>& all_loss_terms() {
  static const std::array<LossTerm, kNumLossTerms> terms = [] {
    std::array<LossTerm, kNumLossTerms> t{};
    for (std::size_t i = 0; i < kNumLossTerms; ++i) t[i] = static_cast<LossTerm>(i);
    return t;
  }();
  return terms;
}

const char* loss_name(LossTerm t) { return kNames[static_cast<std::size_t>(t)]; }

LossTerm loss_term_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNumLossTerms; ++i)
    if (name == kNames[i]) return static_cast<LossTerm>(i);
  throw ConfigError("unknown loss term: " + name);
}

nlohmann::json LossWeights::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (LossTerm t : all_loss_terms()) j[loss_name(t)] = (*this)[t];
  return j;
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  if (!j.is_object()) throw ConfigError("loss weights must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw ConfigError("loss weight " + key + " must be a number");
    const double v = value.get<double>();
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weight " + key + " must be >= 0");
    w[loss_term_from_name(key)] = v;
  }
  return w;
}

nlohmann::json LayerSettings::to_json() const {
  return {{"style", style}, {"feat", feat}, {"content", content},
          {"cos", cos},     {"sent", sent}, {"cent", cent}};
}

LayerSettings LayerSettings::from_json(const nlohmann::json& j) {
  LayerSettings s;
  s.style = j.value("style", s.style);
  s.feat = j.value("feat", s.feat);
  s.content = j.value("content", s.content);
  s.cos = j.value("cos", s.cos);
  s.sent = j.value("sent", s.sent);
  s.cent = j.value("cent", s.cent);
  return s;
}

torch::Tensor gram(const torch::Tensor& features) {
  TORCH_CHECK(features.dim() == 4 && features.numel() > 0, "gram: expected nonempty [N, C, H, W]");
  const long n = features.size(0), c = features.size(1);
  const long hw = features.size(2) * features.size(3);
  const auto f = features.reshape({n, c, hw});
  return torch::bmm(f, f.transpose(1, 2)) / static_cast<double>(c * hw);
}

torch::Tensor style_loss(const torch::Tensor& o, const torch::Tensor& s, FeatureExtractor& fx,
                         const std::vector<std::string>& layers) {
  const auto fo = fx.extract(o, layers);
  const auto fs = fx.extract(s, layers);
  auto total = torch::zeros({}, o.options());
  for (const auto& l : layers) {
    const auto go = gram(fo.at(l));
    auto gs = gram(fs.at(l));
    if (gs.size(0) != go.size(0)) gs = gs.expand_as(go);
    total = total + (go - gs).pow(2).sum({1, 2}).mean();
  }
  return total;
}

torch::Tensor feature_mse(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& fx,
                          const std::string& layer) {
  const auto fa = features_at(fx, a, layer);
  const auto fb = broadcast_batch(features_at(fx, b, layer), fa.size(0));
  return (fa - fb).pow(2).mean();
}

torch::Tensor content_loss(const torch::Tensor& o, const torch::Tensor& i, FeatureExtractor& fx,
                           const LayerSettings& layers) {
  return feature_mse(o, i, fx, layers.content);
}

torch::Tensor feat_loss(const torch::Tensor& o, const torch::Tensor& i, FeatureExtractor& fx,
                        const LayerSettings& layers) {
  return feature_mse(o, i, fx, layers.feat);
}

torch::Tensor tv_loss(const torch::Tensor& o) {
  TORCH_CHECK(o.dim() == 4 && o.size(2) >= 2 && o.size(3) >= 2, "tv_loss: expected H, W >= 2");
  const auto dh = o.slice(3, 1) - o.slice(3, 0, -1);
  const auto dv = o.slice(2, 1) - o.slice(2, 0, -1);
  return (dh.pow(2).sum({1, 2, 3}) + dv.pow(2).sum({1, 2, 3})).mean();
}

torch::Tensor js_divergence(const torch::Tensor& p, const torch::Tensor& q) {
  const auto m = 0.5 * (p + q);
  // xlogy keeps 0 log 0 = 0.
  const auto kl_pm = (torch::xlogy(p, p) - torch::xlogy(p, m)).sum(-1);
  const auto kl_qm = (torch::xlogy(q, q) - torch::xlogy(q, m)).sum(-1);
  return 0.5 * (kl_pm + kl_qm);
}

torch::Tensor js_divergence_logits(const torch::Tensor& a, const torch::Tensor& b) {
  const auto lp = torch::log_softmax(a, -1);
  const auto lq = torch::log_softmax(b, -1);
  const auto lm = torch::logaddexp(lp, lq) - std::log(2.0);
  const auto p = lp.exp();
  const auto q = lq.exp();
  const auto kl_pm = (p * (lp - lm)).sum(-1);
  const auto kl_qm = (q * (lq - lm)).sum(-1);
  // Round-off can push the value a hair below zero.
  return (0.5 * (kl_pm + kl_qm)).clamp_min(0.0);
}

torch::Tensor js_entropy_loss(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& fx,
                              const std::vector<std::string>& layers) {
  TORCH_CHECK(!layers.empty(), "js_entropy_loss: no layers");
  const auto fa = fx.extract(a, layers);
  const auto fb = fx.extract(b, layers);
  auto total = torch::zeros({}, a.options());
  for (const auto& l : layers) {
    const auto x = fa.at(l);
    const auto y = broadcast_batch(fb.at(l), x.size(0));
    total = total + js_divergence_logits(x.flatten(1), y.flatten(1)).mean();
  }
  return total / static_cast<double>(layers.size());
}

torch::Tensor srgb_encode(const torch::Tensor& linear) {
  const auto x = linear.clamp(0.0, 1.0);
  const auto curve = 1.055 * x.clamp_min(0.0031308).pow(1.0 / 2.4) - 0.055;
  return torch::where(x <= 0.0031308, 12.92 * x, curve);
}

torch::Tensor flat_cosine_similarity(const torch::Tensor& a, const torch::Tensor& b) {
  const auto fa = a.flatten(1);
  const auto fb = b.size(0) == a.size(0) ? b.flatten(1) : b.flatten(1).expand_as(fa);
  const auto dot = (fa * fb).sum(1);
  const auto den = fa.pow(2).sum(1).sqrt() * fb.pow(2).sum(1).sqrt();
  const auto ok = den > 0;
  return torch::where(ok, dot / torch::where(ok, den, torch::ones_like(den)), torch::zeros_like(den));
}

torch::Tensor cosine_distance(const torch::Tensor& a, const torch::Tensor& b) {
  return (1.0 - flat_cosine_similarity(a, b)).mean();
}

torch::Tensor srgb_loss(const torch::Tensor& o, const torch::Tensor& s) {
  return cosine_distance(srgb_encode(o), srgb_encode(s));
}

torch::Tensor rgb_to_hsv(const torch::Tensor& rgb) {
  const auto r = rgb.select(1, 0), g = rgb.select(1, 1), b = rgb.select(1, 2);
  const auto maxc = torch::max(torch::max(r, g), b);
  const auto minc = torch::min(torch::min(r, g), b);
  const auto delta = maxc - minc;
  const auto has_hue = delta > 0;
  const auto safe_delta = torch::where(has_hue, delta, torch::ones_like(delta));
  const auto safe_max = torch::where(maxc > 0, maxc, torch::ones_like(maxc));
  const auto s = torch::where(maxc > 0, delta / safe_max, torch::zeros_like(maxc));
  const auto hr = torch::remainder((g - b) / safe_delta, 6.0);
  const auto hg = (b - r) / safe_delta + 2.0;
  const auto hb = (r - g) / safe_delta + 4.0;
  auto h = torch::where(maxc == r, hr, torch::where(maxc == g, hg, hb)) / 6.0;
  h = torch::where(has_hue, h, torch::zeros_like(h));
  return torch::stack({h, s, maxc}, 1);
}

torch::Tensor hsv_loss(const torch::Tensor& o, const torch::Tensor& s) {
  const auto a = rgb_to_hsv(o);
  const auto b = broadcast_batch(rgb_to_hsv(s), a.size(0));
  const auto dh = (a.select(1, 0) - b.select(1, 0)).abs();
  const auto hue = torch::min(dh, 1.0 - dh);
  return hue.mean() + (a.select(1, 1) - b.select(1, 1)).abs().mean() +
         (a.select(1, 2) - b.select(1, 2)).abs().mean();
}

torch::Tensor cos_feature_loss(const torch::Tensor& a, const torch::Tensor& b, FeatureExtractor& fx,
                               const std::string& layer) {
  return cosine_distance(features_at(fx, a, layer), features_at(fx, b, layer));
}

torch::Tensor style_sup_loss(const torch::Tensor& o_rec, const torch::Tensor& o, FeatureExtractor& fx,
                             const LayerSettings& layers) {
  return style_loss(o_rec, o, fx, layers.style);
}

torch::Tensor cos_sup_loss(const torch::Tensor& o_rec, const torch::Tensor& o, FeatureExtractor& fx,
                           const LayerSettings& layers) {
  return cos_feature_loss(o_rec, o, fx, layers.cos);
}

torch::Tensor feat_sup_loss(const torch::Tensor& o_rec, const torch::Tensor& o, FeatureExtractor& fx,
                            const LayerSettings& layers) {
  return content_loss(o_rec, o, fx, layers);
}

torch::Tensor normalize_heatmaps(const torch::Tensor& logits) {
  const auto n = logits.size(0), j = logits.size(1);
  return torch::softmax(logits.reshape({n, j, -1}), -1).reshape(logits.sizes());
}

torch::Tensor soft_argmax(const torch::Tensor& heatmaps, bool normalize) {
  TORCH_CHECK(heatmaps.dim() == 4, "soft_argmax: expected [N, J, Hh, Wh]");
  torch::Tensor hm = heatmaps;
  if (normalize) {
    hm = normalize_heatmaps(heatmaps);
  } else if ((heatmaps.sum({2, 3}) <= 0).any().item<bool>()) {
    throw ConfigError("soft_argmax: heatmap slice has no mass");
  }
  const auto opts = hm.options();
  const auto xs = torch::arange(hm.size(3), opts);
  const auto ys = torch::arange(hm.size(2), opts);
  const auto x = (hm.sum(2) * xs).sum(-1);
  const auto y = (hm.sum(3) * ys).sum(-1);
  return torch::stack({x, y}, -1);
}

torch::Tensor integral_2d_loss(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& visible) {
  const auto err = (pred - gt).abs();  // [N, J, 2]
  if (!visible.defined()) return err.mean();
  const auto mask = visible.to(pred.dtype()).unsqueeze(-1).expand_as(err);
  const double count = mask.sum().item<double>();
  if (count == 0.0) throw ConfigError("integral_2d_loss: no visible joints");
  return (err * mask).sum() / count;
}

torch::Tensor depth_loss(const torch::Tensor& pred_std, const torch::Tensor& gt_std) {
  return (pred_std - gt_std).pow(2).mean();
}

nlohmann::json LossReport::to_json() const {
  return {{"total", total.defined() ? total.item<double>() : 0.0}, {"raw", raw}, {"weighted", weighted}};
}

LossReport total_loss(const std::map<LossTerm, torch::Tensor>& components, const LossWeights& weights) {
  LossReport r;
  for (const auto& [term, value] : components) {
    const auto weighted = weights[term] * value;
    r.total = r.total.defined() ? r.total + weighted : weighted;
    r.raw[loss_name(term)] = value.item<double>();
    r.weighted[loss_name(term)] = weighted.item<double>();
  }
  if (!r.total.defined()) r.total = torch::zeros({});
  return r;
}

}  // namespace napa
