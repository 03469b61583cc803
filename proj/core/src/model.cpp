#include "cloven/model.hpp"

#include <stdexcept>

#include "json.hpp"

namespace cloven {

void ModelConfig::validate() const {
  if (views < 2) detail::fail_contract("model config: views must be >= 2");
  if (encoder_widths.size() != views) {
    detail::fail_contract("model config: need one encoder width list per view");
  }
  for (std::size_t i = 0; i < views; ++i) {
    if (encoder_widths[i].size() < 2) {
      detail::fail_contract("model config: encoder " + std::to_string(i) +
                            " needs input and output widths");
    }
    for (std::size_t w : encoder_widths[i]) {
      if (w < 1) detail::fail_contract("model config: widths must be >= 1");
    }
  }
  if (fusion_layers < 1) {
    detail::fail_contract("model config: fusion_layers must be >= 1");
  }
  if (clusters < 2) detail::fail_contract("model config: clusters must be >= 2");
  if (common_dim < 1) detail::fail_contract("model config: common_dim must be >= 1");
  if (fusion_kind == FusionKind::kResidual && common_dim < 2) {
    detail::fail_contract(
        "model config: residual fusion needs common_dim >= 2 for the latent "
        "bottleneck");
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    detail::fail_contract("model config: dropout_p must lie in [0, 1)");
  }
  if (!projection_widths.empty() && projection_widths.size() != 3) {
    detail::fail_contract("model config: projection_widths must have 3 entries");
  }
  for (std::size_t w : projection_widths) {
    if (w < 1) detail::fail_contract("model config: widths must be >= 1");
  }
  if (clustering_hidden_width < 1) {
    detail::fail_contract("model config: clustering_hidden_width must be >= 1");
  }
}

std::size_t ModelConfig::concat_dim() const {
  std::size_t total = 0;
  for (const auto& widths : encoder_widths) total += widths.back();
  return total;
}

std::vector<std::size_t> ModelConfig::effective_projection_widths() const {
  if (!projection_widths.empty()) return projection_widths;
  return {common_dim, common_dim, common_dim};
}

ResidualBlock::ResidualBlock(std::size_t dim, Rng& rng)
    : norm(dim), lin(dim, dim, rng) {}

Tensor ResidualBlock::forward(const Tensor& z, Mode mode) {
  return lin.forward(norm.forward(z, mode)) + z;
}

std::size_t ResidualBlock::parameter_count() const {
  return norm.parameter_count() + lin.parameter_count();
}

void ResidualBlock::collect(const std::string& prefix, NamedParams& out) const {
  norm.collect(prefix + ".norm", out);
  lin.collect(prefix + ".lin", out);
}

FusionBlock::FusionBlock(std::size_t dim, std::size_t inner, double p,
                         Rng& rng)
    : rb(dim, rng), widen(dim, inner, rng), restore(inner, dim, rng),
      dropout_p(p) {}

Tensor FusionBlock::forward(const Tensor& z, Mode mode, Rng* dropout_rng) {
  Tensor h = rb.forward(z, mode);
  if (mode == Mode::kTrain && dropout_p > 0.0) {
    if (!dropout_rng) {
      detail::fail_contract("fusion block: train mode needs a dropout rng");
    }
    h = dropout(h, dropout_p, mode, *dropout_rng);
  }
  h = restore.forward(relu(widen.forward(h)));
  return h + z;
}

std::size_t FusionBlock::parameter_count() const {
  return rb.parameter_count() + widen.parameter_count() +
         restore.parameter_count();
}

void FusionBlock::collect(const std::string& prefix, NamedParams& out) const {
  rb.collect(prefix + ".rb", out);
  widen.collect(prefix + ".widen", out);
  restore.collect(prefix + ".restore", out);
}

ClusterHead::ClusterHead(std::size_t in, std::size_t h, std::size_t k,
                         Rng& rng)
    : hidden(in, h, rng), out(h, k, rng) {}

std::pair<Tensor, Tensor> ClusterHead::forward(const Tensor& x) const {
  Tensor feats = relu(hidden.forward(x));
  Tensor assign = softmax_rows(out.forward(feats));
  return {assign, feats};
}

std::size_t ClusterHead::parameter_count() const {
  return hidden.parameter_count() + out.parameter_count();
}

void ClusterHead::collect(const std::string& prefix, NamedParams& out_params) const {
  hidden.collect(prefix + ".hidden", out_params);
  out.collect(prefix + ".out", out_params);
}

CloVenModel::CloVenModel(ModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  encoders_.reserve(cfg_.views);
  for (std::size_t i = 0; i < cfg_.views; ++i) {
    encoders_.emplace_back(cfg_.encoder_widths[i], rng);
  }
  const std::size_t d = cfg_.common_dim;
  if (cfg_.fusion_kind == FusionKind::kVanilla) {
    // L dense layers from the concatenation down to d(Z), ReLU between.
    std::size_t in = cfg_.concat_dim();
    for (std::size_t l = 0; l < cfg_.fusion_layers; ++l) {
      vanilla_.emplace_back(in, d, rng);
      in = d;
    }
  } else {
    mapping_ = Dense(cfg_.concat_dim(), d, rng);
    std::size_t scale_inner = 2 * d;
    std::size_t latent_inner = std::max<std::size_t>(1, d / 2);
    if (cfg_.swap_scale_widths) std::swap(scale_inner, latent_inner);
    for (std::size_t l = 0; l < cfg_.fusion_layers; ++l) {
      scale_.emplace_back(d, scale_inner, cfg_.dropout_p, rng);
      latent_.emplace_back(d, latent_inner, cfg_.dropout_p, rng);
    }
  }
  projection_ = Mlp([&] {
    std::vector<std::size_t> widths{d};
    for (std::size_t w : cfg_.effective_projection_widths()) widths.push_back(w);
    return widths;
  }(), rng);
  cluster_head_ = ClusterHead(d, cfg_.clustering_hidden_width, cfg_.clusters,
                              rng);
}

Tensor CloVenModel::encode_view(std::size_t i, const Tensor& x) const {
  if (i >= cfg_.views) {
    detail::fail_contract("encode_view: view index " + std::to_string(i) +
                          " out of range");
  }
  if (x.cols() != cfg_.encoder_widths[i].front()) {
    detail::fail_contract("encode_view: view " + std::to_string(i) +
                          " expects " +
                          std::to_string(cfg_.encoder_widths[i].front()) +
                          " columns, got " + std::to_string(x.cols()));
  }
  return encoders_[i].forward(x);
}

Tensor CloVenModel::map_concat(const std::vector<Tensor>& h) const {
  if (cfg_.fusion_kind != FusionKind::kResidual) {
    detail::fail_contract("map_concat: model was built without a mapping layer");
  }
  Tensor z = mapping_.forward(concat_cols(h));
  if (cfg_.mapping_activation) z = relu(z);
  return z;
}

Tensor CloVenModel::fuse_vanilla(const std::vector<Tensor>& h) const {
  Tensor z = concat_cols(h);
  for (std::size_t l = 0; l < vanilla_.size(); ++l) {
    z = vanilla_[l].forward(z);
    if (l + 1 < vanilla_.size()) z = relu(z);
  }
  return z;
}

Tensor CloVenModel::fuse_residual(const std::vector<Tensor>& h, Mode mode,
                                  Rng* dropout_rng) {
  Tensor z = map_concat(h);
  for (std::size_t l = 0; l < cfg_.fusion_layers; ++l) {
    z = scale_[l].forward(z, mode, dropout_rng);
    z = latent_[l].forward(z, mode, dropout_rng);
  }
  return z;
}

Tensor CloVenModel::fuse(const std::vector<Tensor>& h, Mode mode,
                         Rng* dropout_rng) {
  if (h.size() != cfg_.views) {
    detail::fail_contract("fuse: expected " + std::to_string(cfg_.views) +
                          " views, got " + std::to_string(h.size()));
  }
  return cfg_.fusion_kind == FusionKind::kVanilla
             ? fuse_vanilla(h)
             : fuse_residual(h, mode, dropout_rng);
}

Tensor CloVenModel::project(const Tensor& x) const {
  if (x.cols() != cfg_.common_dim) {
    detail::fail_contract("project: head expects " +
                          std::to_string(cfg_.common_dim) + " columns, got " +
                          std::to_string(x.cols()));
  }
  return projection_.forward(x);
}

std::pair<Tensor, Tensor> CloVenModel::cluster_assign(const Tensor& x) const {
  if (x.cols() != cfg_.common_dim) {
    detail::fail_contract("cluster_assign: head expects " +
                          std::to_string(cfg_.common_dim) + " columns, got " +
                          std::to_string(x.cols()));
  }
  return cluster_head_.forward(x);
}

ForwardProducts CloVenModel::forward(const std::vector<Tensor>& views,
                                     Mode mode, Rng* dropout_rng) {
  if (views.size() != cfg_.views) {
    detail::fail_contract("forward: expected " + std::to_string(cfg_.views) +
                          " views, got " + std::to_string(views.size()));
  }
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (cfg_.encoder_output_dim(v) != cfg_.common_dim) {
      detail::fail_contract(
          "forward: the shared projection and clustering heads require "
          "d(H_" + std::to_string(v) + ") == d(Z); encoder " +
          std::to_string(v) + " emits " +
          std::to_string(cfg_.encoder_output_dim(v)) + " columns but d(Z) is " +
          std::to_string(cfg_.common_dim));
    }
  }
  ForwardProducts out;
  out.view_repr.reserve(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    out.view_repr.push_back(encode_view(v, views[v]));
  }
  out.fused = fuse(out.view_repr, mode, dropout_rng);
  out.fused_proj = project(out.fused);
  auto [assign_z, hidden_z] = cluster_assign(out.fused);
  out.fused_assign = assign_z;
  out.fused_hidden = hidden_z;
  for (const Tensor& h : out.view_repr) {
    out.view_proj.push_back(project(h));
    out.view_assign.push_back(cluster_assign(h).first);
  }
  return out;
}

NamedParams CloVenModel::parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    encoders_[i].collect("encoder" + std::to_string(i), out);
  }
  if (cfg_.fusion_kind == FusionKind::kVanilla) {
    for (std::size_t l = 0; l < vanilla_.size(); ++l) {
      vanilla_[l].collect("fusion.l" + std::to_string(l), out);
    }
  } else {
    mapping_.collect("mapping", out);
    for (std::size_t l = 0; l < scale_.size(); ++l) {
      scale_[l].collect("fusion.sb" + std::to_string(l), out);
      latent_[l].collect("fusion.lb" + std::to_string(l), out);
    }
  }
  projection_.collect("projection", out);
  cluster_head_.collect("cluster", out);
  return out;
}

std::vector<Tensor> CloVenModel::parameter_list() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : parameters()) out.push_back(t);
  return out;
}

std::size_t CloVenModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.size();
  return n;
}

std::vector<std::pair<std::string, std::vector<double>*>>
CloVenModel::mutable_state() {
  std::vector<std::pair<std::string, std::vector<double>*>> out;
  auto add_bn = [&out](const std::string& prefix, BatchNorm1d& bn) {
    out.emplace_back(prefix + ".running_mean", &bn.running_mean);
    out.emplace_back(prefix + ".running_var", &bn.running_var);
  };
  for (std::size_t l = 0; l < scale_.size(); ++l) {
    add_bn("fusion.sb" + std::to_string(l) + ".rb.norm", scale_[l].rb.norm);
    add_bn("fusion.lb" + std::to_string(l) + ".rb.norm", latent_[l].rb.norm);
  }
  return out;
}

std::vector<std::pair<std::string, const std::vector<double>*>>
CloVenModel::state() const {
  std::vector<std::pair<std::string, const std::vector<double>*>> out;
  for (auto& [name, vec] : const_cast<CloVenModel*>(this)->mutable_state()) {
    out.emplace_back(name, vec);
  }
  return out;
}

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["views"] = cfg.views;
  j["encoder_widths"] = cfg.encoder_widths;
  j["common_dim"] = cfg.common_dim;
  j["fusion"] = cfg.fusion_kind == FusionKind::kVanilla ? "vanilla" : "residual";
  j["fusion_layers"] = cfg.fusion_layers;
  j["dropout"] = cfg.dropout_p;
  j["clusters"] = cfg.clusters;
  j["projection_widths"] = cfg.effective_projection_widths();
  j["clustering_hidden_width"] = cfg.clustering_hidden_width;
  j["swap_scale_widths"] = cfg.swap_scale_widths;
  j["mapping_activation"] = cfg.mapping_activation;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig cfg;
  cfg.views = j.at("views").get<std::size_t>();
  cfg.encoder_widths = j.at("encoder_widths")
                           .get<std::vector<std::vector<std::size_t>>>();
  cfg.common_dim = j.at("common_dim").get<std::size_t>();
  const std::string kind = j.at("fusion").get<std::string>();
  if (kind == "vanilla") {
    cfg.fusion_kind = FusionKind::kVanilla;
  } else if (kind == "residual") {
    cfg.fusion_kind = FusionKind::kResidual;
  } else {
    detail::fail_contract("model config: unknown fusion kind '" + kind + "'");
  }
  cfg.fusion_layers = j.at("fusion_layers").get<std::size_t>();
  cfg.dropout_p = j.at("dropout").get<double>();
  cfg.clusters = j.at("clusters").get<std::size_t>();
  cfg.projection_widths =
      j.at("projection_widths").get<std::vector<std::size_t>>();
  cfg.clustering_hidden_width =
      j.at("clustering_hidden_width").get<std::size_t>();
  cfg.swap_scale_widths = j.at("swap_scale_widths").get<bool>();
  cfg.mapping_activation = j.at("mapping_activation").get<bool>();
  cfg.validate();
  return cfg;
}

}  // namespace cloven
