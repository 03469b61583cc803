#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cloven/nn.hpp"
#include "cloven/rng.hpp"
#include "cloven/tensor.hpp"

namespace cloven {

enum class FusionKind { kVanilla, kResidual };

struct ModelConfig {
  std::size_t views = 2;
  // Per-view layer widths, input dimension first: {d(X_i), h..., d(H_i)}.
  std::vector<std::vector<std::size_t>> encoder_widths;
  std::size_t common_dim = 32;  // d(Z)
  FusionKind fusion_kind = FusionKind::kResidual;
  std::size_t fusion_layers = 2;  // L
  double dropout_p = 0.1;
  std::size_t clusters = 3;  // k
  // Output widths of the three projection-head layers; empty means
  // {common_dim, common_dim, common_dim}.
  std::vector<std::size_t> projection_widths;
  std::size_t clustering_hidden_width = 128;
  // Swaps the inner widths of the scale/latent blocks (the printed equations
  // and the surrounding prose disagree on which block widens).
  bool swap_scale_widths = false;
  // Apply ReLU after the mapping layer before the first fusion block.
  bool mapping_activation = false;

  void validate() const;  // throws std::invalid_argument on the first problem
  std::size_t encoder_output_dim(std::size_t i) const {
    return encoder_widths[i].back();
  }
  std::size_t concat_dim() const;
  std::vector<std::size_t> effective_projection_widths() const;
};

// Residual unit: z + M(norm(z)).
struct ResidualBlock {
  BatchNorm1d norm;
  Dense lin;

  ResidualBlock() = default;
  ResidualBlock(std::size_t dim, Rng& rng);
  Tensor forward(const Tensor& z, Mode mode);
  std::size_t parameter_count() const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Shared shape of the scale/latent blocks: the residual unit, dropout, a
// two-layer MLP through an inner width (2*d for the scale block, floor(d/2)
// for the latent block), and the skip connection back to d.
struct FusionBlock {
  ResidualBlock rb;
  Dense widen;    // d -> inner
  Dense restore;  // inner -> d
  double dropout_p = 0.1;

  FusionBlock() = default;
  FusionBlock(std::size_t dim, std::size_t inner, double dropout_p, Rng& rng);
  Tensor forward(const Tensor& z, Mode mode, Rng* dropout_rng);
  std::size_t inner_width() const { return widen.out_dim(); }
  std::size_t parameter_count() const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct ClusterHead {
  Dense hidden;  // d -> h, ReLU
  Dense out;     // h -> k, then softmax

  ClusterHead() = default;
  ClusterHead(std::size_t in, std::size_t h, std::size_t k, Rng& rng);
  // Returns the row-stochastic assignment matrix and the post-activation
  // hidden features (the kernel-matrix inputs).
  std::pair<Tensor, Tensor> forward(const Tensor& x) const;
  std::size_t parameter_count() const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

// Everything a training step needs from one forward pass.
struct ForwardProducts {
  std::vector<Tensor> view_repr;    // H_v
  Tensor fused;                     // Z
  Tensor fused_proj;                // p(Z)
  std::vector<Tensor> view_proj;    // p(H_v)
  Tensor fused_assign;              // g(Z)
  Tensor fused_hidden;              // clustering-head hidden features of Z
  std::vector<Tensor> view_assign;  // g(H_v)
};

class CloVenModel {
 public:
  CloVenModel(ModelConfig cfg, Rng& init_rng);

  Tensor encode_view(std::size_t i, const Tensor& x) const;
  // Concatenate views column-wise and apply the mapping layer (residual
  // fusion only).
  Tensor map_concat(const std::vector<Tensor>& h) const;
  Tensor fuse(const std::vector<Tensor>& h, Mode mode, Rng* dropout_rng);
  Tensor project(const Tensor& x) const;
  std::pair<Tensor, Tensor> cluster_assign(const Tensor& x) const;

  // Full pass: encode every view, fuse, project and assign both the fused
  // and the view-specific representations.
  ForwardProducts forward(const std::vector<Tensor>& views, Mode mode,
                          Rng* dropout_rng);

  NamedParams parameters() const;
  std::vector<Tensor> parameter_list() const;
  std::size_t parameter_count() const;
  // Named non-trainable state (batchnorm running statistics).
  std::vector<std::pair<std::string, std::vector<double>*>> mutable_state();
  std::vector<std::pair<std::string, const std::vector<double>*>> state() const;

  const ModelConfig& config() const { return cfg_; }
  const ClusterHead& cluster_head() const { return cluster_head_; }

 private:
  Tensor fuse_vanilla(const std::vector<Tensor>& h) const;
  Tensor fuse_residual(const std::vector<Tensor>& h, Mode mode,
                       Rng* dropout_rng);

  ModelConfig cfg_;
  std::vector<Mlp> encoders_;
  Dense mapping_;                    // residual fusion only
  std::vector<Dense> vanilla_;       // vanilla fusion only
  std::vector<FusionBlock> scale_;   // L scale blocks
  std::vector<FusionBlock> latent_;  // L latent blocks
  Mlp projection_;
  ClusterHead cluster_head_;
};

// Model config <-> canonical JSON (used by the checkpoint container).
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace cloven
