#ifndef STABLEIK_NEURALNET_HPP_
#define STABLEIK_NEURALNET_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "stableik/linalg.hpp"
#include "stableik/rng.hpp"

namespace stableik {

enum class Activation { kCRelu, kTanh, kLinear };

/// Forward-pass statistics handling:
///   kTrain       batch statistics, running stats updated
///   kTrainFrozen batch statistics, running stats untouched (lets one network
///                be differentiated through without mutating it)
///   kInfer       running statistics, no mutation at all
enum class ForwardMode { kTrain, kTrainFrozen, kInfer };

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;  // affine width; cReLU doubles it on the way out
  Activation activation = Activation::kLinear;
  bool batch_norm = false;
};

/// Width of a layer's activation output (cReLU concatenates [x+, x-]).
int activation_width(const LayerSpec& spec);

struct Layer {
  LayerSpec spec;
  Matrix w;  // (in_dim, out_dim)
  Matrix b;  // (1, out_dim)
  // Batch-norm state, allocated only when spec.batch_norm:
  Matrix bn_scale, bn_shift;          // learned (1, out_dim)
  Matrix running_mean, running_var;   // inference statistics (1, out_dim)
};

struct LayerCache {
  Matrix input;    // layer input after any aux concatenation (m, in_dim)
  Matrix z_hat;    // batch-normalized pre-activation (BN layers only)
  Matrix inv_std;  // (1, out_dim), BN layers only
  Matrix act_in;   // activation input, i.e. post-BN / post-affine (m, out_dim)
  Matrix output;   // activation output before any output_scale (m, width)
};

struct ForwardCache {
  const void* source = nullptr;  // Mlp instance the cache belongs to
  ForwardMode mode = ForwardMode::kInfer;
  std::vector<LayerCache> layers;
};

struct LayerGrads {
  Matrix w, b;
  Matrix bn_scale, bn_shift;  // empty unless the layer has batch norm
};

struct Gradients {
  std::vector<LayerGrads> layers;
  Matrix input;  // gradient w.r.t. the forward input
  Matrix aux;    // gradient w.r.t. the aux input (empty if no aux)

  /// Pointers in the same order as Mlp::parameters().
  std::vector<Matrix*> flat();
};

/// Fully connected network: per layer, affine -> optional batch norm ->
/// activation. An optional auxiliary input (the critic's action) is
/// concatenated onto the activation entering layer `aux_layer`.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<LayerSpec> specs, int aux_layer = -1, int aux_dim = 0);

  /// Weights and biases uniform in +-1/sqrt(fan_in); when final_layer_scale
  /// >= 0 the last layer is drawn from +-final_layer_scale instead. BN scale
  /// starts at 1, shift at 0, running stats at (0, 1).
  void init_params(Rng& rng, double final_layer_scale = -1.0);

  Matrix forward(const Matrix& input, ForwardMode mode,
                 ForwardCache* cache = nullptr);
  Matrix forward(const Matrix& input, const Matrix& aux, ForwardMode mode,
                 ForwardCache* cache = nullptr);

  /// Exact reverse-mode gradients of the cached forward pass. The cache must
  /// come from this instance in a batch-statistics mode, else CacheError.
  Gradients backward(const ForwardCache& cache, const Matrix& dout) const;

  int input_dim() const { return layers_.front().spec.in_dim; }
  int output_dim() const;
  int num_layers() const { return static_cast<int>(layers_.size()); }
  int aux_layer() const { return aux_layer_; }
  int aux_dim() const { return aux_dim_; }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  /// Learned parameters in a fixed order: per layer w, b, then bn scale and
  /// shift when present. Matches Gradients::flat().
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

  /// Batch-norm running mean/variance blocks (same order as the layers).
  std::vector<Matrix*> running_stats();
  std::vector<const Matrix*> running_stats() const;

  /// Scalar multiplier applied to the final activation (the actor's
  /// action-bound scaling). Checkpointed; gradients account for it.
  double output_scale = 1.0;

  /// Versioned checkpoint block: text header plus little-endian raw doubles.
  /// Round-trips bit-exactly.
  void save(std::ostream& out) const;
  static Mlp load(std::istream& in);

 private:
  Matrix run_forward(const Matrix& input, const Matrix* aux, ForwardMode mode,
                     ForwardCache* cache);

  std::vector<Layer> layers_;
  int aux_layer_ = -1;
  int aux_dim_ = 0;
  double bn_momentum_ = 0.99;
  double bn_epsilon_ = 1e-5;
};

/// Bias-corrected Adam. Moment buffers are lazily shaped on first use.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m, v;

  void save(std::ostream& out) const;
  static AdamState load(std::istream& in);
};

/// One Adam step over a parameter list; grads must align with params.
void adam_update(const std::vector<Matrix*>& params,
                 const std::vector<Matrix*>& grads, AdamState& state);

}  // namespace stableik

#endif  // STABLEIK_NEURALNET_HPP_
