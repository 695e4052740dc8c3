#include "stableik/neuralnet.hpp"

#include <bit>
#include <cmath>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "stableik/errors.hpp"
#include "stableik/text_format.hpp"

namespace stableik {

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kCRelu: return "crelu";
    case Activation::kTanh: return "tanh";
    case Activation::kLinear: return "linear";
  }
  throw ConfigError("unknown activation");
}

Activation activation_from_name(const std::string& s) {
  if (s == "crelu") return Activation::kCRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "linear") return Activation::kLinear;
  throw ParseError("unknown activation '" + s + "'");
}

void add_bias_rows(Matrix& z, const Matrix& b) {
  for (int i = 0; i < z.rows(); ++i) {
    double* zr = z.row(i);
    const double* br = b.row(0);
    for (int j = 0; j < z.cols(); ++j) zr[j] += br[j];
  }
}

// dX = dZ * W^T, computed through a transposed scratch copy so the
// contraction runs on the vectorizable row-major kernel.
void backprop_input(const Matrix& dz, const Matrix& w, Matrix& wt,
                    Matrix& dx) {
  if (wt.rows() != w.cols() || wt.cols() != w.rows())
    wt = Matrix(w.cols(), w.rows());
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j) wt(j, i) = w(i, j);
  dx = Matrix(dz.rows(), w.rows());
  kernels::gemm_nn(dz, wt, dx);
}

void write_le_doubles(std::ostream& out, const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    unsigned char bytes[8];
    for (int k = 0; k < 8; ++k)
      bytes[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

void read_le_doubles(std::istream& in, Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8))
      throw IoError("checkpoint truncated inside a parameter block");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k)
      bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    m.data()[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace

int activation_width(const LayerSpec& spec) {
  return spec.activation == Activation::kCRelu ? 2 * spec.out_dim
                                               : spec.out_dim;
}

Mlp::Mlp(std::vector<LayerSpec> specs, int aux_layer, int aux_dim)
    : aux_layer_(aux_layer), aux_dim_(aux_dim) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  if ((aux_layer < 0) != (aux_dim <= 0))
    throw ConfigError("aux_layer and aux_dim must be set together");
  if (aux_layer >= 0 &&
      (aux_layer < 1 || aux_layer >= static_cast<int>(specs.size())))
    throw ConfigError("aux_layer must name a hidden layer (>= 1)");

  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    if (s.in_dim < 1 || s.out_dim < 1)
      throw ConfigError("layer dimensions must be >= 1");
    if (i > 0) {
      int expected = activation_width(specs[i - 1]);
      if (static_cast<int>(i) == aux_layer_) expected += aux_dim_;
      if (s.in_dim != expected)
        throw ConfigError("layer " + std::to_string(i) + " expects in_dim " +
                          std::to_string(expected) + ", got " +
                          std::to_string(s.in_dim));
    }
    Layer layer;
    layer.spec = s;
    layer.w = Matrix(s.in_dim, s.out_dim);
    layer.b = Matrix(1, s.out_dim);
    if (s.batch_norm) {
      layer.bn_scale = Matrix(1, s.out_dim, 1.0);
      layer.bn_shift = Matrix(1, s.out_dim);
      layer.running_mean = Matrix(1, s.out_dim);
      layer.running_var = Matrix(1, s.out_dim, 1.0);
    }
    layers_.push_back(std::move(layer));
  }
}

int Mlp::output_dim() const {
  return activation_width(layers_.back().spec);
}

void Mlp::init_params(Rng& rng, double final_layer_scale) {
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Layer& layer = layers_[li];
    double bound = 1.0 / std::sqrt(static_cast<double>(layer.spec.in_dim));
    if (final_layer_scale >= 0.0 && li + 1 == layers_.size())
      bound = final_layer_scale;
    for (std::size_t k = 0; k < layer.w.size(); ++k)
      layer.w.data()[k] = rng.uniform(-bound, bound);
    for (std::size_t k = 0; k < layer.b.size(); ++k)
      layer.b.data()[k] = rng.uniform(-bound, bound);
    if (layer.spec.batch_norm) {
      layer.bn_scale.fill(1.0);
      layer.bn_shift.fill(0.0);
      layer.running_mean.fill(0.0);
      layer.running_var.fill(1.0);
    }
  }
}

Matrix Mlp::forward(const Matrix& input, ForwardMode mode,
                    ForwardCache* cache) {
  if (aux_dim_ > 0)
    throw ShapeError("this network requires an aux input batch");
  return run_forward(input, nullptr, mode, cache);
}

Matrix Mlp::forward(const Matrix& input, const Matrix& aux, ForwardMode mode,
                    ForwardCache* cache) {
  if (aux_dim_ <= 0)
    throw ShapeError("this network takes no aux input");
  return run_forward(input, &aux, mode, cache);
}

Matrix Mlp::run_forward(const Matrix& input, const Matrix* aux,
                        ForwardMode mode, ForwardCache* cache) {
  if (input.cols() != input_dim())
    throw ShapeError("forward: input has " + std::to_string(input.cols()) +
                     " columns, network expects " + std::to_string(input_dim()));
  if (aux) {
    if (aux->cols() != aux_dim_)
      throw ShapeError("forward: aux has " + std::to_string(aux->cols()) +
                       " columns, network expects " + std::to_string(aux_dim_));
    if (aux->rows() != input.rows())
      throw ShapeError("forward: aux batch size differs from input");
  }
  const int m = input.rows();
  if (m < 1) throw ShapeError("forward: empty batch");

  if (cache) {
    cache->source = this;
    cache->mode = mode;
    cache->layers.assign(layers_.size(), LayerCache{});
  }

  Matrix x = input;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Layer& layer = layers_[li];
    const LayerSpec& spec = layer.spec;
    const int out = spec.out_dim;

    if (static_cast<int>(li) == aux_layer_) {
      Matrix joined(m, x.cols() + aux_dim_);
      for (int i = 0; i < m; ++i) {
        double* dst = joined.row(i);
        std::memcpy(dst, x.row(i), sizeof(double) * x.cols());
        std::memcpy(dst + x.cols(), aux->row(i), sizeof(double) * aux_dim_);
      }
      x = std::move(joined);
    }

    Matrix z(m, out);
    kernels::gemm_nn(x, layer.w, z);
    add_bias_rows(z, layer.b);

    LayerCache* lc = cache ? &cache->layers[li] : nullptr;
    if (lc) lc->input = std::move(x);

    if (spec.batch_norm) {
      if (mode == ForwardMode::kInfer) {
        for (int i = 0; i < m; ++i) {
          double* zr = z.row(i);
          for (int j = 0; j < out; ++j) {
            const double inv =
                1.0 / std::sqrt(layer.running_var(0, j) + bn_epsilon_);
            zr[j] = layer.bn_scale(0, j) * (zr[j] - layer.running_mean(0, j)) *
                        inv +
                    layer.bn_shift(0, j);
          }
        }
      } else {
        if (m < 2)
          throw StatisticsError(
              "batch norm needs a batch of at least 2 in training modes");
        Matrix mean(1, out), var(1, out), inv_std(1, out);
        for (int j = 0; j < out; ++j) {
          double s = 0.0;
          for (int i = 0; i < m; ++i) s += z(i, j);
          mean(0, j) = s / m;
        }
        for (int j = 0; j < out; ++j) {
          double s = 0.0;
          for (int i = 0; i < m; ++i) {
            const double d = z(i, j) - mean(0, j);
            s += d * d;
          }
          var(0, j) = s / m;
          inv_std(0, j) = 1.0 / std::sqrt(var(0, j) + bn_epsilon_);
        }
        if (mode == ForwardMode::kTrain) {
          for (int j = 0; j < out; ++j) {
            layer.running_mean(0, j) = bn_momentum_ * layer.running_mean(0, j) +
                                       (1.0 - bn_momentum_) * mean(0, j);
            layer.running_var(0, j) = bn_momentum_ * layer.running_var(0, j) +
                                      (1.0 - bn_momentum_) * var(0, j);
          }
        }
        Matrix z_hat(m, out);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < out; ++j)
            z_hat(i, j) = (z(i, j) - mean(0, j)) * inv_std(0, j);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < out; ++j)
            z(i, j) = layer.bn_scale(0, j) * z_hat(i, j) + layer.bn_shift(0, j);
        if (lc) {
          lc->z_hat = std::move(z_hat);
          lc->inv_std = std::move(inv_std);
        }
      }
    }

    if (lc) lc->act_in = z;

    Matrix act;
    switch (spec.activation) {
      case Activation::kLinear:
        act = std::move(z);
        break;
      case Activation::kTanh:
        act = Matrix(m, out);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < out; ++j) act(i, j) = std::tanh(z(i, j));
        break;
      case Activation::kCRelu:
        act = Matrix(m, 2 * out);
        for (int i = 0; i < m; ++i) {
          const double* zr = z.row(i);
          double* ar = act.row(i);
          for (int j = 0; j < out; ++j) {
            ar[j] = zr[j] > 0.0 ? zr[j] : 0.0;
            ar[out + j] = zr[j] < 0.0 ? -zr[j] : 0.0;
          }
        }
        break;
    }

    if (lc) lc->output = act;
    x = std::move(act);
  }

  if (output_scale != 1.0)
    for (std::size_t k = 0; k < x.size(); ++k) x.data()[k] *= output_scale;
  return x;
}

std::vector<Matrix*> Gradients::flat() {
  std::vector<Matrix*> out;
  for (LayerGrads& g : layers) {
    out.push_back(&g.w);
    out.push_back(&g.b);
    if (!g.bn_scale.empty()) {
      out.push_back(&g.bn_scale);
      out.push_back(&g.bn_shift);
    }
  }
  return out;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& dout) const {
  if (cache.source != this)
    throw CacheError("backward: cache came from a different network");
  if (cache.mode == ForwardMode::kInfer)
    throw CacheError("backward: cache must come from a batch-statistics mode");
  if (cache.layers.size() != layers_.size())
    throw CacheError("backward: cache layer count mismatch");
  if (dout.cols() != output_dim() ||
      dout.rows() != cache.layers.front().input.rows())
    throw ShapeError("backward: output gradient shape mismatch");

  Gradients grads;
  grads.layers.resize(layers_.size());

  const int m = dout.rows();
  Matrix d = dout;
  if (output_scale != 1.0)
    for (std::size_t k = 0; k < d.size(); ++k) d.data()[k] *= output_scale;

  Matrix wt;  // transpose scratch, reused across layers
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const Layer& layer = layers_[li];
    const LayerCache& lc = cache.layers[li];
    const int out = layer.spec.out_dim;
    LayerGrads& lg = grads.layers[li];

    // activation backward: d (m, width) -> dz (m, out)
    Matrix dz(m, out);
    switch (layer.spec.activation) {
      case Activation::kLinear:
        dz = std::move(d);
        break;
      case Activation::kTanh:
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < out; ++j) {
            const double t = lc.output(i, j);
            dz(i, j) = d(i, j) * (1.0 - t * t);
          }
        break;
      case Activation::kCRelu:
        for (int i = 0; i < m; ++i) {
          const double* ai = lc.act_in.row(i);
          const double* di = d.row(i);
          double* dzi = dz.row(i);
          for (int j = 0; j < out; ++j) {
            double g = 0.0;
            if (ai[j] > 0.0) g += di[j];
            if (ai[j] < 0.0) g -= di[out + j];
            dzi[j] = g;
          }
        }
        break;
    }

    if (layer.spec.batch_norm) {
      // d(scale), d(shift), then the compact batch-norm input gradient:
      // dz_i = s/m * (m*dxh_i - sum_k dxh_k - xh_i * sum_k dxh_k xh_k)
      lg.bn_scale = Matrix(1, out);
      lg.bn_shift = Matrix(1, out);
      Matrix dxh(m, out);
      for (int j = 0; j < out; ++j) {
        double dscale = 0.0, dshift = 0.0;
        for (int i = 0; i < m; ++i) {
          dscale += dz(i, j) * lc.z_hat(i, j);
          dshift += dz(i, j);
        }
        lg.bn_scale(0, j) = dscale;
        lg.bn_shift(0, j) = dshift;
      }
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < out; ++j)
          dxh(i, j) = dz(i, j) * layer.bn_scale(0, j);
      for (int j = 0; j < out; ++j) {
        double sum_d = 0.0, sum_dx = 0.0;
        for (int i = 0; i < m; ++i) {
          sum_d += dxh(i, j);
          sum_dx += dxh(i, j) * lc.z_hat(i, j);
        }
        const double s_over_m = lc.inv_std(0, j) / m;
        for (int i = 0; i < m; ++i)
          dz(i, j) = s_over_m *
                     (m * dxh(i, j) - sum_d - lc.z_hat(i, j) * sum_dx);
      }
    }

    // affine backward
    lg.w = Matrix(layer.w.rows(), layer.w.cols());
    kernels::gemm_tn(lc.input, dz, lg.w);
    lg.b = Matrix(1, out);
    for (int j = 0; j < out; ++j) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += dz(i, j);
      lg.b(0, j) = s;
    }

    Matrix dx;
    backprop_input(dz, layer.w, wt, dx);

    if (li == aux_layer_) {
      const int prev = dx.cols() - aux_dim_;
      grads.aux = Matrix(m, aux_dim_);
      Matrix trimmed(m, prev);
      for (int i = 0; i < m; ++i) {
        std::memcpy(trimmed.row(i), dx.row(i), sizeof(double) * prev);
        std::memcpy(grads.aux.row(i), dx.row(i) + prev,
                    sizeof(double) * aux_dim_);
      }
      dx = std::move(trimmed);
    }
    d = std::move(dx);
  }

  grads.input = std::move(d);
  return grads;
}

std::vector<Matrix*> Mlp::parameters() {
  std::vector<Matrix*> out;
  for (Layer& layer : layers_) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
    if (layer.spec.batch_norm) {
      out.push_back(&layer.bn_scale);
      out.push_back(&layer.bn_shift);
    }
  }
  return out;
}

std::vector<const Matrix*> Mlp::parameters() const {
  std::vector<const Matrix*> out;
  for (const Layer& layer : layers_) {
    out.push_back(&layer.w);
    out.push_back(&layer.b);
    if (layer.spec.batch_norm) {
      out.push_back(&layer.bn_scale);
      out.push_back(&layer.bn_shift);
    }
  }
  return out;
}

std::vector<Matrix*> Mlp::running_stats() {
  std::vector<Matrix*> out;
  for (Layer& layer : layers_)
    if (layer.spec.batch_norm) {
      out.push_back(&layer.running_mean);
      out.push_back(&layer.running_var);
    }
  return out;
}

std::vector<const Matrix*> Mlp::running_stats() const {
  std::vector<const Matrix*> out;
  for (const Layer& layer : layers_)
    if (layer.spec.batch_norm) {
      out.push_back(&layer.running_mean);
      out.push_back(&layer.running_var);
    }
  return out;
}

void Mlp::save(std::ostream& out) const {
  out << "stableik_mlp 1\n";
  out << "aux " << aux_layer_ << ' ' << aux_dim_ << '\n';
  out << "bn " << format_double(bn_momentum_) << ' '
      << format_double(bn_epsilon_) << '\n';
  out << "output_scale " << format_double(output_scale) << '\n';
  out << "layers " << layers_.size() << '\n';
  std::size_t count = 0;
  for (const Layer& layer : layers_) {
    out << "layer " << layer.spec.in_dim << ' ' << layer.spec.out_dim << ' '
        << activation_name(layer.spec.activation) << ' '
        << (layer.spec.batch_norm ? 1 : 0) << '\n';
    count += layer.w.size() + layer.b.size();
    if (layer.spec.batch_norm)
      count += layer.bn_scale.size() + layer.bn_shift.size() +
               layer.running_mean.size() + layer.running_var.size();
  }
  out << "data " << count << '\n';
  for (const Layer& layer : layers_) {
    write_le_doubles(out, layer.w);
    write_le_doubles(out, layer.b);
    if (layer.spec.batch_norm) {
      write_le_doubles(out, layer.bn_scale);
      write_le_doubles(out, layer.bn_shift);
      write_le_doubles(out, layer.running_mean);
      write_le_doubles(out, layer.running_var);
    }
  }
  if (!out) throw IoError("failed writing network checkpoint");
}

Mlp Mlp::load(std::istream& in) {
  std::string line;

  const auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line))
      throw ParseError("network checkpoint header truncated");
    return line;
  };
  const auto expect_key = [&](const char* key) -> std::istringstream {
    std::istringstream ss(next_line());
    std::string k;
    ss >> k;
    if (k != key)
      throw ParseError(std::string("expected '") + key + "' in checkpoint, got '" +
                       k + "'");
    return ss;
  };

  {
    auto ss = expect_key("stableik_mlp");
    int version = 0;
    ss >> version;
    if (version != 1)
      throw ParseError("unsupported network checkpoint version");
  }
  int aux_layer = -1, aux_dim = 0;
  {
    auto ss = expect_key("aux");
    if (!(ss >> aux_layer >> aux_dim)) throw ParseError("bad aux record");
  }
  std::string momentum_s, epsilon_s, scale_s;
  {
    auto ss = expect_key("bn");
    if (!(ss >> momentum_s >> epsilon_s)) throw ParseError("bad bn record");
  }
  {
    auto ss = expect_key("output_scale");
    if (!(ss >> scale_s)) throw ParseError("bad output_scale record");
  }
  std::size_t layer_count = 0;
  {
    auto ss = expect_key("layers");
    if (!(ss >> layer_count) || layer_count == 0)
      throw ParseError("bad layer count");
  }

  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i < layer_count; ++i) {
    auto ss = expect_key("layer");
    LayerSpec spec;
    std::string act;
    int bn = 0;
    if (!(ss >> spec.in_dim >> spec.out_dim >> act >> bn))
      throw ParseError("bad layer record");
    spec.activation = activation_from_name(act);
    spec.batch_norm = bn != 0;
    specs.push_back(spec);
  }

  std::size_t declared = 0;
  {
    auto ss = expect_key("data");
    if (!(ss >> declared)) throw ParseError("bad data record");
  }

  Mlp net(std::move(specs), aux_layer, aux_dim);
  net.bn_momentum_ = parse_double(momentum_s, "bn momentum");
  net.bn_epsilon_ = parse_double(epsilon_s, "bn epsilon");
  net.output_scale = parse_double(scale_s, "output_scale");

  std::size_t count = 0;
  for (Layer& layer : net.layers_) {
    read_le_doubles(in, layer.w);
    read_le_doubles(in, layer.b);
    count += layer.w.size() + layer.b.size();
    if (layer.spec.batch_norm) {
      read_le_doubles(in, layer.bn_scale);
      read_le_doubles(in, layer.bn_shift);
      read_le_doubles(in, layer.running_mean);
      read_le_doubles(in, layer.running_var);
      count += layer.bn_scale.size() + layer.bn_shift.size() +
               layer.running_mean.size() + layer.running_var.size();
    }
  }
  if (count != declared)
    throw ParseError("checkpoint data count disagrees with layer shapes");
  return net;
}

void AdamState::save(std::ostream& out) const {
  out << "adam 1\n";
  out << "hyper " << format_double(lr) << ' ' << format_double(beta1) << ' '
      << format_double(beta2) << ' ' << format_double(epsilon) << '\n';
  out << "step " << step << '\n';
  out << "blocks " << m.size() << '\n';
  for (std::size_t i = 0; i < m.size(); ++i)
    out << "block " << m[i].rows() << ' ' << m[i].cols() << '\n';
  for (const Matrix& mat : m) write_le_doubles(out, mat);
  for (const Matrix& mat : v) write_le_doubles(out, mat);
  if (!out) throw IoError("failed writing optimizer state");
}

AdamState AdamState::load(std::istream& in) {
  std::string line;
  const auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line))
      throw ParseError("optimizer state truncated");
    return line;
  };
  const auto expect_key = [&](const char* key) -> std::istringstream {
    std::istringstream ss(next_line());
    std::string k;
    ss >> k;
    if (k != key)
      throw ParseError(std::string("expected '") + key +
                       "' in optimizer state, got '" + k + "'");
    return ss;
  };

  AdamState state;
  {
    auto ss = expect_key("adam");
    int version = 0;
    ss >> version;
    if (version != 1) throw ParseError("unsupported optimizer state version");
  }
  {
    auto ss = expect_key("hyper");
    std::string a, b, c, d;
    if (!(ss >> a >> b >> c >> d)) throw ParseError("bad hyper record");
    state.lr = parse_double(a, "lr");
    state.beta1 = parse_double(b, "beta1");
    state.beta2 = parse_double(c, "beta2");
    state.epsilon = parse_double(d, "epsilon");
  }
  {
    auto ss = expect_key("step");
    if (!(ss >> state.step)) throw ParseError("bad step record");
  }
  std::size_t blocks = 0;
  {
    auto ss = expect_key("blocks");
    if (!(ss >> blocks)) throw ParseError("bad block count");
  }
  std::vector<std::pair<int, int>> shapes(blocks);
  for (auto& [r, c] : shapes) {
    auto ss = expect_key("block");
    if (!(ss >> r >> c)) throw ParseError("bad block record");
  }
  state.m.reserve(blocks);
  state.v.reserve(blocks);
  for (const auto& [r, c] : shapes) {
    state.m.emplace_back(r, c);
    read_le_doubles(in, state.m.back());
  }
  for (const auto& [r, c] : shapes) {
    state.v.emplace_back(r, c);
    read_le_doubles(in, state.v.back());
  }
  return state;
}

void adam_update(const std::vector<Matrix*>& params,
                 const std::vector<Matrix*>& grads, AdamState& state) {
  if (params.size() != grads.size())
    throw ShapeError("adam: parameter/gradient list size mismatch");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != params.size())
    throw ShapeError("adam: state was initialized for a different network");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    Matrix& m1 = state.m[k];
    Matrix& m2 = state.v[k];
    if (!p.same_shape(g) || !p.same_shape(m1))
      throw ShapeError("adam: block shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data()[i];
      m1.data()[i] = state.beta1 * m1.data()[i] + (1.0 - state.beta1) * gi;
      m2.data()[i] = state.beta2 * m2.data()[i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m1.data()[i] / bc1;
      const double vhat = m2.data()[i] / bc2;
      p.data()[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace stableik
