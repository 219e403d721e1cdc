/*
 * Copyright 2026 The avel Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "avel/temporal_model.h"

#include <array>
#include <cmath>
#include <random>

namespace avel {
namespace {

constexpr double kLayerNormEps = 1e-5;

bool has_self(AttentionScope s) { return s != AttentionScope::kCross; }
bool has_cross(AttentionScope s) { return s != AttentionScope::kIntra; }

int stream_count(const TemporalEncoderConfig& c) { return c.share_modalities ? 1 : 2; }

// Index into params.streams used by modality stream `s` (0 audio, 1 visual).
int owner(const TemporalEncoderConfig& c, int s) { return c.share_modalities ? 0 : s; }

Matrix col_sum(const Matrix& m) { return m.colwise().sum(); }

// ---------------------------------------------------------------------------
// Layer norm

struct NormCache {
  Matrix normalized;   // (x - mean) / std
  Eigen::VectorXd inv_std;
};

Matrix layer_norm(const Matrix& x, const LayerNormParams& p, NormCache& cache) {
  const auto d = x.cols();
  cache.normalized.resize(x.rows(), d);
  cache.inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = x.row(r).mean();
    double var = (x.row(r).array() - mean).square().mean();
    double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.normalized.row(r) = (x.row(r).array() - mean) * inv;
  }
  Matrix y = cache.normalized.array().rowwise() * p.gain.row(0).array();
  y.rowwise() += p.bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormParams& p, const NormCache& cache,
                           LayerNormParams& grad) {
  const double d = static_cast<double>(dy.cols());
  grad.gain += col_sum(dy.cwiseProduct(cache.normalized));
  grad.bias += col_sum(dy);
  Matrix dxhat = dy.array().rowwise() * p.gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    double sum = dxhat.row(r).sum();
    double dot = dxhat.row(r).dot(cache.normalized.row(r));
    dx.row(r) = (cache.inv_std(r) / d) *
                (d * dxhat.row(r).array() - sum - cache.normalized.row(r).array() * dot);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Multi-head attention

struct AttentionCache {
  Matrix query_in;
  Matrix kv_in;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // one Tq x Tk matrix per head
  Matrix mixed;               // concatenated head outputs
};

Matrix attention(const Matrix& query_in, const Matrix& kv_in, const AttentionParams& p,
                 int heads, AttentionCache& cache) {
  const int d = static_cast<int>(query_in.cols());
  const int head_dim = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  cache.query_in = query_in;
  cache.kv_in = kv_in;
  cache.q = query_in * p.wq;
  cache.q.rowwise() += p.bq.row(0);
  cache.k = kv_in * p.wk;
  cache.k.rowwise() += p.bk.row(0);
  cache.v = kv_in * p.wv;
  cache.v.rowwise() += p.bv.row(0);
  cache.probs.assign(heads, Matrix());
  cache.mixed.resize(query_in.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * head_dim;
    Matrix scores = cache.q.middleCols(c0, head_dim) * cache.k.middleCols(c0, head_dim).transpose();
    scores *= scale;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      double peak = scores.row(r).maxCoeff();
      scores.row(r) = (scores.row(r).array() - peak).exp();
      scores.row(r) /= scores.row(r).sum();
    }
    cache.mixed.middleCols(c0, head_dim) = scores * cache.v.middleCols(c0, head_dim);
    cache.probs[h] = std::move(scores);
  }
  Matrix out = cache.mixed * p.wo;
  out.rowwise() += p.bo.row(0);
  return out;
}

// Returns (d query_in, d kv_in).
std::pair<Matrix, Matrix> attention_backward(const Matrix& dout, const AttentionParams& p,
                                             int heads, const AttentionCache& cache,
                                             AttentionParams& grad) {
  const int d = static_cast<int>(dout.cols());
  const int head_dim = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  grad.wo += cache.mixed.transpose() * dout;
  grad.bo += col_sum(dout);
  Matrix dmixed = dout * p.wo.transpose();

  Matrix dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * head_dim;
    const Matrix& probs = cache.probs[h];
    auto dmix_h = dmixed.middleCols(c0, head_dim);
    Matrix dprobs = dmix_h * cache.v.middleCols(c0, head_dim).transpose();
    dv.middleCols(c0, head_dim) = probs.transpose() * dmix_h;
    Matrix dscores(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      double inner = probs.row(r).dot(dprobs.row(r));
      dscores.row(r) = probs.row(r).array() * (dprobs.row(r).array() - inner);
    }
    dscores *= scale;
    dq.middleCols(c0, head_dim) = dscores * cache.k.middleCols(c0, head_dim);
    dk.middleCols(c0, head_dim) = dscores.transpose() * cache.q.middleCols(c0, head_dim);
  }
  grad.wq += cache.query_in.transpose() * dq;
  grad.bq += col_sum(dq);
  grad.wk += cache.kv_in.transpose() * dk;
  grad.bk += col_sum(dk);
  grad.wv += cache.kv_in.transpose() * dv;
  grad.bv += col_sum(dv);
  Matrix dquery = dq * p.wq.transpose();
  Matrix dkv = dk * p.wk.transpose() + dv * p.wv.transpose();
  return {std::move(dquery), std::move(dkv)};
}

// ---------------------------------------------------------------------------
// Feed-forward with exact GELU

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

struct FeedForwardCache {
  Matrix input;
  Matrix hidden_pre;
  Matrix hidden;
};

Matrix feed_forward(const Matrix& x, const FeedForwardParams& p, FeedForwardCache& cache) {
  cache.input = x;
  cache.hidden_pre = x * p.w1;
  cache.hidden_pre.rowwise() += p.b1.row(0);
  cache.hidden = cache.hidden_pre.unaryExpr(&gelu);
  Matrix out = cache.hidden * p.w2;
  out.rowwise() += p.b2.row(0);
  return out;
}

Matrix feed_forward_backward(const Matrix& dout, const FeedForwardParams& p,
                             const FeedForwardCache& cache, FeedForwardParams& grad) {
  grad.w2 += cache.hidden.transpose() * dout;
  grad.b2 += col_sum(dout);
  Matrix dhidden = dout * p.w2.transpose();
  Matrix dpre = dhidden.cwiseProduct(cache.hidden_pre.unaryExpr(&gelu_grad));
  grad.w1 += cache.input.transpose() * dpre;
  grad.b1 += col_sum(dpre);
  return dpre * p.w1.transpose();
}

// ---------------------------------------------------------------------------
// Parameter shapes and naming

LayerNormParams make_norm(int d) { return {Matrix::Ones(1, d), Matrix::Zero(1, d)}; }

AttentionParams make_attention(int d) {
  AttentionParams p;
  for (Matrix* w : {&p.wq, &p.wk, &p.wv, &p.wo}) *w = Matrix::Zero(d, d);
  for (Matrix* b : {&p.bq, &p.bk, &p.bv, &p.bo}) *b = Matrix::Zero(1, d);
  return p;
}

BlockParams make_block(const TemporalEncoderConfig& c) {
  BlockParams b;
  if (has_self(c.attention_scope)) {
    b.self_norm = make_norm(c.width);
    b.self_attention = make_attention(c.width);
  }
  if (has_cross(c.attention_scope)) {
    b.cross_norm = make_norm(c.width);
    b.cross_attention = make_attention(c.width);
  }
  b.ffn_norm = make_norm(c.width);
  b.ffn.w1 = Matrix::Zero(c.width, c.ffn_dim);
  b.ffn.b1 = Matrix::Zero(1, c.ffn_dim);
  b.ffn.w2 = Matrix::Zero(c.ffn_dim, c.width);
  b.ffn.b2 = Matrix::Zero(1, c.width);
  return b;
}

std::string stream_prefix(const TemporalEncoderConfig& c, int s) {
  if (c.share_modalities) return "shared";
  return s == 0 ? "audio" : "visual";
}

template <typename Params, typename Tensor>
std::vector<Tensor> collect_tensors(Params& params, const TemporalEncoderConfig& c) {
  std::vector<Tensor> out;
  auto add = [&](std::string name, auto& m, int rank) { out.push_back({std::move(name), &m, rank}); };
  auto add_norm = [&](const std::string& prefix, auto& n) {
    add(prefix + ".gain", n.gain, 1);
    add(prefix + ".bias", n.bias, 1);
  };
  auto add_attention = [&](const std::string& prefix, auto& a) {
    add(prefix + ".wq", a.wq, 2);
    add(prefix + ".bq", a.bq, 1);
    add(prefix + ".wk", a.wk, 2);
    add(prefix + ".bk", a.bk, 1);
    add(prefix + ".wv", a.wv, 2);
    add(prefix + ".bv", a.bv, 1);
    add(prefix + ".wo", a.wo, 2);
    add(prefix + ".bo", a.bo, 1);
  };
  for (int s = 0; s < static_cast<int>(params.streams.size()); ++s) {
    auto& stream = params.streams[s];
    const std::string prefix = stream_prefix(c, s);
    if (c.variant == EncoderVariant::kLinear) {
      for (std::size_t l = 0; l < stream.linear.size(); ++l) {
        const std::string p = prefix + ".linear" + std::to_string(l);
        add(p + ".weight", stream.linear[l].weight, 2);
        add(p + ".bias", stream.linear[l].bias, 1);
      }
      continue;
    }
    for (std::size_t b = 0; b < stream.blocks.size(); ++b) {
      auto& block = stream.blocks[b];
      const std::string p = prefix + ".block" + std::to_string(b);
      if (has_self(c.attention_scope)) {
        add_norm(p + ".self_norm", block.self_norm);
        add_attention(p + ".self_attention", block.self_attention);
      }
      if (has_cross(c.attention_scope)) {
        add_norm(p + ".cross_norm", block.cross_norm);
        add_attention(p + ".cross_attention", block.cross_attention);
      }
      add_norm(p + ".ffn_norm", block.ffn_norm);
      add(p + ".ffn.w1", block.ffn.w1, 2);
      add(p + ".ffn.b1", block.ffn.b1, 1);
      add(p + ".ffn.w2", block.ffn.w2, 2);
      add(p + ".ffn.b2", block.ffn.b2, 1);
    }
  }
  return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void TemporalEncoderConfig::validate() const {
  if (blocks < 1) throw Error("encoder needs at least one block");
  if (width < 1) throw Error("encoder width must be positive");
  if (heads < 1 || width % heads != 0) {
    throw Error("encoder width " + std::to_string(width) + " is not divisible by " +
                std::to_string(heads) + " heads");
  }
  if (ffn_dim < 1) throw Error("feed-forward width must be positive");
}

std::string to_string(EncoderVariant v) {
  return v == EncoderVariant::kTemporal ? "temporal" : "linear";
}

std::string to_string(AttentionScope s) {
  switch (s) {
    case AttentionScope::kIntra:
      return "intra";
    case AttentionScope::kCross:
      return "cross";
    case AttentionScope::kBoth:
      return "both";
  }
  return "intra";
}

EncoderVariant parse_variant(std::string_view text) {
  if (text == "temporal") return EncoderVariant::kTemporal;
  if (text == "linear") return EncoderVariant::kLinear;
  throw Error("unknown encoder variant '" + std::string(text) + "'");
}

AttentionScope parse_attention_scope(std::string_view text) {
  if (text == "intra") return AttentionScope::kIntra;
  if (text == "cross") return AttentionScope::kCross;
  if (text == "both") return AttentionScope::kBoth;
  throw Error("unknown attention scope '" + std::string(text) + "'");
}

std::vector<NamedTensor> named_tensors(TemporalEncoderParams& params,
                                       const TemporalEncoderConfig& config) {
  return collect_tensors<TemporalEncoderParams, NamedTensor>(params, config);
}

std::vector<ConstNamedTensor> named_tensors(const TemporalEncoderParams& params,
                                            const TemporalEncoderConfig& config) {
  return collect_tensors<const TemporalEncoderParams, ConstNamedTensor>(params, config);
}

TemporalEncoderParams zero_params(const TemporalEncoderConfig& config) {
  config.validate();
  TemporalEncoderParams params;
  params.streams.resize(stream_count(config));
  for (auto& stream : params.streams) {
    for (int l = 0; l < config.blocks; ++l) {
      if (config.variant == EncoderVariant::kLinear) {
        stream.linear.push_back({Matrix::Zero(config.width, config.width),
                                 Matrix::Zero(1, config.width)});
      } else {
        stream.blocks.push_back(make_block(config));
      }
    }
  }
  for (auto& t : named_tensors(params, config)) t.tensor->setZero();
  return params;
}

TemporalEncoderParams init_params(const TemporalEncoderConfig& config, std::uint64_t seed,
                                  InitScheme scheme) {
  TemporalEncoderParams params = zero_params(config);
  std::mt19937_64 rng(seed);
  for (auto& t : named_tensors(params, config)) {
    Matrix& m = *t.tensor;
    if (ends_with(t.name, ".gain")) {
      m.setOnes();
      continue;
    }
    if (t.rank == 1) continue;  // biases start at zero
    if (scheme == InitScheme::kResidualZero) {
      if (config.variant == EncoderVariant::kLinear) {
        m.setIdentity();
        continue;
      }
      if (ends_with(t.name, ".wo") || ends_with(t.name, ".ffn.w2")) continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  }
  return params;
}

std::int64_t param_count(const TemporalEncoderConfig& config) {
  config.validate();
  const std::int64_t d = config.width;
  const std::int64_t f = config.ffn_dim;
  std::int64_t per_layer = 0;
  if (config.variant == EncoderVariant::kLinear) {
    per_layer = d * d + d;
  } else {
    std::int64_t attention_sublayers =
        (has_self(config.attention_scope) ? 1 : 0) + (has_cross(config.attention_scope) ? 1 : 0);
    per_layer = attention_sublayers * (4 * (d * d + d) + 2 * d)  // projections + norm
                + (d * f + f) + (f * d + d) + 2 * d;            // FFN + norm
  }
  return per_layer * config.blocks * stream_count(config);
}

void validate_params(const TemporalEncoderParams& params, const TemporalEncoderConfig& config) {
  config.validate();
  TemporalEncoderParams reference = zero_params(config);
  if (params.streams.size() != reference.streams.size()) {
    throw ShapeError("parameter set has the wrong number of modality streams");
  }
  for (std::size_t s = 0; s < params.streams.size(); ++s) {
    if (params.streams[s].blocks.size() != reference.streams[s].blocks.size() ||
        params.streams[s].linear.size() != reference.streams[s].linear.size()) {
      throw ShapeError("parameter set has the wrong number of layers");
    }
  }
  auto expected = named_tensors(static_cast<const TemporalEncoderParams&>(reference), config);
  auto actual = named_tensors(params, config);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const Matrix& a = *actual[i].tensor;
    const Matrix& e = *expected[i].tensor;
    if (a.rows() != e.rows() || a.cols() != e.cols()) {
      throw ShapeError("tensor " + actual[i].name + " has shape " + std::to_string(a.rows()) +
                       "x" + std::to_string(a.cols()) + ", expected " +
                       std::to_string(e.rows()) + "x" + std::to_string(e.cols()));
    }
    if (!a.allFinite()) throw ShapeError("tensor " + actual[i].name + " is not finite");
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

struct BlockActivations {
  std::array<NormCache, 2> self_norm, cross_norm, ffn_norm;
  std::array<AttentionCache, 2> self_attention, cross_attention;
  std::array<FeedForwardCache, 2> ffn;
};

struct EncoderTape::Activations {
  std::vector<std::array<Matrix, 2>> layer_inputs;  // linear variant
  std::vector<BlockActivations> blocks;             // temporal variant
};

EncoderTape::EncoderTape(const TemporalEncoderParams& params,
                         const TemporalEncoderConfig& config, const Matrix& audio,
                         const Matrix& visual)
    : params_(&params), config_(&config), activations_(std::make_unique<Activations>()) {
  if (audio.cols() != config.width || visual.cols() != config.width) {
    throw ShapeError("encoder expects width " + std::to_string(config.width) + ", got " +
                     std::to_string(audio.cols()) + " and " + std::to_string(visual.cols()));
  }
  if (audio.rows() != visual.rows() || audio.rows() < 1) {
    throw ShapeError("audio and visual streams must have the same positive segment count");
  }
  validate_params(params, config);

  std::array<Matrix, 2> x = {audio, visual};
  if (config.variant == EncoderVariant::kLinear) {
    for (int l = 0; l < config.blocks; ++l) {
      activations_->layer_inputs.push_back(x);
      for (int s = 0; s < 2; ++s) {
        const AffineParams& p = params.streams[owner(config, s)].linear[l];
        Matrix y = x[s] * p.weight;
        y.rowwise() += p.bias.row(0);
        x[s] = std::move(y);
      }
    }
  } else {
    for (int b = 0; b < config.blocks; ++b) {
      BlockActivations& act = activations_->blocks.emplace_back();
      auto block = [&](int s) -> const BlockParams& {
        return params.streams[owner(config, s)].blocks[b];
      };
      if (has_self(config.attention_scope)) {
        for (int s = 0; s < 2; ++s) {
          Matrix normed = layer_norm(x[s], block(s).self_norm, act.self_norm[s]);
          x[s] += attention(normed, normed, block(s).self_attention, config.heads,
                            act.self_attention[s]);
        }
      }
      if (has_cross(config.attention_scope)) {
        std::array<Matrix, 2> normed;
        for (int s = 0; s < 2; ++s) {
          normed[s] = layer_norm(x[s], block(s).cross_norm, act.cross_norm[s]);
        }
        std::array<Matrix, 2> mixed;
        for (int s = 0; s < 2; ++s) {
          mixed[s] = attention(normed[s], normed[1 - s], block(s).cross_attention, config.heads,
                               act.cross_attention[s]);
        }
        for (int s = 0; s < 2; ++s) x[s] += mixed[s];
      }
      for (int s = 0; s < 2; ++s) {
        Matrix normed = layer_norm(x[s], block(s).ffn_norm, act.ffn_norm[s]);
        x[s] += feed_forward(normed, block(s).ffn, act.ffn[s]);
      }
    }
  }
  output_.audio = std::move(x[0]);
  output_.visual = std::move(x[1]);
}

EncoderTape::~EncoderTape() = default;
EncoderTape::EncoderTape(EncoderTape&&) noexcept = default;
EncoderTape& EncoderTape::operator=(EncoderTape&&) noexcept = default;

std::pair<Matrix, Matrix> EncoderTape::backward(const Matrix& grad_audio_out,
                                                const Matrix& grad_visual_out,
                                                TemporalEncoderParams& grads) const {
  const TemporalEncoderConfig& config = *config_;
  const TemporalEncoderParams& params = *params_;
  if (grad_audio_out.rows() != output_.audio.rows() ||
      grad_audio_out.cols() != output_.audio.cols() ||
      grad_visual_out.rows() != output_.visual.rows() ||
      grad_visual_out.cols() != output_.visual.cols()) {
    throw ShapeError("upstream gradient shape does not match the encoder output");
  }
  std::array<Matrix, 2> dx = {grad_audio_out, grad_visual_out};

  if (config.variant == EncoderVariant::kLinear) {
    for (int l = config.blocks - 1; l >= 0; --l) {
      for (int s = 0; s < 2; ++s) {
        const AffineParams& p = params.streams[owner(config, s)].linear[l];
        AffineParams& g = grads.streams[owner(config, s)].linear[l];
        const Matrix& input = activations_->layer_inputs[l][s];
        g.weight += input.transpose() * dx[s];
        g.bias += col_sum(dx[s]);
        dx[s] = dx[s] * p.weight.transpose();
      }
    }
    return {std::move(dx[0]), std::move(dx[1])};
  }

  for (int b = config.blocks - 1; b >= 0; --b) {
    const BlockActivations& act = activations_->blocks[b];
    auto block = [&](int s) -> const BlockParams& {
      return params.streams[owner(config, s)].blocks[b];
    };
    auto grad = [&](int s) -> BlockParams& { return grads.streams[owner(config, s)].blocks[b]; };

    for (int s = 0; s < 2; ++s) {
      Matrix dnormed = feed_forward_backward(dx[s], block(s).ffn, act.ffn[s], grad(s).ffn);
      dx[s] += layer_norm_backward(dnormed, block(s).ffn_norm, act.ffn_norm[s], grad(s).ffn_norm);
    }
    if (has_cross(config.attention_scope)) {
      std::array<Matrix, 2> dnormed = {Matrix::Zero(dx[0].rows(), dx[0].cols()),
                                       Matrix::Zero(dx[1].rows(), dx[1].cols())};
      for (int s = 0; s < 2; ++s) {
        auto [dquery, dkv] = attention_backward(dx[s], block(s).cross_attention, config.heads,
                                                act.cross_attention[s], grad(s).cross_attention);
        dnormed[s] += dquery;
        dnormed[1 - s] += dkv;
      }
      for (int s = 0; s < 2; ++s) {
        dx[s] += layer_norm_backward(dnormed[s], block(s).cross_norm, act.cross_norm[s],
                                     grad(s).cross_norm);
      }
    }
    if (has_self(config.attention_scope)) {
      for (int s = 0; s < 2; ++s) {
        auto [dquery, dkv] = attention_backward(dx[s], block(s).self_attention, config.heads,
                                                act.self_attention[s], grad(s).self_attention);
        dx[s] += layer_norm_backward(dquery + dkv, block(s).self_norm, act.self_norm[s],
                                     grad(s).self_norm);
      }
    }
  }
  return {std::move(dx[0]), std::move(dx[1])};
}

EncoderOutput forward(const TemporalEncoderParams& params, const TemporalEncoderConfig& config,
                      const Matrix& audio, const Matrix& visual) {
  EncoderTape tape(params, config, audio, visual);
  return tape.output();
}

EncoderGradients backward(const TemporalEncoderParams& params,
                          const TemporalEncoderConfig& config, const Matrix& audio,
                          const Matrix& visual, const Matrix& grad_audio_out,
                          const Matrix& grad_visual_out) {
  EncoderTape tape(params, config, audio, visual);
  EncoderGradients out;
  out.params = zero_params(config);
  auto [da, dv] = tape.backward(grad_audio_out, grad_visual_out, out.params);
  out.audio = std::move(da);
  out.visual = std::move(dv);
  return out;
}

}  // namespace avel
