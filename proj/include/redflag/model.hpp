/* Copyright 2026 The redflag authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "redflag/batcher.hpp"
#include "redflag/common.hpp"
#include "redflag/corpus.hpp"
#include "redflag/linalg.hpp"
#include "redflag/params.hpp"

namespace redflag {

/// Transformer encoder geometry. The defaults are the desk-scale encoder;
/// the full-scale 12/768/12 setup is expressible through the same fields.
struct EncoderConfig {
  int num_layers = 2;
  int hidden_dim = 64;
  int num_heads = 2;
  int ff_dim = 128;
  int vocab_size = 0;
  int max_positions = 224;
  double dropout_p = 0.1;  // post-attention and post-FF sites
  bool use_pooler = true;  // linear+tanh transform of the CLS state

  void validate() const {
    if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || ff_dim < 1)
      throw ConfigError("encoder dimensions must be positive");
    if (hidden_dim % num_heads != 0)
      throw ConfigError("hidden_dim (" + std::to_string(hidden_dim) +
                        ") must be divisible by num_heads (" + std::to_string(num_heads) + ")");
    if (vocab_size < 3) throw ConfigError("vocab_size must cover the special tokens");
    if (max_positions < 2) throw ConfigError("max_positions must be at least 2");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
      throw ConfigError("dropout_p must lie in [0, 1)");
  }
};

/// Fully-connected stack on top of the pooled representation, ReLU between
/// layers, followed by the task-specific output layer.
struct HeadSpec {
  std::vector<int> hidden_sizes;
  int output_dim = 0;
  TaskKind kind = TaskKind::classification;
  double dropout_p = 0.5;  // after each hidden ReLU

  /// Two hidden layers of encoder width, output sized for the task.
  static HeadSpec for_task(const TaskSpec& task, int hidden_dim) {
    HeadSpec head;
    head.hidden_sizes = {hidden_dim, hidden_dim};
    head.kind = task.kind;
    head.output_dim = task.kind == TaskKind::regression ? 1 : task.num_classes();
    return head;
  }

  void validate() const {
    for (const int size : hidden_sizes)
      if (size < 1) throw ConfigError("head hidden sizes must be positive");
    if (kind == TaskKind::regression) {
      if (output_dim != 1) throw ConfigError("regression head must have output_dim 1");
    } else if (output_dim < 2) {
      throw ConfigError("classification/multilabel head needs output_dim >= 2");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0))
      throw ConfigError("head dropout_p must lie in [0, 1)");
  }
};

enum class InitScheme { xavier_uniform, embedding_normal, ones, zeros };

struct TensorSpec {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  InitScheme init = InitScheme::zeros;
};

/// Single source of truth for tensor names and shapes; the initializer and
/// the checkpoint loader both walk this layout.
inline std::vector<TensorSpec> parameter_layout(const EncoderConfig& cfg, const HeadSpec& head) {
  cfg.validate();
  head.validate();
  const Eigen::Index h = cfg.hidden_dim;
  const Eigen::Index f = cfg.ff_dim;

  std::vector<TensorSpec> layout;
  layout.push_back({"embed.token", cfg.vocab_size, h, InitScheme::embedding_normal});
  layout.push_back({"embed.position", cfg.max_positions, h, InitScheme::embedding_normal});
  layout.push_back({"embed.ln.gain", 1, h, InitScheme::ones});
  layout.push_back({"embed.ln.bias", 1, h, InitScheme::zeros});
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    for (const char* gate : {"wq", "wk", "wv", "wo"})
      layout.push_back({p + "attn." + gate, h, h, InitScheme::xavier_uniform});
    for (const char* gate : {"bq", "bk", "bv", "bo"})
      layout.push_back({p + "attn." + gate, 1, h, InitScheme::zeros});
    layout.push_back({p + "ln1.gain", 1, h, InitScheme::ones});
    layout.push_back({p + "ln1.bias", 1, h, InitScheme::zeros});
    layout.push_back({p + "ff.w1", h, f, InitScheme::xavier_uniform});
    layout.push_back({p + "ff.b1", 1, f, InitScheme::zeros});
    layout.push_back({p + "ff.w2", f, h, InitScheme::xavier_uniform});
    layout.push_back({p + "ff.b2", 1, h, InitScheme::zeros});
    layout.push_back({p + "ln2.gain", 1, h, InitScheme::ones});
    layout.push_back({p + "ln2.bias", 1, h, InitScheme::zeros});
  }
  if (cfg.use_pooler) {
    layout.push_back({"pooler.w", h, h, InitScheme::xavier_uniform});
    layout.push_back({"pooler.b", 1, h, InitScheme::zeros});
  }
  Eigen::Index in_dim = h;
  for (std::size_t k = 0; k < head.hidden_sizes.size(); ++k) {
    const std::string p = "head.fc" + std::to_string(k) + ".";
    const Eigen::Index out_dim = head.hidden_sizes[k];
    layout.push_back({p + "w", in_dim, out_dim, InitScheme::xavier_uniform});
    layout.push_back({p + "b", 1, out_dim, InitScheme::zeros});
    in_dim = out_dim;
  }
  layout.push_back({"head.out.w", in_dim, head.output_dim, InitScheme::xavier_uniform});
  layout.push_back({"head.out.b", 1, head.output_dim, InitScheme::zeros});
  return layout;
}

template <typename Scalar>
struct TaskModel {
  EncoderConfig config;
  HeadSpec head;
  TaskSpec task;
  ParamStore<Scalar> params;
};

/// Deterministic initialization: weight matrices are Xavier-uniform
/// (limit sqrt(6 / (fan_in + fan_out))), embeddings are N(0, 0.02), layer
/// norm gains one, every bias zero.
template <typename Scalar>
TaskModel<Scalar> init_task_model(const EncoderConfig& cfg, const HeadSpec& head,
                                  const TaskSpec& task, std::uint64_t seed) {
  if (head.kind != task.kind) throw ConfigError("head kind does not match task kind");
  const int expected = task.kind == TaskKind::regression ? 1 : task.num_classes();
  if (head.output_dim != expected)
    throw ConfigError("head output_dim " + std::to_string(head.output_dim) +
                      " does not match task '" + task.name + "'");

  TaskModel<Scalar> model;
  model.config = cfg;
  model.head = head;
  model.task = task;

  SplitMix64 rng(seed);
  for (const TensorSpec& spec : parameter_layout(cfg, head)) {
    MatX<Scalar>& tensor = model.params.add(spec.name, spec.rows, spec.cols);
    switch (spec.init) {
      case InitScheme::xavier_uniform: {
        const double limit = std::sqrt(6.0 / static_cast<double>(spec.rows + spec.cols));
        for (Eigen::Index i = 0; i < tensor.size(); ++i)
          tensor.data()[i] = static_cast<Scalar>((2.0 * rng.next_double() - 1.0) * limit);
        break;
      }
      case InitScheme::embedding_normal:
        for (Eigen::Index i = 0; i < tensor.size(); ++i)
          tensor.data()[i] = static_cast<Scalar>(0.02 * rng.next_normal());
        break;
      case InitScheme::ones:
        tensor.setOnes();
        break;
      case InitScheme::zeros:
        break;
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// forward traces
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LayerTrace {
  MatX<Scalar> x_in;
  MatX<Scalar> q, k, v;
  std::vector<MatX<Scalar>> attn;  // per head, rows softmaxed
  MatX<Scalar> attn_concat;
  MatX<Scalar> attn_drop_mask;
  MatX<Scalar> ln1_xhat;
  VecX<Scalar> ln1_inv;
  MatX<Scalar> x_mid;
  MatX<Scalar> ff_pre;
  MatX<Scalar> ff_drop_mask;
  MatX<Scalar> ln2_xhat;
  VecX<Scalar> ln2_inv;
};

template <typename Scalar>
struct SeqTrace {
  std::vector<int> ids;
  MatX<Scalar> emb_ln_xhat;
  VecX<Scalar> emb_ln_inv;
  std::vector<LayerTrace<Scalar>> layers;
};

template <typename Scalar>
struct HeadTrace {
  std::vector<MatX<Scalar>> inputs;      // inputs[k] feeds fc k; back() feeds the output layer
  std::vector<MatX<Scalar>> pre;         // pre-ReLU activations per hidden layer
  std::vector<MatX<Scalar>> drop_masks;  // empty matrices when dropout is off
};

template <typename Scalar>
struct ModelTrace {
  std::vector<SeqTrace<Scalar>> seqs;
  MatX<Scalar> cls;     // B x H, final hidden state at position 0
  MatX<Scalar> pooled;  // B x H, after the pooling transform
  HeadTrace<Scalar> head;
  MatX<Scalar> scores;  // B x D, activated
};

template <typename Scalar>
struct EncoderOut {
  std::vector<MatX<Scalar>> hidden;  // per row: T x H, zero rows on padding
  MatX<Scalar> pooled;               // B x H
};

namespace detail {

constexpr double kLn2 = 0.6931471805599453;
constexpr double kLayerNormEps = 1e-5;

/// Inverted dropout; mask entries are 0 or 1/(1-p), drawn in storage order.
template <typename Scalar>
void apply_dropout(MatX<Scalar>& x, double p, SplitMix64& rng, MatX<Scalar>& mask_out) {
  mask_out.resize(x.rows(), x.cols());
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < mask_out.size(); ++i)
    mask_out.data()[i] = rng.next_double() >= p ? keep : Scalar(0);
  x = x.cwiseProduct(mask_out);
}

template <typename Scalar>
MatX<Scalar> layer_norm(const MatX<Scalar>& x, const MatX<Scalar>& gain, const MatX<Scalar>& bias,
                        MatX<Scalar>& xhat_out, VecX<Scalar>& inv_out) {
  const Eigen::Index h = x.cols();
  xhat_out.resize(x.rows(), h);
  inv_out.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const RowX<Scalar> centered = (x.row(r).array() - mean).matrix();
    const Scalar var = centered.squaredNorm() / static_cast<Scalar>(h);
    inv_out(r) = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kLayerNormEps));
    xhat_out.row(r) = centered * inv_out(r);
  }
  MatX<Scalar> out = xhat_out * gain.row(0).asDiagonal();
  out.rowwise() += bias.row(0);
  return out;
}

template <typename Scalar>
MatX<Scalar> layer_norm_backward(const MatX<Scalar>& dy, const MatX<Scalar>& xhat,
                                 const VecX<Scalar>& inv, const MatX<Scalar>& gain,
                                 MatX<Scalar>& dgain, MatX<Scalar>& dbias) {
  dgain.row(0) += dy.cwiseProduct(xhat).colwise().sum();
  dbias.row(0) += dy.colwise().sum();
  const MatX<Scalar> dxhat = dy * gain.row(0).asDiagonal();
  MatX<Scalar> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Scalar m1 = dxhat.row(r).mean();
    const Scalar m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
    dx.row(r) = ((dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv(r)).matrix();
  }
  return dx;
}

/// Per-row softmax Jacobian-vector product: ds = a .* (da - <da, a>).
template <typename Scalar>
MatX<Scalar> softmax_backward_rows(const MatX<Scalar>& softmaxed, const MatX<Scalar>& dsoft) {
  MatX<Scalar> ds(softmaxed.rows(), softmaxed.cols());
  for (Eigen::Index r = 0; r < softmaxed.rows(); ++r) {
    const Scalar dot = dsoft.row(r).dot(softmaxed.row(r));
    ds.row(r) = softmaxed.row(r).cwiseProduct((dsoft.row(r).array() - dot).matrix());
  }
  return ds;
}

}  // namespace detail

/// Runs the encoder over every row of the batch. Padded positions are sliced
/// away before attention, so they cannot influence real positions; the
/// returned hidden states carry zero rows where the mask is zero.
template <typename Scalar>
EncoderOut<Scalar> encoder_forward(const TaskModel<Scalar>& model, const Batch& batch,
                                   bool train_mode, std::uint64_t dropout_seed,
                                   ModelTrace<Scalar>* trace = nullptr) {
  const EncoderConfig& cfg = model.config;
  const ParamStore<Scalar>& params = model.params;
  const Eigen::Index batch_size = batch.rows();
  const Eigen::Index h = cfg.hidden_dim;
  const int heads = cfg.num_heads;
  const Eigen::Index head_dim = h / heads;
  const Scalar attn_scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));
  const bool drop = train_mode && cfg.dropout_p > 0.0;

  if (batch.cols() > cfg.max_positions)
    throw DataError("sequence length " + std::to_string(batch.cols()) +
                    " exceeds max_positions " + std::to_string(cfg.max_positions));

  const MatX<Scalar>& tok = params.at("embed.token");
  const MatX<Scalar>& pos = params.at("embed.position");

  SplitMix64 rng(dropout_seed);
  EncoderOut<Scalar> out;
  out.hidden.reserve(static_cast<std::size_t>(batch_size));
  out.pooled.resize(batch_size, h);
  if (trace) trace->seqs.resize(static_cast<std::size_t>(batch_size));

  for (Eigen::Index b = 0; b < batch_size; ++b) {
    const auto len = static_cast<Eigen::Index>(batch.lengths[static_cast<std::size_t>(b)]);
    if (len < 1 || len > batch.cols()) throw DataError("invalid sequence length in batch");

    SeqTrace<Scalar> local;
    SeqTrace<Scalar>& st = trace ? trace->seqs[static_cast<std::size_t>(b)] : local;
    st.ids.resize(static_cast<std::size_t>(len));

    MatX<Scalar> embedded(len, h);
    for (Eigen::Index t = 0; t < len; ++t) {
      const int id = batch.ids(b, t);
      if (id < 0 || id >= cfg.vocab_size)
        throw DataError("token id " + std::to_string(id) + " out of range [0, " +
                        std::to_string(cfg.vocab_size) + ")");
      st.ids[static_cast<std::size_t>(t)] = id;
      embedded.row(t) = tok.row(id) + pos.row(t);
    }

    MatX<Scalar> x = detail::layer_norm(embedded, params.at("embed.ln.gain"),
                                        params.at("embed.ln.bias"), st.emb_ln_xhat,
                                        st.emb_ln_inv);

    st.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    for (int l = 0; l < cfg.num_layers; ++l) {
      const std::string p = "layers." + std::to_string(l) + ".";
      LayerTrace<Scalar>& lt = st.layers[static_cast<std::size_t>(l)];
      lt.x_in = x;

      lt.q = x * params.at(p + "attn.wq");
      lt.q.rowwise() += params.at(p + "attn.bq").row(0);
      lt.k = x * params.at(p + "attn.wk");
      lt.k.rowwise() += params.at(p + "attn.bk").row(0);
      lt.v = x * params.at(p + "attn.wv");
      lt.v.rowwise() += params.at(p + "attn.bv").row(0);

      lt.attn.resize(static_cast<std::size_t>(heads));
      lt.attn_concat.resize(len, h);
      for (int head = 0; head < heads; ++head) {
        const Eigen::Index offset = head * head_dim;
        const auto qh = lt.q.middleCols(offset, head_dim);
        const auto kh = lt.k.middleCols(offset, head_dim);
        const auto vh = lt.v.middleCols(offset, head_dim);
        const MatX<Scalar> logits = qh * kh.transpose() * attn_scale;
        lt.attn[static_cast<std::size_t>(head)] = softmax_rows(logits);
        lt.attn_concat.middleCols(offset, head_dim) =
            lt.attn[static_cast<std::size_t>(head)] * vh;
      }

      MatX<Scalar> attn_out = lt.attn_concat * params.at(p + "attn.wo");
      attn_out.rowwise() += params.at(p + "attn.bo").row(0);
      if (drop) detail::apply_dropout(attn_out, cfg.dropout_p, rng, lt.attn_drop_mask);

      lt.x_mid = detail::layer_norm<Scalar>(lt.x_in + attn_out, params.at(p + "ln1.gain"),
                                            params.at(p + "ln1.bias"), lt.ln1_xhat, lt.ln1_inv);

      lt.ff_pre = lt.x_mid * params.at(p + "ff.w1");
      lt.ff_pre.rowwise() += params.at(p + "ff.b1").row(0);
      MatX<Scalar> ff_out = relu(lt.ff_pre) * params.at(p + "ff.w2");
      ff_out.rowwise() += params.at(p + "ff.b2").row(0);
      if (drop) detail::apply_dropout(ff_out, cfg.dropout_p, rng, lt.ff_drop_mask);

      x = detail::layer_norm<Scalar>(lt.x_mid + ff_out, params.at(p + "ln2.gain"),
                                     params.at(p + "ln2.bias"), lt.ln2_xhat, lt.ln2_inv);
    }

    MatX<Scalar> padded = MatX<Scalar>::Zero(batch.cols(), h);
    padded.topRows(len) = x;
    out.hidden.push_back(std::move(padded));
    out.pooled.row(b) = x.row(0);
  }

  if (trace) trace->cls = out.pooled;
  if (cfg.use_pooler) {
    MatX<Scalar> pre = out.pooled * params.at("pooler.w");
    pre.rowwise() += params.at("pooler.b").row(0);
    out.pooled = pre.array().tanh().matrix();
  }
  if (trace) trace->pooled = out.pooled;
  return out;
}

/// FC stack with ReLU between layers, then the task output activation:
/// log-softmax rows for classification, sigmoid for multilabel, identity for
/// regression.
template <typename Scalar>
MatX<Scalar> head_forward(const TaskModel<Scalar>& model, const MatX<Scalar>& pooled,
                          bool train_mode, std::uint64_t dropout_seed,
                          HeadTrace<Scalar>* trace = nullptr) {
  if (!pooled.allFinite()) throw NumericError("head input is not finite");
  const HeadSpec& head = model.head;
  const bool drop = train_mode && head.dropout_p > 0.0;
  SplitMix64 rng(dropout_seed);

  MatX<Scalar> z = pooled;
  for (std::size_t k = 0; k < head.hidden_sizes.size(); ++k) {
    const std::string p = "head.fc" + std::to_string(k) + ".";
    if (trace) trace->inputs.push_back(z);
    MatX<Scalar> pre = z * model.params.at(p + "w");
    pre.rowwise() += model.params.at(p + "b").row(0);
    z = relu(pre);
    MatX<Scalar> mask;
    if (drop) detail::apply_dropout(z, head.dropout_p, rng, mask);
    if (trace) {
      trace->pre.push_back(std::move(pre));
      trace->drop_masks.push_back(std::move(mask));
    }
  }
  if (trace) trace->inputs.push_back(z);

  MatX<Scalar> logits = z * model.params.at("head.out.w");
  logits.rowwise() += model.params.at("head.out.b").row(0);

  switch (head.kind) {
    case TaskKind::classification: return log_softmax_rows(logits);
    case TaskKind::multilabel: return sigmoid(logits);
    case TaskKind::regression: return logits;
  }
  return logits;
}

/// Full forward pass. When a trace is supplied it records everything
/// backward() needs; dropout is active only in train mode and is
/// deterministic in the seed.
template <typename Scalar>
MatX<Scalar> forward(const TaskModel<Scalar>& model, const Batch& batch, bool train_mode,
                     std::uint64_t dropout_seed, ModelTrace<Scalar>* trace = nullptr) {
  const EncoderOut<Scalar> enc =
      encoder_forward(model, batch, train_mode, mix_seed(dropout_seed, 0), trace);
  MatX<Scalar> scores = head_forward(model, enc.pooled, train_mode, mix_seed(dropout_seed, 1),
                                     trace ? &trace->head : nullptr);
  if (trace) trace->scores = scores;
  return scores;
}

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

namespace detail {

inline void check_loss_shapes(TaskKind kind, Eigen::Index rows, Eigen::Index cols,
                              const BatchLabels& labels) {
  if (!labels.present) throw DataError("batch carries no labels");
  if (labels.kind != kind) throw DataError("label kind does not match loss kind");
  switch (kind) {
    case TaskKind::classification:
      if (static_cast<Eigen::Index>(labels.class_ids.size()) != rows)
        throw DataError("shape mismatch: scores rows vs class labels");
      for (const int cls : labels.class_ids)
        if (cls < 0 || cls >= cols) throw DataError("class label out of range");
      break;
    case TaskKind::multilabel:
      if (labels.multi_hot.rows() != rows || labels.multi_hot.cols() != cols)
        throw DataError("shape mismatch: scores vs multilabel matrix");
      break;
    case TaskKind::regression:
      if (cols != 1 || labels.scores.size() != rows)
        throw DataError("shape mismatch: scores vs regression targets");
      break;
  }
}

}  // namespace detail

/// Scalar training loss, reported in bits for the cross-entropy losses
/// (log base 2; internal logs are natural and scaled by 1/ln 2).
/// Classification expects log-probabilities, multilabel expects sigmoid
/// probabilities, regression expects raw scores (mean squared error).
/// Probabilities are clamped to [1e-12, 1 - 1e-12] before the log.
template <typename Scalar>
double compute_loss(TaskKind kind, const MatX<Scalar>& scores, const BatchLabels& labels) {
  detail::check_loss_shapes(kind, scores.rows(), scores.cols(), labels);
  const auto rows = scores.rows();
  const auto cols = scores.cols();
  const double clamp_lo = 1e-12;

  switch (kind) {
    case TaskKind::classification: {
      double total = 0.0;
      for (Eigen::Index r = 0; r < rows; ++r)
        total -= static_cast<double>(scores(r, labels.class_ids[static_cast<std::size_t>(r)]));
      return total / (static_cast<double>(rows) * detail::kLn2);
    }
    case TaskKind::multilabel: {
      double total = 0.0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          const double p =
              std::clamp(static_cast<double>(scores(r, c)), clamp_lo, 1.0 - clamp_lo);
          const double y = labels.multi_hot(r, c);
          total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
      }
      return total / (static_cast<double>(rows * cols) * detail::kLn2);
    }
    case TaskKind::regression: {
      double total = 0.0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double d = static_cast<double>(scores(r, 0)) - labels.scores(r);
        total += d * d;
      }
      return total / static_cast<double>(rows);
    }
  }
  throw DataError("unknown task kind");
}

/// Gradient of compute_loss with respect to the output-layer logits.
/// (The saturation clamp only affects the reported value; the gradient is the
/// exact unclamped one, which is also the numerically stable form.)
template <typename Scalar>
MatX<Scalar> loss_gradient(TaskKind kind, const MatX<Scalar>& scores, const BatchLabels& labels) {
  detail::check_loss_shapes(kind, scores.rows(), scores.cols(), labels);
  const auto rows = scores.rows();
  const auto cols = scores.cols();
  MatX<Scalar> dlogits(rows, cols);

  switch (kind) {
    case TaskKind::classification: {
      const double scale = 1.0 / (static_cast<double>(rows) * detail::kLn2);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          const double p = std::exp(static_cast<double>(scores(r, c)));
          const double y = labels.class_ids[static_cast<std::size_t>(r)] == c ? 1.0 : 0.0;
          dlogits(r, c) = static_cast<Scalar>((p - y) * scale);
        }
      }
      break;
    }
    case TaskKind::multilabel: {
      const double scale = 1.0 / (static_cast<double>(rows * cols) * detail::kLn2);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
          dlogits(r, c) = static_cast<Scalar>(
              (static_cast<double>(scores(r, c)) - labels.multi_hot(r, c)) * scale);
      break;
    }
    case TaskKind::regression: {
      const double scale = 2.0 / static_cast<double>(rows);
      for (Eigen::Index r = 0; r < rows; ++r)
        dlogits(r, 0) =
            static_cast<Scalar>((static_cast<double>(scores(r, 0)) - labels.scores(r)) * scale);
      break;
    }
  }
  return dlogits;
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

/// Gradients of compute_loss for every trainable tensor, given the trace of
/// the forward pass that produced trace.scores on this batch. Throws
/// NumericError naming the first non-finite gradient tensor.
template <typename Scalar>
ParamStore<Scalar> backward(const TaskModel<Scalar>& model, const ModelTrace<Scalar>& trace,
                            const Batch& batch) {
  const EncoderConfig& cfg = model.config;
  const ParamStore<Scalar>& params = model.params;
  ParamStore<Scalar> grads = ParamStore<Scalar>::zeros_like(params);

  const MatX<Scalar> dlogits = loss_gradient(model.head.kind, trace.scores, batch.labels);

  // head, walked in reverse
  const HeadTrace<Scalar>& ht = trace.head;
  grads.at("head.out.w") += ht.inputs.back().transpose() * dlogits;
  grads.at("head.out.b").row(0) += dlogits.colwise().sum();
  MatX<Scalar> dz = dlogits * params.at("head.out.w").transpose();

  for (std::size_t k = model.head.hidden_sizes.size(); k-- > 0;) {
    const std::string p = "head.fc" + std::to_string(k) + ".";
    if (ht.drop_masks[k].size() > 0) dz = dz.cwiseProduct(ht.drop_masks[k]);
    const MatX<Scalar> dpre =
        dz.cwiseProduct(ht.pre[k].unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : Scalar(0); }));
    grads.at(p + "w") += ht.inputs[k].transpose() * dpre;
    grads.at(p + "b").row(0) += dpre.colwise().sum();
    dz = dpre * params.at(p + "w").transpose();
  }

  // pooling transform
  MatX<Scalar> dcls;
  if (cfg.use_pooler) {
    const MatX<Scalar> dtanh =
        dz.cwiseProduct((MatX<Scalar>::Ones(trace.pooled.rows(), trace.pooled.cols()) -
                         trace.pooled.cwiseProduct(trace.pooled)));
    grads.at("pooler.w") += trace.cls.transpose() * dtanh;
    grads.at("pooler.b").row(0) += dtanh.colwise().sum();
    dcls = dtanh * params.at("pooler.w").transpose();
  } else {
    dcls = dz;
  }

  // encoder, sequence by sequence
  const int heads = cfg.num_heads;
  const Eigen::Index head_dim = cfg.hidden_dim / heads;
  const Scalar attn_scale = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));

  for (std::size_t b = 0; b < trace.seqs.size(); ++b) {
    const SeqTrace<Scalar>& st = trace.seqs[b];
    const auto len = static_cast<Eigen::Index>(st.ids.size());

    MatX<Scalar> dx = MatX<Scalar>::Zero(len, cfg.hidden_dim);
    dx.row(0) = dcls.row(static_cast<Eigen::Index>(b));

    for (int l = cfg.num_layers - 1; l >= 0; --l) {
      const std::string p = "layers." + std::to_string(l) + ".";
      const LayerTrace<Scalar>& lt = st.layers[static_cast<std::size_t>(l)];

      MatX<Scalar> d_res2 = detail::layer_norm_backward(dx, lt.ln2_xhat, lt.ln2_inv,
                                                        params.at(p + "ln2.gain"),
                                                        grads.at(p + "ln2.gain"),
                                                        grads.at(p + "ln2.bias"));
      MatX<Scalar> dx_mid = d_res2;
      MatX<Scalar> dff_out = std::move(d_res2);
      if (lt.ff_drop_mask.size() > 0) dff_out = dff_out.cwiseProduct(lt.ff_drop_mask);

      const MatX<Scalar> ff_act = relu(lt.ff_pre);
      grads.at(p + "ff.w2") += ff_act.transpose() * dff_out;
      grads.at(p + "ff.b2").row(0) += dff_out.colwise().sum();
      MatX<Scalar> dff_act = dff_out * params.at(p + "ff.w2").transpose();
      const MatX<Scalar> dff_pre = dff_act.cwiseProduct(
          lt.ff_pre.unaryExpr([](Scalar v) { return v > 0 ? Scalar(1) : Scalar(0); }));
      grads.at(p + "ff.w1") += lt.x_mid.transpose() * dff_pre;
      grads.at(p + "ff.b1").row(0) += dff_pre.colwise().sum();
      dx_mid += dff_pre * params.at(p + "ff.w1").transpose();

      MatX<Scalar> d_res1 = detail::layer_norm_backward(dx_mid, lt.ln1_xhat, lt.ln1_inv,
                                                        params.at(p + "ln1.gain"),
                                                        grads.at(p + "ln1.gain"),
                                                        grads.at(p + "ln1.bias"));
      MatX<Scalar> dx_in = d_res1;
      MatX<Scalar> dattn_out = std::move(d_res1);
      if (lt.attn_drop_mask.size() > 0) dattn_out = dattn_out.cwiseProduct(lt.attn_drop_mask);

      grads.at(p + "attn.wo") += lt.attn_concat.transpose() * dattn_out;
      grads.at(p + "attn.bo").row(0) += dattn_out.colwise().sum();
      const MatX<Scalar> dconcat = dattn_out * params.at(p + "attn.wo").transpose();

      MatX<Scalar> dq = MatX<Scalar>::Zero(len, cfg.hidden_dim);
      MatX<Scalar> dk = MatX<Scalar>::Zero(len, cfg.hidden_dim);
      MatX<Scalar> dv = MatX<Scalar>::Zero(len, cfg.hidden_dim);
      for (int head = 0; head < heads; ++head) {
        const Eigen::Index offset = head * head_dim;
        const MatX<Scalar>& attn = lt.attn[static_cast<std::size_t>(head)];
        const auto vh = lt.v.middleCols(offset, head_dim);
        const auto qh = lt.q.middleCols(offset, head_dim);
        const auto kh = lt.k.middleCols(offset, head_dim);
        const auto d_oh = dconcat.middleCols(offset, head_dim);

        dv.middleCols(offset, head_dim) = attn.transpose() * d_oh;
        const MatX<Scalar> dattn = d_oh * vh.transpose();
        const MatX<Scalar> dlogits_h = detail::softmax_backward_rows(attn, dattn);
        dq.middleCols(offset, head_dim) = attn_scale * dlogits_h * kh;
        dk.middleCols(offset, head_dim) = attn_scale * dlogits_h.transpose() * qh;
      }

      grads.at(p + "attn.wq") += lt.x_in.transpose() * dq;
      grads.at(p + "attn.bq").row(0) += dq.colwise().sum();
      grads.at(p + "attn.wk") += lt.x_in.transpose() * dk;
      grads.at(p + "attn.bk").row(0) += dk.colwise().sum();
      grads.at(p + "attn.wv") += lt.x_in.transpose() * dv;
      grads.at(p + "attn.bv").row(0) += dv.colwise().sum();
      dx_in += dq * params.at(p + "attn.wq").transpose();
      dx_in += dk * params.at(p + "attn.wk").transpose();
      dx_in += dv * params.at(p + "attn.wv").transpose();

      dx = std::move(dx_in);
    }

    const MatX<Scalar> dembedded = detail::layer_norm_backward(dx, st.emb_ln_xhat, st.emb_ln_inv,
                                                               params.at("embed.ln.gain"),
                                                               grads.at("embed.ln.gain"),
                                                               grads.at("embed.ln.bias"));
    MatX<Scalar>& dtok = grads.at("embed.token");
    MatX<Scalar>& dpos = grads.at("embed.position");
    for (Eigen::Index t = 0; t < len; ++t) {
      dtok.row(st.ids[static_cast<std::size_t>(t)]) += dembedded.row(t);
      dpos.row(t) += dembedded.row(t);
    }
  }

  const std::string bad = grads.first_non_finite();
  if (!bad.empty()) throw NumericError("non-finite gradient in tensor '" + bad + "'");
  return grads;
}

}  // namespace redflag
