#ifndef UDA_MODEL_HPP
#define UDA_MODEL_HPP

#include <Eigen/Dense>

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "uda/error.hpp"
#include "uda/graph.hpp"
#include "uda/rng.hpp"

namespace uda {

enum class Activation : std::uint8_t { LeakyRelu = 0, Elu = 1, Identity = 2 };
enum class DomainTap : std::uint8_t { PostProjection = 0, PostGat = 1 };

inline constexpr double kLeakySlope = 0.2;

struct ModelConfig {
  int input_dim = 16;
  int hidden_dim = 512;
  int num_classes = 7;
  int heads = 4;
  int domain_hidden = 128;
  double lambda_grl = 1.0;
  // Node-update nonlinearity; attention logits always use LeakyReLU(0.2).
  Activation activation = Activation::LeakyRelu;
  DomainTap domain_tap = DomainTap::PostGat;
  bool self_loops = false;
  // false bypasses the graph module: embeddings = projection output.
  bool use_gat = true;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void ModelConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || num_classes < 1 || heads < 1 || domain_hidden < 1) {
    throw Error(ErrorKind::Config, "model dimensions and head count must be positive");
  }
  if (!std::isfinite(lambda_grl)) throw Error(ErrorKind::Config, "lambda_grl must be finite");
}

template <typename Scalar>
struct ModelParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  ModelConfig config;
  Matrix proj_weight;  // hidden x input
  Vector proj_bias;
  std::vector<Matrix> gat_weight;     // per head, hidden x hidden
  std::vector<Vector> gat_attention;  // per head, 2 * hidden: [source half; neighbor half]
  Matrix task_weight;                 // classes x hidden
  Vector task_bias;
  Matrix domain_weight1;  // domain_hidden x hidden
  Vector domain_bias1;
  Vector domain_weight2;  // domain_hidden
  Vector domain_bias2;    // 1

  static ModelParams zeros(const ModelConfig& config);
  // Uniform(-s, s), s = 1/sqrt(fan_in), for weights and attention vectors;
  // zero biases. Elements are drawn in tensor order, row-major.
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  template <typename Other>
  ModelParams<Other> cast() const;

  std::size_t parameter_count() const;
};

// Calls f(name, tensor_of_p0, tensor_of_p1, ...) for every tensor, in the
// canonical (checkpoint) order.
template <typename F, typename P0, typename... Ps>
void zip_tensors(F&& f, P0& p0, Ps&... ps) {
  f(std::string("proj.W"), p0.proj_weight, ps.proj_weight...);
  f(std::string("proj.b"), p0.proj_bias, ps.proj_bias...);
  for (std::size_t k = 0; k < p0.gat_weight.size(); ++k) {
    f("gat.W." + std::to_string(k), p0.gat_weight[k], ps.gat_weight[k]...);
    f("gat.a." + std::to_string(k), p0.gat_attention[k], ps.gat_attention[k]...);
  }
  f(std::string("task.W"), p0.task_weight, ps.task_weight...);
  f(std::string("task.b"), p0.task_bias, ps.task_bias...);
  f(std::string("domain.W1"), p0.domain_weight1, ps.domain_weight1...);
  f(std::string("domain.b1"), p0.domain_bias1, ps.domain_bias1...);
  f(std::string("domain.w2"), p0.domain_weight2, ps.domain_weight2...);
  f(std::string("domain.b2"), p0.domain_bias2, ps.domain_bias2...);
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::zeros(const ModelConfig& c) {
  c.validate();
  ModelParams p;
  p.config = c;
  const int h = c.hidden_dim;
  p.proj_weight = Matrix::Zero(h, c.input_dim);
  p.proj_bias = Vector::Zero(h);
  p.gat_weight.assign(c.heads, Matrix::Zero(h, h));
  p.gat_attention.assign(c.heads, Vector::Zero(2 * h));
  p.task_weight = Matrix::Zero(c.num_classes, h);
  p.task_bias = Vector::Zero(c.num_classes);
  p.domain_weight1 = Matrix::Zero(c.domain_hidden, h);
  p.domain_bias1 = Vector::Zero(c.domain_hidden);
  p.domain_weight2 = Vector::Zero(c.domain_hidden);
  p.domain_bias2 = Vector::Zero(1);
  return p;
}

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::initialize(const ModelConfig& c, std::uint64_t seed) {
  ModelParams p = zeros(c);
  SplitMix64 rng(derive_seed(seed, stream::kInit));
  auto fill = [&](auto& t, int fan_in) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index col = 0; col < t.cols(); ++col) t(r, col) = static_cast<Scalar>(rng.uniform(-s, s));
    }
  };
  const int h = c.hidden_dim;
  fill(p.proj_weight, c.input_dim);
  for (int k = 0; k < c.heads; ++k) {
    fill(p.gat_weight[k], h);
    fill(p.gat_attention[k], 2 * h);
  }
  fill(p.task_weight, h);
  fill(p.domain_weight1, h);
  fill(p.domain_weight2, c.domain_hidden);
  return p;
}

template <typename Scalar>
template <typename Other>
ModelParams<Other> ModelParams<Scalar>::cast() const {
  auto out = ModelParams<Other>::zeros(config);
  zip_tensors([](const std::string&, auto& dst, const auto& src) { dst = src.template cast<Other>(); }, out,
              *this);
  return out;
}

template <typename Scalar>
std::size_t ModelParams<Scalar>::parameter_count() const {
  std::size_t n = 0;
  zip_tensors([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, *this);
  return n;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities.

template <typename Scalar>
inline Scalar leaky_relu(Scalar x, Scalar slope = Scalar(kLeakySlope)) {
  return x > Scalar(0) ? x : slope * x;
}

template <typename Scalar>
inline Scalar leaky_relu_grad(Scalar x, Scalar slope = Scalar(kLeakySlope)) {
  return x > Scalar(0) ? Scalar(1) : slope;
}

template <typename Scalar>
inline Scalar activate(Activation a, Scalar x) {
  switch (a) {
    case Activation::LeakyRelu: return leaky_relu(x);
    case Activation::Elu: return x > Scalar(0) ? x : std::expm1(x);
    case Activation::Identity: return x;
  }
  return x;
}

template <typename Scalar>
inline Scalar activate_grad(Activation a, Scalar x) {
  switch (a) {
    case Activation::LeakyRelu: return leaky_relu_grad(x);
    case Activation::Elu: return x > Scalar(0) ? Scalar(1) : std::exp(x);
    case Activation::Identity: return Scalar(1);
  }
  return Scalar(1);
}

// ---------------------------------------------------------------------------
// Sparse connectivity in CSR form. Row i lists the neighbors N_i that node i
// attends over; a star graph has a single row (the query).

struct Adjacency {
  int nodes = 0;
  std::vector<int> offsets{0};
  std::vector<int> cols;

  int rows() const { return static_cast<int>(offsets.size()) - 1; }
  int edges() const { return static_cast<int>(cols.size()); }

  static Adjacency from(const RingGraph& ring);
  // Nodes are [query, prototype_0, ..., prototype_{k-1}] in retrieval order.
  static Adjacency from(const StarGraph& star, bool self_loop = false);
};

inline Adjacency Adjacency::from(const RingGraph& ring) {
  Adjacency a;
  a.nodes = ring.n;
  for (const auto& nbrs : ring.neighbors) {
    if (nbrs.empty()) throw Error(ErrorKind::Graph, "isolated node in graph");
    a.cols.insert(a.cols.end(), nbrs.begin(), nbrs.end());
    a.offsets.push_back(static_cast<int>(a.cols.size()));
  }
  return a;
}

inline Adjacency Adjacency::from(const StarGraph& star, bool self_loop) {
  if (star.k() < 1) throw Error(ErrorKind::Graph, "star graph without edges");
  Adjacency a;
  a.nodes = star.k() + 1;
  if (self_loop) a.cols.push_back(0);
  for (int p = 0; p < star.k(); ++p) a.cols.push_back(p + 1);
  a.offsets.push_back(static_cast<int>(a.cols.size()));
  return a;
}

// ---------------------------------------------------------------------------
// Projection encoder: h = ReLU(W x + b), samples in columns.

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <typename Scalar>
MatrixX<Scalar> project(const MatrixX<Scalar>& X, const MatrixX<Scalar>& weight, const VectorX<Scalar>& bias) {
  if (X.rows() != weight.cols() || weight.rows() != bias.size()) {
    throw Error(ErrorKind::Shape, "projection shape mismatch: input " + std::to_string(X.rows()) + " vs weight " +
                                      std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()));
  }
  MatrixX<Scalar> H = ((weight * X).colwise() + bias).cwiseMax(Scalar(0));
  if (!H.allFinite()) throw Error(ErrorKind::Numeric, "non-finite projection output");
  return H;
}

template <typename Scalar>
MatrixX<Scalar> project(const MatrixX<Scalar>& X, const ModelParams<Scalar>& p) {
  return project(X, p.proj_weight, p.proj_bias);
}

// ---------------------------------------------------------------------------
// Multi-head graph attention.

template <typename Scalar>
struct EdgeAttention {
  // Per head, one entry per CSR edge.
  std::vector<VectorX<Scalar>> logits;  // pre-LeakyReLU a_k . [W_k h_i || W_k h_j]
  std::vector<VectorX<Scalar>> alpha;
};

namespace detail {

// Head projections G_k = W_k H.
template <typename Scalar>
std::vector<MatrixX<Scalar>> head_features(const MatrixX<Scalar>& H, const ModelParams<Scalar>& p) {
  std::vector<MatrixX<Scalar>> G;
  G.reserve(p.gat_weight.size());
  for (const auto& W : p.gat_weight) G.push_back(W * H);
  return G;
}

template <typename Scalar>
EdgeAttention<Scalar> attention_from_heads(const Adjacency& adj, const std::vector<MatrixX<Scalar>>& G,
                                           const ModelParams<Scalar>& p) {
  const Eigen::Index h = p.config.hidden_dim;
  EdgeAttention<Scalar> att;
  for (std::size_t k = 0; k < G.size(); ++k) {
    const RowVectorX<Scalar> s = p.gat_attention[k].head(h).transpose() * G[k];
    const RowVectorX<Scalar> t = p.gat_attention[k].tail(h).transpose() * G[k];
    VectorX<Scalar> u(adj.edges()), alpha(adj.edges());
    for (int i = 0; i < adj.rows(); ++i) {
      const int begin = adj.offsets[i], end = adj.offsets[i + 1];
      if (begin == end) throw Error(ErrorKind::Graph, "node " + std::to_string(i) + " has no neighbors");
      Scalar max_e = -std::numeric_limits<Scalar>::infinity();
      for (int e = begin; e < end; ++e) {
        u[e] = s[i] + t[adj.cols[e]];
        max_e = std::max(max_e, leaky_relu(u[e]));
      }
      Scalar denom(0);
      for (int e = begin; e < end; ++e) {
        alpha[e] = std::exp(leaky_relu(u[e]) - max_e);
        denom += alpha[e];
      }
      for (int e = begin; e < end; ++e) alpha[e] /= denom;
    }
    att.logits.push_back(std::move(u));
    att.alpha.push_back(std::move(alpha));
  }
  return att;
}

// Pre-activation aggregate S[:, i] = (1/K) sum_k sum_{j in N_i} alpha_ij^k G_k[:, j].
template <typename Scalar>
MatrixX<Scalar> aggregate(const Adjacency& adj, const std::vector<MatrixX<Scalar>>& G,
                          const EdgeAttention<Scalar>& att) {
  const Eigen::Index h = G.front().rows();
  MatrixX<Scalar> S = MatrixX<Scalar>::Zero(h, adj.rows());
  const Scalar inv_k = Scalar(1) / static_cast<Scalar>(G.size());
  for (std::size_t k = 0; k < G.size(); ++k) {
    for (int i = 0; i < adj.rows(); ++i) {
      for (int e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e) {
        S.col(i).noalias() += (inv_k * att.alpha[k][e]) * G[k].col(adj.cols[e]);
      }
    }
  }
  return S;
}

template <typename Scalar>
void check_graph_size(const Adjacency& adj, const MatrixX<Scalar>& H) {
  if (adj.nodes != H.cols()) {
    throw Error(ErrorKind::Graph, "graph has " + std::to_string(adj.nodes) + " nodes but batch has " +
                                      std::to_string(H.cols()));
  }
}

}  // namespace detail

template <typename Scalar>
EdgeAttention<Scalar> attention_coefficients(const Adjacency& adj, const MatrixX<Scalar>& H,
                                             const ModelParams<Scalar>& p) {
  detail::check_graph_size(adj, H);
  return detail::attention_from_heads(adj, detail::head_features(H, p), p);
}

// Returns one column per adjacency row.
template <typename Scalar>
MatrixX<Scalar> gat_forward(const Adjacency& adj, const MatrixX<Scalar>& H, const ModelParams<Scalar>& p) {
  detail::check_graph_size(adj, H);
  const auto G = detail::head_features(H, p);
  const auto att = detail::attention_from_heads(adj, G, p);
  return detail::aggregate(adj, G, att).unaryExpr([&](Scalar x) { return activate(p.config.activation, x); });
}

// ---------------------------------------------------------------------------
// Gradient reversal: identity forward, -lambda * g backward.

template <typename Derived>
const Derived& grl_forward(const Eigen::MatrixBase<Derived>& x) {
  return x.derived();
}

template <typename Derived>
auto grl_backward(const Eigen::MatrixBase<Derived>& grad, typename Derived::Scalar lambda) {
  return (-lambda * grad.derived()).eval();
}

// ---------------------------------------------------------------------------
// Full pipeline for one batch.

template <typename Scalar>
struct Forward {
  bool valid = false;
  Adjacency adj;
  MatrixX<Scalar> X;
  MatrixX<Scalar> proj_pre;  // W x + b
  MatrixX<Scalar> H;         // projection output
  std::vector<MatrixX<Scalar>> G;
  EdgeAttention<Scalar> attention;
  MatrixX<Scalar> gat_pre;     // aggregate before sigma
  MatrixX<Scalar> embeddings;  // H'
  MatrixX<Scalar> task_logits;
  MatrixX<Scalar> domain_pre;  // hidden layer of the domain head, pre-ReLU
  RowVectorX<Scalar> domain_logits;

  // Embeddings consumed by the domain head and the alignment losses.
  const MatrixX<Scalar>& tap(DomainTap which) const { return which == DomainTap::PostGat ? embeddings : H; }
};

template <typename Scalar>
Forward<Scalar> forward_full(const MatrixX<Scalar>& X, const ModelParams<Scalar>& p, const Adjacency& adj) {
  Forward<Scalar> f;
  f.adj = adj;
  f.X = X;
  if (X.rows() != p.config.input_dim) {
    throw Error(ErrorKind::Shape, "batch has " + std::to_string(X.rows()) + " features, model expects " +
                                      std::to_string(p.config.input_dim));
  }
  f.proj_pre = (p.proj_weight * X).colwise() + p.proj_bias;
  f.H = f.proj_pre.cwiseMax(Scalar(0));
  if (p.config.use_gat) {
    detail::check_graph_size(adj, f.H);
    if (adj.rows() != adj.nodes) throw Error(ErrorKind::Graph, "batch forward needs one adjacency row per node");
    f.G = detail::head_features(f.H, p);
    f.attention = detail::attention_from_heads(adj, f.G, p);
    f.gat_pre = detail::aggregate(adj, f.G, f.attention);
    f.embeddings = f.gat_pre.unaryExpr([&](Scalar x) { return activate(p.config.activation, x); });
  } else {
    f.embeddings = f.H;
  }
  f.task_logits = (p.task_weight * f.embeddings).colwise() + p.task_bias;
  const auto& domain_in = grl_forward(f.tap(p.config.domain_tap));
  f.domain_pre = (p.domain_weight1 * domain_in).colwise() + p.domain_bias1;
  f.domain_logits = (p.domain_weight2.transpose() * f.domain_pre.cwiseMax(Scalar(0))).array() + p.domain_bias2[0];
  if (!f.task_logits.allFinite() || !f.domain_logits.allFinite()) {
    throw Error(ErrorKind::Numeric, "non-finite logits in forward pass");
  }
  f.valid = true;
  return f;
}

// Upstream gradients for one batch. Empty matrices mean "no contribution".
template <typename Scalar>
struct OutputGrads {
  MatrixX<Scalar> tap;  // dL/d(tap embeddings) from alignment losses
  MatrixX<Scalar> task_logits;
  RowVectorX<Scalar> domain_logits;
};

// Accumulates parameter gradients into `grads`; the domain-head gradient
// crosses the gradient reversal layer on its way into the encoder. Returns
// dL/dX.
template <typename Scalar>
MatrixX<Scalar> backward_full(const Forward<Scalar>& f, const ModelParams<Scalar>& p, const OutputGrads<Scalar>& up,
                              ModelParams<Scalar>& grads) {
  if (!f.valid) throw Error(ErrorKind::State, "backward called without a completed forward pass");
  const auto& cfg = p.config;
  const Eigen::Index n = f.X.cols();
  MatrixX<Scalar> d_emb = MatrixX<Scalar>::Zero(cfg.hidden_dim, n);
  MatrixX<Scalar> d_H = MatrixX<Scalar>::Zero(cfg.hidden_dim, n);
  MatrixX<Scalar>& d_tap = cfg.domain_tap == DomainTap::PostGat ? d_emb : d_H;

  if (up.task_logits.size() > 0) {
    grads.task_weight.noalias() += up.task_logits * f.embeddings.transpose();
    grads.task_bias += up.task_logits.rowwise().sum();
    d_emb.noalias() += p.task_weight.transpose() * up.task_logits;
  }
  if (up.domain_logits.size() > 0) {
    const MatrixX<Scalar> hidden = f.domain_pre.cwiseMax(Scalar(0));
    grads.domain_weight2.noalias() += hidden * up.domain_logits.transpose();
    grads.domain_bias2[0] += up.domain_logits.sum();
    MatrixX<Scalar> d_pre = p.domain_weight2 * up.domain_logits;
    d_pre = d_pre.cwiseProduct((f.domain_pre.array() > Scalar(0)).matrix().template cast<Scalar>());
    const MatrixX<Scalar>& domain_in = f.tap(cfg.domain_tap);
    grads.domain_weight1.noalias() += d_pre * domain_in.transpose();
    grads.domain_bias1 += d_pre.rowwise().sum();
    d_tap += grl_backward(p.domain_weight1.transpose() * d_pre, static_cast<Scalar>(cfg.lambda_grl));
  }
  if (up.tap.size() > 0) d_tap += up.tap;

  if (cfg.use_gat) {
    const auto& adj = f.adj;
    const MatrixX<Scalar> d_S = d_emb.cwiseProduct(f.gat_pre.unaryExpr([&](Scalar x) { return activate_grad(cfg.activation, x); }));
    const Scalar inv_k = Scalar(1) / static_cast<Scalar>(cfg.heads);
    const Eigen::Index h = cfg.hidden_dim;
    for (int k = 0; k < cfg.heads; ++k) {
      const auto& G = f.G[k];
      const auto& alpha = f.attention.alpha[k];
      const auto& u = f.attention.logits[k];
      MatrixX<Scalar> d_G = MatrixX<Scalar>::Zero(h, n);
      RowVectorX<Scalar> d_s = RowVectorX<Scalar>::Zero(n), d_t = RowVectorX<Scalar>::Zero(n);
      VectorX<Scalar> d_alpha(adj.edges());
      for (int i = 0; i < adj.rows(); ++i) {
        const int begin = adj.offsets[i], end = adj.offsets[i + 1];
        Scalar weighted(0);
        for (int e = begin; e < end; ++e) {
          const int j = adj.cols[e];
          d_G.col(j).noalias() += (inv_k * alpha[e]) * d_S.col(i);
          d_alpha[e] = inv_k * d_S.col(i).dot(G.col(j));
          weighted += alpha[e] * d_alpha[e];
        }
        for (int e = begin; e < end; ++e) {
          const Scalar d_u = alpha[e] * (d_alpha[e] - weighted) * leaky_relu_grad(u[e]);
          d_s[i] += d_u;
          d_t[adj.cols[e]] += d_u;
        }
      }
      const auto a_src = p.gat_attention[k].head(h);
      const auto a_dst = p.gat_attention[k].tail(h);
      grads.gat_attention[k].head(h).noalias() += G * d_s.transpose();
      grads.gat_attention[k].tail(h).noalias() += G * d_t.transpose();
      d_G.noalias() += a_src * d_s;
      d_G.noalias() += a_dst * d_t;
      grads.gat_weight[k].noalias() += d_G * f.H.transpose();
      d_H.noalias() += p.gat_weight[k].transpose() * d_G;
    }
  } else {
    d_H += d_emb;
  }

  const MatrixX<Scalar> d_pre = d_H.cwiseProduct((f.proj_pre.array() > Scalar(0)).matrix().template cast<Scalar>());
  grads.proj_weight.noalias() += d_pre * f.X.transpose();
  grads.proj_bias += d_pre.rowwise().sum();
  return p.proj_weight.transpose() * d_pre;
}

}  // namespace uda

#endif  // UDA_MODEL_HPP
