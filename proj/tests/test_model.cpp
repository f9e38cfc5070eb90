#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "uda/model.hpp"

using namespace uda;
using Md = Eigen::MatrixXd;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.input_dim = 5;
  c.hidden_dim = 8;
  c.num_classes = 3;
  c.heads = 2;
  c.domain_hidden = 6;
  return c;
}

double lrelu(double x) { return x > 0 ? x : 0.2 * x; }

// Straight-line dense re-implementation of the GAT layer on a ring.
Md dense_gat(const Md& H, const ModelParams<double>& p, const RingGraph& g) {
  const int n = static_cast<int>(H.cols());
  const int h = p.config.hidden_dim;
  Md out = Md::Zero(h, n);
  for (int k = 0; k < p.config.heads; ++k) {
    const Md G = p.gat_weight[k] * H;
    Md A = Md::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double denom = 0;
      for (int j : g.neighbors[i]) {
        double u = 0;
        for (int r = 0; r < h; ++r) u += p.gat_attention[k][r] * G(r, i) + p.gat_attention[k][h + r] * G(r, j);
        A(i, j) = std::exp(lrelu(u));
        denom += A(i, j);
      }
      A.row(i) /= denom;
    }
    out += G * A.transpose() / p.config.heads;
  }
  return out.unaryExpr([](double x) { return lrelu(x); });
}

// Random linear functional of every output, so every path gets exercised.
struct Probe {
  Md w_task, w_tap;
  Eigen::RowVectorXd w_dom;
  bool use_task = true, use_dom = true, use_tap = true;

  Probe(const ModelConfig& c, int n, unsigned seed)
      : w_task(testing::random_matrix(c.num_classes, n, seed)),
        w_tap(testing::random_matrix(c.hidden_dim, n, seed + 1)),
        w_dom(testing::random_matrix(1, n, seed + 2)) {}

  double value(const Forward<double>& f, DomainTap tap) const {
    double v = 0;
    if (use_task) v += w_task.cwiseProduct(f.task_logits).sum();
    if (use_dom) v += w_dom.cwiseProduct(f.domain_logits).sum();
    if (use_tap) v += w_tap.cwiseProduct(f.tap(tap)).sum();
    return v;
  }
  OutputGrads<double> grads() const {
    OutputGrads<double> g;
    if (use_task) g.task_logits = w_task;
    if (use_dom) g.domain_logits = w_dom;
    if (use_tap) g.tap = w_tap;
    return g;
  }
};

void check_gradients(ModelConfig c, unsigned seed) {
  const int n = 6;
  // lambda = -1 turns the reversal into a plain pass-through, so analytic
  // gradients are true gradients of the probe.
  c.lambda_grl = -1.0;
  const auto p = ModelParams<double>::initialize(c, seed);
  const Md X = testing::random_matrix(c.input_dim, n, seed + 7);
  const auto adj = Adjacency::from(build_ring(n, c.self_loops));
  const Probe probe(c, n, seed + 11);

  auto grads = ModelParams<double>::zeros(c);
  const auto f = forward_full<double>(X, p, adj);
  const Md dX = backward_full(f, p, probe.grads(), grads);
  const auto fd = testing::numeric_gradient(
      p, [&](const ModelParams<double>& q) { return probe.value(forward_full<double>(X, q, adj), c.domain_tap); });
  zip_tensors(
      [&](const std::string& name, const auto& a, const auto& b) {
        INFO(name);
        CHECK(testing::relative_error(a, b) <= 1e-6);
      },
      grads, fd);

  Md fdX(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    Md up = X, down = X;
    up.data()[i] += 1e-5;
    down.data()[i] -= 1e-5;
    fdX.data()[i] = (probe.value(forward_full<double>(up, p, adj), c.domain_tap) -
                     probe.value(forward_full<double>(down, p, adj), c.domain_tap)) /
                    2e-5;
  }
  CHECK(testing::relative_error(dX, fdX) <= 1e-6);
}

}  // namespace

TEST_CASE("projection examples") {
  Md W = Md::Identity(2, 2);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
  Md x(2, 2);
  x << 2, -1, 3, 5;
  const Md h = project<double>(x, W, b);
  CHECK(h(0, 0) == 2);
  CHECK(h(1, 0) == 3);
  CHECK(h(0, 1) == 0);
  CHECK(h(1, 1) == 5);
  CHECK_THROWS_AS(project<double>(Md::Ones(3, 1), W, b), Error);
}

TEST_CASE("projection matches brute-force dot products") {
  const Md W = testing::random_matrix(8, 6, 1), X = testing::random_matrix(6, 4, 2);
  const Eigen::VectorXd b = testing::random_matrix(8, 1, 3).col(0);
  const Md H = project<double>(X, W, b);
  for (int i = 0; i < 8; ++i) {
    for (int s = 0; s < 4; ++s) {
      double acc = b[i];
      for (int j = 0; j < 6; ++j) acc += W(i, j) * X(j, s);
      CHECK(H(i, s) == doctest::Approx(std::max(acc, 0.0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("attention of identical nodes is uniform") {
  auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 4);
  const Md H = testing::random_matrix(c.hidden_dim, 1, 5).replicate(1, 5);
  const auto adj = Adjacency::from(build_ring(5, true));
  const auto att = attention_coefficients(adj, H, p);
  for (const auto& a : att.alpha) {
    for (Eigen::Index e = 0; e < a.size(); ++e) CHECK(a[e] == doctest::Approx(1.0 / 3));
  }
  const auto pair = attention_coefficients(Adjacency::from(build_ring(2)), Md(H.leftCols(2)), p);
  for (const auto& a : pair.alpha) CHECK((a.array() == 1.0).all());
}

TEST_CASE("attention matches a brute-force per-node softmax") {
  auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 6);
  const Md H = testing::random_matrix(c.hidden_dim, 5, 7);
  const auto ring = build_ring(5);
  const auto adj = Adjacency::from(ring);
  const auto att = attention_coefficients(adj, H, p);
  for (int k = 0; k < c.heads; ++k) {
    const Md G = p.gat_weight[k] * H;
    int e = 0;
    for (int i = 0; i < 5; ++i) {
      std::vector<double> ex;
      double denom = 0;
      for (int j : ring.neighbors[i]) {
        Eigen::VectorXd cat(2 * c.hidden_dim);
        cat << G.col(i), G.col(j);
        ex.push_back(std::exp(lrelu(p.gat_attention[k].dot(cat))));
        denom += ex.back();
      }
      for (double v : ex) CHECK(att.alpha[k][e++] == doctest::Approx(v / denom).epsilon(1e-12));
    }
  }
}

TEST_CASE("gat forward matches a dense oracle") {
  auto c = small_config();
  c.heads = 4;
  const auto p = ModelParams<double>::initialize(c, 8);
  const Md H = testing::random_matrix(c.hidden_dim, 6, 9);
  const auto ring = build_ring(6);
  const Md got = gat_forward(Adjacency::from(ring), H, p);
  CHECK(testing::relative_error(got, dense_gat(H, p, ring)) <= 1e-12);
}

TEST_CASE("gat forward closed forms") {
  auto c = small_config();
  c.heads = 1;
  auto p = ModelParams<double>::initialize(c, 10);
  p.gat_weight[0] = Md::Identity(c.hidden_dim, c.hidden_dim);
  const Md H = testing::random_matrix(c.hidden_dim, 2, 11);
  const Md out = gat_forward(Adjacency::from(build_ring(2)), H, p);
  CHECK(out.col(0) == H.col(1).unaryExpr([](double x) { return lrelu(x); }));
  CHECK(out.col(1) == H.col(0).unaryExpr([](double x) { return lrelu(x); }));

  c.heads = 3;
  p = ModelParams<double>::initialize(c, 12);
  for (auto& W : p.gat_weight) W = Md::Identity(c.hidden_dim, c.hidden_dim);
  const Md same = testing::random_matrix(c.hidden_dim, 1, 13).replicate(1, 5);
  const Md o = gat_forward(Adjacency::from(build_ring(5)), same, p);
  for (int i = 0; i < 5; ++i) {
    CHECK(testing::relative_error(o.col(i), same.col(0).unaryExpr([](double x) { return lrelu(x); })) <= 1e-15);
  }
}

TEST_CASE("gat is equivariant under ring rotation and reflection") {
  auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 14);
  const int n = 7;
  const Md H = testing::random_matrix(c.hidden_dim, n, 15);
  const auto adj = Adjacency::from(build_ring(n));
  const Md out = gat_forward(adj, H, p);
  for (int r = 0; r < n; ++r) {
    Md rot(H.rows(), n), refl(H.rows(), n);
    for (int i = 0; i < n; ++i) {
      rot.col(i) = H.col((i + r) % n);
      refl.col(i) = H.col((r - i + n) % n);
    }
    const Md out_rot = gat_forward(adj, rot, p);
    const Md out_refl = gat_forward(adj, refl, p);
    for (int i = 0; i < n; ++i) {
      CHECK(testing::relative_error(out_rot.col(i), out.col((i + r) % n)) <= 1e-12);
      CHECK(testing::relative_error(out_refl.col(i), out.col((r - i + n) % n)) <= 1e-12);
    }
  }
}

TEST_CASE("gradient reversal") {
  Eigen::Vector3d x(1, 2, 3);
  const auto& y = grl_forward(x);
  CHECK(&y == &x);
  Eigen::Vector2d g(1, -2);
  CHECK(grl_backward(g, 1.0) == Eigen::Vector2d(-1, 2));
  CHECK(grl_backward(g, 0.0).isZero());
  CHECK(grl_backward(g, 0.5) == Eigen::Vector2d(-0.5, 1.0));
}

TEST_CASE("zero weights give a uniform task softmax") {
  auto c = small_config();
  c.num_classes = 7;
  const auto p = ModelParams<double>::zeros(c);
  const auto f = forward_full<double>(testing::random_matrix(c.input_dim, 4, 1), p, Adjacency::from(build_ring(4)));
  CHECK(f.task_logits.isZero());
  // log-sum-exp of zero logits
  CHECK(std::log(f.task_logits.col(0).array().exp().sum()) - f.task_logits(0, 0) ==
        doctest::Approx(std::log(7.0)));
}

TEST_CASE("forward matches a straight-line recomputation") {
  const auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 0);
  const Md X = testing::random_matrix(c.input_dim, 6, 0);
  const auto ring = build_ring(6);
  const auto f = forward_full<double>(X, p, Adjacency::from(ring));
  const Md H = ((p.proj_weight * X).colwise() + p.proj_bias).cwiseMax(0.0);
  const Md Hp = dense_gat(H, p, ring);
  const Md task = (p.task_weight * Hp).colwise() + p.task_bias;
  const Md hid = ((p.domain_weight1 * Hp).colwise() + p.domain_bias1).cwiseMax(0.0);
  const Eigen::RowVectorXd dom = (p.domain_weight2.transpose() * hid).array() + p.domain_bias2[0];
  CHECK(testing::relative_error(f.task_logits, task) <= 1e-12);
  CHECK(testing::relative_error(f.domain_logits, dom) <= 1e-12);
}

TEST_CASE("analytic gradients match finite differences") {
  auto c = small_config();
  SUBCASE("default") { check_gradients(c, 21); }
  SUBCASE("self loops, post-projection tap") {
    c.self_loops = true;
    c.domain_tap = DomainTap::PostProjection;
    check_gradients(c, 22);
  }
  SUBCASE("elu") {
    c.activation = Activation::Elu;
    check_gradients(c, 23);
  }
  SUBCASE("identity activation, one head") {
    c.activation = Activation::Identity;
    c.heads = 1;
    check_gradients(c, 24);
  }
  SUBCASE("without gat") {
    c.use_gat = false;
    check_gradients(c, 25);
  }
}

TEST_CASE("independent blocks get exactly zero gradient") {
  const auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 30);
  const Md X = testing::random_matrix(c.input_dim, 6, 31);
  const auto f = forward_full<double>(X, p, Adjacency::from(build_ring(6)));
  Probe probe(c, 6, 32);
  probe.use_dom = false;
  probe.use_tap = false;
  auto g = ModelParams<double>::zeros(c);
  backward_full(f, p, probe.grads(), g);
  CHECK(g.domain_weight1.isZero(0));
  CHECK(g.domain_bias1.isZero(0));
  CHECK(g.domain_weight2.isZero(0));
  CHECK(g.domain_bias2.isZero(0));
  CHECK(!g.task_weight.isZero(0));
}

TEST_CASE("attention gradient vanishes when softmax is uniform by symmetry") {
  const auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 33);
  const Md X = testing::random_matrix(c.input_dim, 1, 34).replicate(1, 6);
  const auto f = forward_full<double>(X, p, Adjacency::from(build_ring(6)));
  auto g = ModelParams<double>::zeros(c);
  backward_full(f, p, Probe(c, 6, 35).grads(), g);
  for (const auto& a : g.gat_attention) CHECK(a.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("lambda zero keeps the domain loss out of the encoder") {
  auto c = small_config();
  c.lambda_grl = 0.0;
  const auto p = ModelParams<double>::initialize(c, 40);
  const Md X = testing::random_matrix(c.input_dim, 6, 41);
  const auto f = forward_full<double>(X, p, Adjacency::from(build_ring(6)));
  Probe with(c, 6, 42), without(c, 6, 42);
  without.use_dom = false;
  auto ga = ModelParams<double>::zeros(c), gb = ModelParams<double>::zeros(c);
  backward_full(f, p, with.grads(), ga);
  backward_full(f, p, without.grads(), gb);
  CHECK(ga.proj_weight == gb.proj_weight);
  CHECK(ga.proj_bias == gb.proj_bias);
  for (int k = 0; k < c.heads; ++k) {
    CHECK(ga.gat_weight[k] == gb.gat_weight[k]);
    CHECK(ga.gat_attention[k] == gb.gat_attention[k]);
  }
}

TEST_CASE("backward without forward is a state error") {
  const auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 1);
  auto g = ModelParams<double>::zeros(c);
  try {
    backward_full(Forward<double>{}, p, OutputGrads<double>{}, g);
    FAIL("expected state error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::State);
  }
}

TEST_CASE("forward rejects mismatched graphs and inputs") {
  const auto c = small_config();
  const auto p = ModelParams<double>::initialize(c, 1);
  CHECK_THROWS_AS(forward_full<double>(Md::Ones(c.input_dim, 4), p, Adjacency::from(build_ring(5))), Error);
  CHECK_THROWS_AS(forward_full<double>(Md::Ones(c.input_dim + 1, 4), p, Adjacency::from(build_ring(4))), Error);
}

TEST_CASE("initialization is seeded and bounded") {
  const auto c = small_config();
  const auto a = ModelParams<float>::initialize(c, 3), b = ModelParams<float>::initialize(c, 3);
  zip_tensors([](const std::string&, const auto& x, const auto& y) { CHECK(x == y); }, a, b);
  CHECK(a.proj_weight.cwiseAbs().maxCoeff() <= 1.0f / std::sqrt(5.0f));
  CHECK(a.gat_attention[0].cwiseAbs().maxCoeff() <= 1.0f / std::sqrt(16.0f));
  CHECK(a.proj_bias.isZero(0));
  CHECK(!(a.proj_weight == ModelParams<float>::initialize(c, 4).proj_weight));
  const std::size_t expect = 8 * 5 + 8 + 2 * (64 + 16) + 3 * 8 + 3 + 6 * 8 + 6 + 6 + 1;
  CHECK(a.parameter_count() == expect);
}
