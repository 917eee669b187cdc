#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "artiprobe/adam.hpp"
#include "artiprobe/error.hpp"
#include "artiprobe/forward.hpp"
#include "artiprobe/probe.hpp"
#include "support.hpp"

using namespace artiprobe;

namespace {

struct Generator {
  Eigen::MatrixXd a;  // 6 x d
  Eigen::VectorXd b;  // 6
};

Generator random_generator(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> g(0.0, 0.5);
  Generator gen{Eigen::MatrixXd(6, d), Eigen::VectorXd(6)};
  for (Eigen::Index i = 0; i < 6; ++i) {
    gen.b(i) = g(rng);
    for (Eigen::Index j = 0; j < d; ++j) gen.a(i, j) = g(rng);
  }
  return gen;
}

std::vector<ProbePair> noiseless_pairs(std::mt19937_64& rng, const Generator& gen, std::size_t count,
                                       const std::string& prefix) {
  std::uniform_int_distribution<std::size_t> phones(4, 15);
  std::vector<ProbePair> out;
  for (std::size_t u = 0; u < count; ++u) {
    const auto f = testing::random_featural(rng, phones(rng), static_cast<std::size_t>(gen.a.cols()), 0.0);
    const auto traj = synthesize(f, InterpMethod::Linear);
    ProbePair p;
    p.utterance_id = prefix + std::to_string(u);
    p.features = traj.frames;
    p.targets = (p.features * gen.a.transpose()).rowwise() + gen.b.transpose();
    out.push_back(std::move(p));
  }
  return out;
}

// Minimizer of the utterance-weighted frame-mean loss: weighted normal
// equations with weight 1 / n_u per frame, solved by QR.
ProbeModel least_squares(std::span<const ProbePair> pairs) {
  const auto d = pairs.front().features.cols();
  Eigen::Index rows = 0;
  for (const auto& p : pairs) rows += p.frame_count();
  Eigen::MatrixXd x(rows, d + 1), y(rows, 6);
  Eigen::Index r = 0;
  for (const auto& p : pairs) {
    const double w = 1.0 / std::sqrt(static_cast<double>(p.frame_count()));
    x.block(r, 0, p.frame_count(), d) = w * p.features;
    x.block(r, d, p.frame_count(), 1).setConstant(w);
    y.middleRows(r, p.frame_count()) = w * p.targets;
    r += p.frame_count();
  }
  const Eigen::MatrixXd sol = x.colPivHouseholderQr().solve(y);  // (d+1) x 6
  ProbeModel m;
  m.weight = sol.topRows(d).transpose();
  m.bias = sol.row(d).transpose();
  return m;
}

ProbeModel zero_probe(Eigen::Index d) {
  ProbeModel m;
  m.weight = Eigen::MatrixXd::Zero(6, d);
  m.bias = Eigen::VectorXd::Zero(6);
  return m;
}

double direct_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return (sxy / (n - 1)) / (std::sqrt(sxx / (n - 1)) * std::sqrt(syy / (n - 1)));
}

}  // namespace

TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
  auto s = AdamState::zeros(2, 3);
  Eigen::MatrixXd p = Eigen::MatrixXd::Constant(2, 3, 0.7);
  adam_step(s, p, Eigen::MatrixXd::Zero(2, 3));
  CHECK((p.array() == 0.7).all());
  CHECK(s.step == 1);
}

TEST_CASE("Adam: first and second steps follow the bias-corrected update") {
  auto s = AdamState::zeros(1, 2);
  Eigen::MatrixXd p(1, 2);
  p << 1.0, -2.0;
  Eigen::MatrixXd g1(1, 2), g2(1, 2);
  g1 << 0.5, -3.0;
  g2 << -1.0, 2.0;
  adam_step(s, p, g1);
  // m_hat = g, v_hat = g^2: the first step is lr * sign(g) up to epsilon.
  CHECK(p(0, 0) == doctest::Approx(1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(-2.0 + 1e-3 * 3.0 / (3.0 + 1e-8)).epsilon(1e-14));
  const Eigen::MatrixXd after_first = p;
  adam_step(s, p, g2);
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double m = 0.9 * 0.1 * g1(0, j) + 0.1 * g2(0, j);
    const double v = 0.999 * 0.001 * g1(0, j) * g1(0, j) + 0.001 * g2(0, j) * g2(0, j);
    const double mhat = m / (1 - 0.9 * 0.9), vhat = v / (1 - 0.999 * 0.999);
    CHECK(p(0, j) == doctest::Approx(after_first(0, j) - 1e-3 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(adam_step(s, p, Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);
  Eigen::MatrixXd bad(1, 2);
  bad << std::nan(""), 0.0;
  CHECK_THROWS_AS(adam_step(s, p, bad), RuntimeFailure);
}

TEST_CASE("pearson examples") {
  CHECK(*pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(*pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> x{1, 2, 3, 4}, y{1, 2, 3, 100};
  CHECK(*pearson(x, y) == doctest::Approx(direct_pearson(x, y)).epsilon(1e-14));
  CHECK_FALSE(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}).has_value());
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
}

TEST_CASE("pearson is invariant to positive affine maps and bounded") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x(i) = g(rng);
      y(i) = 0.3 * x(i) + g(rng);
    }
    const double r = *pearson(x, y);
    CHECK(std::abs(r) <= 1.0);
    const Eigen::VectorXd y2 = (3.5 * y.array() - 7.0).matrix();
    CHECK(*pearson(x, y2) == doctest::Approx(r).epsilon(1e-12));
    CHECK(*pearson(x, Eigen::VectorXd(-y)) == doctest::Approx(-r).epsilon(1e-12));
  }
}

TEST_CASE("noiseless affine data: trained probe matches the least-squares oracle") {
  std::mt19937_64 rng(99);
  const auto gen = random_generator(rng, 5);
  const auto train = noiseless_pairs(rng, gen, 200, "tr");
  const auto dev = noiseless_pairs(rng, gen, 20, "dv");
  const auto test = noiseless_pairs(rng, gen, 20, "te");
  const auto probe = train_probe(train, dev, 7);
  const auto oracle = least_squares(train);
  const double oracle_loss = mean_loss(oracle, train);
  CHECK(oracle_loss < 1e-20);
  CHECK((oracle.weight - gen.a).cwiseAbs().maxCoeff() < 1e-9);
  const double loss = mean_loss(probe, train);
  MESSAGE("probe train loss ", loss, " after ", probe.epochs_run, " epochs");
  CHECK(loss < 1e-6);
  CHECK(loss - oracle_loss < 1e-4);
  const auto scores = score(probe, test);
  for (const auto& r : scores.pcc) {
    REQUIRE(r.has_value());
    CHECK(*r > 0.999);
  }
  // The exact generator scores 1.
  ProbeModel exact = zero_probe(5);
  exact.weight = gen.a;
  exact.bias = gen.b;
  for (const auto& r : score(exact, test).pcc) CHECK(*r == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("training is deterministic given the seed") {
  std::mt19937_64 rng(3);
  const auto gen = random_generator(rng, 4);
  const auto train = noiseless_pairs(rng, gen, 20, "tr");
  const auto dev = noiseless_pairs(rng, gen, 5, "dv");
  ProbeTrainOptions opts;
  opts.max_epochs = 10;
  const auto a = train_probe(train, dev, 11, opts);
  const auto b = train_probe(train, dev, 11, opts);
  const auto c = train_probe(train, dev, 12, opts);
  CHECK(a.weight == b.weight);
  CHECK(a.bias == b.bias);
  CHECK(a.dev_loss_history == b.dev_loss_history);
  CHECK(a.weight != c.weight);
}

TEST_CASE("dev loss increasing from epoch 1 stops at epoch 6 with epoch-1 parameters") {
  std::mt19937_64 rng(21);
  Generator identity{Eigen::MatrixXd::Zero(6, 6), Eigen::VectorXd::Zero(6)};
  identity.a.setIdentity();
  auto train = noiseless_pairs(rng, identity, 30, "tr");
  auto dev = noiseless_pairs(rng, identity, 5, "dv");
  for (auto& p : dev) p.targets = -p.targets;
  const auto probe = train_probe(train, dev, 5);
  CHECK(probe.epochs_run == 6);
  CHECK(probe.best_epoch == 1);
  REQUIRE(probe.dev_loss_history.size() == 6);
  for (std::size_t i = 1; i < 6; ++i) CHECK(probe.dev_loss_history[i] > probe.dev_loss_history[i - 1]);
  ProbeTrainOptions one;
  one.max_epochs = 1;
  const auto first = train_probe(train, dev, 5, one);
  CHECK(probe.weight == first.weight);
  CHECK(probe.bias == first.bias);
  CHECK(probe.best_dev_loss == probe.dev_loss_history[0]);
}

TEST_CASE("EarlyStopper contract") {
  EarlyStopper s(5);
  CHECK(s.update(1.0));
  for (int i = 0; i < 4; ++i) {
    CHECK_FALSE(s.update(2.0 + i));
    CHECK_FALSE(s.should_stop());
  }
  CHECK_FALSE(s.update(1.0));  // ties are not improvements
  CHECK(s.should_stop());
  CHECK(s.best_epoch() == 1);
  CHECK(s.epochs() == 6);

  EarlyStopper t(2);
  CHECK(t.update(3.0));
  CHECK_FALSE(t.update(4.0));
  CHECK(t.update(2.0));
  CHECK_FALSE(t.should_stop());
  CHECK(t.best_epoch() == 3);
  CHECK(t.best_loss() == 2.0);
}

TEST_CASE("a single one-frame utterance is fitted exactly") {
  ProbePair p;
  p.utterance_id = "one";
  p.features = Eigen::MatrixXd(1, 3);
  p.features << 0.5, -1.0, 0.25;
  p.targets = Eigen::MatrixXd(1, 6);
  p.targets << 0.3, -0.2, 0.1, 0.4, -0.5, 0.05;
  const std::vector<ProbePair> train{p};
  ProbeTrainOptions opts;
  opts.max_epochs = 4000;
  opts.patience = 50;
  opts.learning_rate = 1e-2;
  const auto probe = train_probe(train, train, 1, opts);
  MESSAGE("one-frame loss ", probe.best_dev_loss, " after ", probe.epochs_run, " epochs");
  CHECK(probe.best_dev_loss < 1e-8);
  CHECK(probe.best_dev_loss < utterance_loss(zero_probe(3), p) * 1e-6);
}

TEST_CASE("score concatenates test utterances") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::vector<ProbePair> test(2);
  for (std::size_t u = 0; u < 2; ++u) {
    const Eigen::Index n = u == 0 ? 7 : 12;
    test[u].utterance_id = "t" + std::to_string(u);
    test[u].features = Eigen::MatrixXd(n, 3);
    test[u].targets = Eigen::MatrixXd(n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < 3; ++j) test[u].features(i, j) = g(rng);
      for (Eigen::Index j = 0; j < 6; ++j) test[u].targets(i, j) = g(rng);
    }
  }
  ProbeModel probe = zero_probe(3);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) probe.weight(i, j) = g(rng);
  const auto s = score(probe, test);
  for (Eigen::Index p = 0; p < 6; ++p) {
    std::vector<double> pred, truth;
    for (const auto& t : test) {
      const Eigen::MatrixXd yhat = probe.predict(t.features);
      for (Eigen::Index i = 0; i < t.frame_count(); ++i) {
        pred.push_back(yhat(i, p));
        truth.push_back(t.targets(i, p));
      }
    }
    CHECK(*s.pcc[static_cast<std::size_t>(p)] == doctest::Approx(direct_pearson(pred, truth)).epsilon(1e-12));
  }
  CHECK(s.warnings.empty());

  const auto z = score(zero_probe(3), test);
  for (const auto& r : z.pcc) CHECK_FALSE(r.has_value());
  CHECK(z.warnings.size() == 6);
  CHECK_THROWS_AS(score(probe, std::vector<ProbePair>{}), ValidationError);
}

TEST_CASE("make_pair truncates by at most one frame") {
  Trajectory t;
  t.frames = Eigen::MatrixXd::Ones(40, 3);
  ArticulatorySeries z;
  z.values = Eigen::MatrixXd::Zero(41, 6);
  CHECK(make_pair("u", t, z).frame_count() == 40);
  z.values = Eigen::MatrixXd::Zero(39, 6);
  const auto p = make_pair("u", t, z);
  CHECK(p.features.rows() == 39);
  CHECK(p.targets.rows() == 39);
  z.values = Eigen::MatrixXd::Zero(38, 6);
  CHECK_THROWS_AS(make_pair("u", t, z), ValidationError);
}

TEST_CASE("aggregate: constant matrix, published rows, undefined entries, errors") {
  const std::vector<std::string> six_speakers{"s1", "s2", "s3", "s4", "s5", "s6"};
  const std::vector<std::string> params{"jaw_height", "tongue_body", "tongue_dorsum", "tongue_tip", "lip_protrusion", "lip_height"};
  using Row = std::vector<std::optional<double>>;
  {
    const auto r = aggregate(six_speakers, params, std::vector<Row>(6, Row(6, 0.5)));
    CHECK(r.grand_mean == doctest::Approx(0.5).epsilon(1e-15));
    REQUIRE(r.standard_error.has_value());
    CHECK(*r.standard_error < 1e-15);
  }
  {
    // Linear speaker averages; each speaker row is constant so the speaker mean is the value.
    const std::vector<double> speakers{0.729, 0.704, 0.666, 0.658, 0.623, 0.693};
    std::vector<Row> m;
    for (const double s : speakers) m.push_back(Row(6, s));
    const auto r = aggregate(six_speakers, params, m);
    CHECK(std::abs(r.grand_mean - 0.679) <= 0.0005);
  }
  {
    const std::vector<double> per_param{0.715, 0.750, 0.625, 0.627, 0.621, 0.736};
    std::vector<Row> m(6, Row(6));
    for (auto& row : m)
      for (std::size_t p = 0; p < 6; ++p) row[p] = per_param[p];
    const auto r = aggregate(six_speakers, params, m);
    CHECK(std::abs(r.grand_mean - 0.679) <= 0.0005);
    for (std::size_t p = 0; p < 6; ++p) CHECK(r.parameter_means[p] == doctest::Approx(per_param[p]));
  }
  {
    std::vector<Row> m{{0.2, 0.4}, {0.6, std::nullopt}};
    const auto r = aggregate({"a", "b"}, {"p", "q"}, m);
    CHECK(r.speaker_means[0] == doctest::Approx(0.3));
    CHECK(r.speaker_means[1] == doctest::Approx(0.6));
    CHECK(r.grand_mean == doctest::Approx(0.45));
    CHECK(r.parameter_means[1] == doctest::Approx(0.4));
    CHECK(r.warnings.size() == 1);
    // sample std of {0.3, 0.6} over sqrt(2)
    CHECK(*r.standard_error == doctest::Approx(std::sqrt(0.045) / std::sqrt(2.0)));
  }
  CHECK_FALSE(aggregate({"a"}, {"p"}, {{0.4}}).standard_error.has_value());
  CHECK_THROWS_AS(aggregate({"a", "b"}, {"p", "q"}, {{0.1, 0.2}, {0.3}}), ValidationError);
  CHECK_THROWS_AS(aggregate({"a"}, {"p", "q"}, {{0.1, 0.2}, {0.3, 0.4}}), ValidationError);
  CHECK_THROWS_AS(aggregate({"a"}, {"p"}, {{std::nullopt}}), ValidationError);
}
