#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "test_support.hpp"

using namespace fieldtrack;
using fieldtrack::fixtures::max_abs;
using fieldtrack::fixtures::min_eigenvalue;

namespace {

MeasurementFrame exact_frame(const FieldTemplate& tmpl, const Homography& H, std::vector<std::size_t> which) {
  MeasurementFrame f{0, {}};
  for (const auto i : which) f.observations.push_back({tmpl.at(i).id, apply_homography(H, tmpl.at(i).position)});
  return f;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

HomographyFilterState random_state(CounterRng& rng, const FieldTemplate& tmpl) {
  HomographyFilterState s;
  const auto n = static_cast<Eigen::Index>(tmpl.size());
  s.field_mean.resize(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) s.field_mean.segment<2>(2 * i) = tmpl.at(static_cast<std::size_t>(i)).position.vec();
  s.h_mean = fixtures::random_field_homography(rng).params();
  s.cov = Eigen::MatrixXd::Identity(2 * n + 8, 2 * n + 8);
  return s;
}

}  // namespace

TEST(EkfInit, RecoversHomographyFromExactObservations) {
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  CounterRng rng(10);
  const auto H = fixtures::random_field_homography(rng);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Zero(), Mat8::Identity());
  const auto s = ekf_init(exact_frame(tmpl, H, {0, 2, 5, 7, 9, 11}), tmpl, noise, {});
  EXPECT_LT((s.h_mean - H.params()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(reconstruct_homography(s).max_abs_diff(H), 1e-6);
  for (std::size_t i = 0; i < tmpl.size(); ++i) EXPECT_EQ(s.field_point(i), tmpl.at(i).position);
  EXPECT_EQ(s.cov.topLeftCorner(24, 24), Eigen::MatrixXd::Zero(24, 24));
  EXPECT_EQ(Mat8(s.h_cov()), Mat8::Identity());
  EXPECT_TRUE(s.cov.topRightCorner(24, 8).isZero(0.0));
}

TEST(EkfInit, IdentityMapping) {
  std::vector<TemplateKeypoint> kps{{0, {0, 0}}, {1, {10, 0}}, {2, {10, 10}}, {3, {0, 10}}, {4, {5, 3}}};
  const FieldTemplate tmpl(kps, 20, 20);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Zero(), Mat8::Identity());
  const auto s = ekf_init(exact_frame(tmpl, Homography::identity(), {0, 1, 2, 3, 4}), tmpl, noise, {});
  Vec8 expected;
  expected << 1, 0, 0, 0, 1, 0, 0, 0;
  EXPECT_LT((s.h_mean - expected).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(EkfInit, ThreeObservationsIsInsufficient) {
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Zero(), Mat8::Identity());
  try {
    ekf_init(exact_frame(tmpl, Homography::identity(), {0, 1, 5}), tmpl, noise, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPoints);
  }
}

TEST(EkfInit, CollinearObservationsAreDegenerate) {
  const auto tmpl = FieldTemplate::uniform_grid(5, 3);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Zero(), Mat8::Identity());
  try {
    ekf_init(exact_frame(tmpl, Homography::identity(), {0, 1, 2, 3, 4}), tmpl, noise, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateConfiguration);
  }
}

TEST(ReconstructHomography, IdentityParams) {
  HomographyFilterState s;
  s.field_mean = Eigen::VectorXd::Zero(8);
  s.h_mean << 1, 0, 0, 0, 1, 0, 0, 0;
  EXPECT_EQ(reconstruct_homography(s).matrix(), Eigen::Matrix3d::Identity());
}

TEST(EkfPredict, IdentityMotionZeroNoiseIsNoOp) {
  CounterRng rng(11);
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  auto s = random_state(rng, tmpl);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Zero(), Mat8::Identity());
  const auto p = ekf_predict(s, AffineSimilarity::identity(), noise);
  EXPECT_EQ(p.h_mean, s.h_mean);
  EXPECT_EQ(p.field_mean, s.field_mean);
  EXPECT_EQ(p.cov, s.cov);
}

TEST(EkfPredict, TranslationExpandsByHand) {
  CounterRng rng(12);
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  const auto s = random_state(rng, tmpl);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Zero(), Mat8::Identity());
  const double tx = 7.5, ty = -3.25;
  const auto p = ekf_predict(s, AffineSimilarity::translation(tx, ty), noise);
  const Vec8& h = s.h_mean;
  // Column j: (h1j + tx h3j, h2j + ty h3j, h3j) with h33 = 1.
  EXPECT_NEAR(p.h_mean(0), h(0) + tx * h(2), 1e-12);
  EXPECT_NEAR(p.h_mean(1), h(1) + ty * h(2), 1e-12);
  EXPECT_EQ(p.h_mean(2), h(2));
  EXPECT_NEAR(p.h_mean(3), h(3) + tx * h(5), 1e-12);
  EXPECT_NEAR(p.h_mean(4), h(4) + ty * h(5), 1e-12);
  EXPECT_EQ(p.h_mean(5), h(5));
  EXPECT_NEAR(p.h_mean(6), h(6) + tx, 1e-12);
  EXPECT_NEAR(p.h_mean(7), h(7) + ty, 1e-12);
}

TEST(EkfPredict, MatchesAffineTimesHomography) {
  CounterRng rng(13);
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Identity() * 0.01, Mat8::Identity());
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_state(rng, tmpl);
    const auto A = fixtures::random_similarity(rng, 0.1, 0.1, 30.0);
    const auto p = ekf_predict(s, A, noise);
    const Eigen::Matrix3d before = reconstruct_homography(s).matrix();
    const Eigen::Matrix3d after = reconstruct_homography(p).matrix();
    const Eigen::Matrix3d oracle = A.matrix() * before;
    EXPECT_LT((after - oracle).cwiseAbs().maxCoeff() / std::max(1.0, oracle.cwiseAbs().maxCoeff()), 1e-12);
    EXPECT_EQ(after.row(2), before.row(2));
    EXPECT_EQ(p.field_mean, s.field_mean);
  }
}

TEST(EkfPredict, CovarianceUsesLinearizedTransition) {
  CounterRng rng(14);
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  auto s = random_state(rng, tmpl);
  Eigen::MatrixXd L = Eigen::MatrixXd::Random(s.dim(), s.dim());
  s.cov = L * L.transpose();
  const Mat8 Q = Mat8::Identity() * 0.5;
  const auto noise = HomographyNoise::known_template(tmpl.size(), Q, Mat8::Identity());
  const auto A = fixtures::random_similarity(rng);
  const auto p = ekf_predict(s, A, noise);
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(s.dim(), s.dim());
  M.bottomRightCorner<8, 8>() = homography_transition(A);
  Eigen::MatrixXd expected = M * s.cov * M.transpose();
  expected.bottomRightCorner<8, 8>() += Q;
  EXPECT_LT(max_abs(p.cov - expected), 1e-9 * max_abs(expected));
  EXPECT_LT(max_abs(p.cov - p.cov.transpose()), 1e-12);
}

TEST(EkfPredict, DimensionMismatch) {
  CounterRng rng(15);
  const auto s = random_state(rng, FieldTemplate::uniform_grid(3, 2));
  const auto noise = HomographyNoise::known_template(4, Mat8::Zero(), Mat8::Identity());
  try {
    ekf_predict(s, AffineSimilarity::identity(), noise);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(MeasurementJacobian, HandExample) {
  std::vector<TemplateKeypoint> kps{{0, {0, 0}}, {1, {3, 4}}, {2, {10, 0}}, {3, {10, 10}}};
  const FieldTemplate tmpl(kps, 20, 20);
  CounterRng rng(0);
  HomographyFilterState s = random_state(rng, tmpl);
  s.h_mean << 1, 0, 0, 0, 1, 0, 0, 0;
  const std::vector<std::size_t> active{1};
  const auto J = measurement_jacobian(s, active);
  ASSERT_EQ(J.rows(), 2);
  ASSERT_EQ(J.cols(), 16);
  const Eigen::Index off = s.h_offset();
  EXPECT_EQ(J(0, off + 0), 3.0);   // du/dh11 = X
  EXPECT_EQ(J(0, off + 2), -9.0);  // du/dh31 = -u X
  EXPECT_EQ(J(0, 2), 1.0);         // du/dX
  EXPECT_EQ(J(0, 3), 0.0);
  EXPECT_EQ(J(1, 3), 1.0);
  EXPECT_EQ(J(0, off + 3), 4.0);
  EXPECT_EQ(J(0, off + 5), -12.0);
  EXPECT_EQ(J(0, off + 6), 1.0);
  EXPECT_EQ(J(1, off + 7), 1.0);
  EXPECT_EQ(J(1, off + 2), -12.0);
  EXPECT_TRUE(J.leftCols(2).isZero(0.0));
  EXPECT_TRUE(J.middleCols(4, 4).isZero(0.0));
}

TEST(MeasurementJacobian, MatchesCentralDifferences) {
  CounterRng rng(16);
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  const auto active = std::vector<std::size_t>{0, 3, 5, 6, 11};
  const double step = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_state(rng, tmpl);
    for (Eigen::Index i = 0; i < s.field_mean.size(); ++i) s.field_mean(i) += rng.uniform(-1, 1);
    const auto J = measurement_jacobian(s, active);
    Eigen::MatrixXd fd(J.rows(), J.cols());
    for (Eigen::Index c = 0; c < s.dim(); ++c) {
      auto plus = s, minus = s;
      const double scale = std::max(1.0, std::abs(c < s.h_offset() ? s.field_mean(c) : s.h_mean(c - s.h_offset())));
      const double d = step * scale;
      if (c < s.h_offset()) {
        plus.field_mean(c) += d;
        minus.field_mean(c) -= d;
      } else {
        plus.h_mean(c - s.h_offset()) += d;
        minus.h_mean(c - s.h_offset()) -= d;
      }
      fd.col(c) = (predict_measurements(plus, active) - predict_measurements(minus, active)) / (2 * d);
    }
    for (Eigen::Index r = 0; r < J.rows(); ++r) {
      for (Eigen::Index c = 0; c < J.cols(); ++c) {
        const double ref = std::abs(fd(r, c));
        if (ref < 1e-8 && std::abs(J(r, c)) < 1e-8) continue;
        EXPECT_LT(std::abs(J(r, c) - fd(r, c)) / std::max(ref, 1e-3), 1e-4) << "row " << r << " col " << c;
      }
    }
  }
}

TEST(MeasurementJacobian, EmptyActiveSet) {
  CounterRng rng(17);
  const auto s = random_state(rng, FieldTemplate::uniform_grid(3, 2));
  const auto J = measurement_jacobian(s, std::vector<std::size_t>{});
  EXPECT_EQ(J.rows(), 0);
  EXPECT_EQ(J.cols(), s.dim());
}

TEST(MeasurementJacobian, PointAtInfinity) {
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  CounterRng rng(18);
  auto s = random_state(rng, tmpl);
  s.h_mean << 1, 0, -1.0 / 52.5, 0, 1, 0, 0, 0;  // D = 0 at X = 52.5
  try {
    measurement_jacobian(s, std::vector<std::size_t>{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NumericalDegeneracy);
  }
}

TEST(EkfUpdate, ZeroInnovationKeepsMeanAndContracts) {
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  CounterRng rng(19);
  const auto H = fixtures::random_field_homography(rng);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Zero(), Mat8::Identity() * 1e-4);
  const auto s = ekf_init(exact_frame(tmpl, H, all_indices(tmpl.size())), tmpl, noise, {});
  auto kp = KeypointFilterState::empty(tmpl.size());
  kp.mean = predict_measurements(s, all_indices(tmpl.size()));
  kp.cov = Eigen::MatrixXd::Identity(kp.mean.size(), kp.mean.size()) * 4.0;
  const auto active = std::vector<std::size_t>{0, 4, 7, 10};
  double cond = 0;
  const auto u = ekf_update(s, kp, active, {}, &cond);
  EXPECT_LT((u.h_mean - s.h_mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(u.h_cov().trace(), s.h_cov().trace());
  EXPECT_GE(cond, 1.0);
  EXPECT_GT(min_eigenvalue(u.cov), -1e-12);
}

TEST(EkfUpdate, EmptyActiveSetReturnsStateUnchanged) {
  CounterRng rng(20);
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  const auto s = random_state(rng, tmpl);
  const auto u = ekf_update(s, KeypointFilterState::empty(tmpl.size()), std::vector<std::size_t>{});
  EXPECT_EQ(u.h_mean, s.h_mean);
  EXPECT_EQ(u.cov, s.cov);
}

TEST(EkfUpdate, SingularInnovation) {
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  CounterRng rng(21);
  auto s = random_state(rng, tmpl);
  s.cov.setZero();
  auto kp = KeypointFilterState::empty(tmpl.size());
  kp.mean = predict_measurements(s, all_indices(tmpl.size()));
  try {
    ekf_update(s, kp, std::vector<std::size_t>{0, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularInnovation);
  }
}

TEST(EkfUpdate, IllConditionedInnovationIsRejected) {
  const auto tmpl = FieldTemplate::uniform_grid(3, 2);
  CounterRng rng(22);
  auto s = random_state(rng, tmpl);
  auto kp = KeypointFilterState::empty(tmpl.size());
  kp.mean = predict_measurements(s, all_indices(tmpl.size()));
  kp.cov = Eigen::MatrixXd::Identity(12, 12);
  UpdateOptions opts;
  opts.max_condition = 1.0 + 1e-9;
  double cond = 0;
  EXPECT_THROW(ekf_update(s, kp, std::vector<std::size_t>{0, 1, 2, 3}, opts, &cond), Error);
  EXPECT_GT(cond, opts.max_condition);
}

TEST(HomographyFilter, KnownTemplateFieldBlockIsBitwiseStable) {
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  CounterRng rng(23);
  const auto H = fixtures::random_field_homography(rng);
  const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Identity() * 1e-6, Mat8::Identity() * 1e-3);
  auto s = ekf_init(exact_frame(tmpl, H, all_indices(tmpl.size())), tmpl, noise, {});
  const Eigen::VectorXd field0 = s.field_mean;
  const auto n2 = s.h_offset();
  for (int step = 0; step < 200; ++step) {
    s = ekf_predict(s, fixtures::random_similarity(rng, 0.01, 0.01, 3.0), noise);
    auto kp = KeypointFilterState::empty(tmpl.size());
    kp.mean = predict_measurements(s, all_indices(tmpl.size()));
    for (Eigen::Index i = 0; i < kp.mean.size(); ++i) kp.mean(i) += rng.normal() * 2.0;
    kp.cov = Eigen::MatrixXd::Identity(kp.mean.size(), kp.mean.size()) * 4.0;
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < tmpl.size(); ++i)
      if (rng.uniform() < 0.7) active.push_back(i);
    s = ekf_update(s, kp, active);
    ASSERT_EQ(s.field_mean, field0);
    ASSERT_TRUE(s.cov.topRows(n2).isZero(0.0));
    ASSERT_TRUE(s.cov.leftCols(n2).isZero(0.0));
    ASSERT_LT(max_abs(s.cov - s.cov.transpose()), 1e-12 * std::max(1.0, max_abs(s.cov)));
    ASSERT_GT(min_eigenvalue(s.h_cov()), -1e-9 * std::max(1.0, max_abs(s.cov)));
  }
}

TEST(HomographyFilter, UncertainTemplateStaysSymmetricPsd) {
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  CounterRng rng(24);
  const auto H = fixtures::random_field_homography(rng);
  HomographyNoise noise{std::vector<Eigen::Matrix2d>(tmpl.size(), Eigen::Matrix2d::Identity() * 0.01),
                        Mat8::Identity() * 1e-6, Mat8::Identity() * 1e-3};
  auto s = ekf_init(exact_frame(tmpl, H, all_indices(tmpl.size())), tmpl, noise, {});
  for (int step = 0; step < 100; ++step) {
    s = ekf_predict(s, fixtures::random_similarity(rng, 0.01, 0.01, 3.0), noise);
    auto kp = KeypointFilterState::empty(tmpl.size());
    kp.mean = predict_measurements(s, all_indices(tmpl.size()));
    kp.cov = Eigen::MatrixXd::Identity(kp.mean.size(), kp.mean.size()) * 4.0;
    s = ekf_update(s, kp, std::vector<std::size_t>{0, 2, 5, 9});
    const double scale = std::max(1.0, max_abs(s.cov));
    ASSERT_LT(max_abs(s.cov - s.cov.transpose()), 1e-12 * scale);
    ASSERT_GT(min_eigenvalue(s.cov), -1e-9 * scale);
  }
}

TEST(HomographyFilter, Deterministic) {
  const auto tmpl = FieldTemplate::uniform_grid(4, 3);
  auto run = [&] {
    CounterRng rng(25);
    const auto H = fixtures::random_field_homography(rng);
    const auto noise = HomographyNoise::known_template(tmpl.size(), Mat8::Identity() * 1e-6, Mat8::Identity() * 1e-3);
    auto s = ekf_init(exact_frame(tmpl, H, all_indices(tmpl.size())), tmpl, noise, {});
    for (int step = 0; step < 30; ++step) {
      s = ekf_predict(s, fixtures::random_similarity(rng), noise);
      auto kp = KeypointFilterState::empty(tmpl.size());
      kp.mean = predict_measurements(s, all_indices(tmpl.size()));
      for (Eigen::Index i = 0; i < kp.mean.size(); ++i) kp.mean(i) += rng.normal();
      kp.cov = Eigen::MatrixXd::Identity(kp.mean.size(), kp.mean.size());
      s = ekf_update(s, kp, std::vector<std::size_t>{1, 2, 3, 8});
    }
    return s;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.h_mean, b.h_mean);
  EXPECT_EQ(a.cov, b.cov);
}
