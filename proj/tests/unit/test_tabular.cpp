#include "midl/tabular/bounds.hpp"
#include "midl/tabular/suites.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace midl;
using namespace midl::tabular;

namespace {

TabularMdp<double> single_state(double reward, double gamma) {
  TabularMdp<double> m;
  m.num_states = 1;
  m.num_actions = 1;
  m.transitions = Matrix::Ones(1, 1);
  m.rewards = Matrix::Constant(1, 1, reward);
  m.discount = gamma;
  m.initial = Vector::Ones(1);
  return m;
}

// Oracle: plain value iteration on Q, independent of the LU path.
Matrix value_iteration(const TabularMdp<double>& m, const Matrix& pi, double tol) {
  Matrix q = Matrix::Zero(m.num_states, m.num_actions);
  for (int it = 0; it < 100000; ++it) {
    Matrix next(m.num_states, m.num_actions);
    const Vector v = (q.cwiseProduct(pi)).rowwise().sum();
    for (int s = 0; s < m.num_states; ++s)
      for (int a = 0; a < m.num_actions; ++a)
        next(s, a) = m.rewards(s, a) + m.discount * m.transitions.row(m.row(s, a)).dot(v);
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change < tol) break;
  }
  return q;
}

// Oracle: Monte-Carlo discounted visitation, terminating each step w.p. 1 - gamma.
Vector monte_carlo_occupancy(const TabularMdp<double>& m, const Matrix& pi, int episodes, Rng& rng) {
  Vector visits = Vector::Zero(m.num_states);
  std::uniform_real_distribution<double> u(0, 1);
  auto sample = [&](const Eigen::Ref<const Eigen::RowVectorXd>& p) {
    double x = u(rng), acc = 0;
    for (Index i = 0; i < p.size(); ++i) {
      acc += p(i);
      if (x < acc) return static_cast<int>(i);
    }
    return static_cast<int>(p.size() - 1);
  };
  for (int e = 0; e < episodes; ++e) {
    int s = sample(m.initial.transpose());
    while (true) {
      visits(s) += 1;
      if (u(rng) > m.discount) break;
      const int a = sample(pi.row(s));
      s = sample(m.transitions.row(m.row(s, a)));
    }
  }
  return visits / visits.sum();
}

// Oracle: penalized system solved as one dense linear system built from
// Kronecker-style indexing rather than pair_transition().
Matrix direct_penalized(const TabularMdp<double>& mixed, const Matrix& pi, const Matrix& adjusted_reward) {
  const int S = mixed.num_states, A = mixed.num_actions;
  Matrix sys = Matrix::Identity(S * A, S * A);
  Vector rhs(S * A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      rhs(s * A + a) = adjusted_reward(s, a);
      for (int s2 = 0; s2 < S; ++s2)
        for (int a2 = 0; a2 < A; ++a2)
          sys(s * A + a, s2 * A + a2) -= mixed.discount * mixed.transitions(s * A + a, s2) * pi(s2, a2);
    }
  const Vector q = sys.fullPivLu().solve(rhs);
  Matrix out(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) out(s, a) = q(s * A + a);
  return out;
}

struct Instance {
  TabularMdp<double> truth, model;
  Matrix pi, pi_b;
};

Instance random_instance(std::uint64_t seed, double noise = 0.1) {
  Rng rng(seed);
  Instance in;
  in.truth = random_mdp<double>(5, 3, 0.9, rng);
  in.model = perturb_mdp(in.truth, noise, noise, rng);
  in.pi = random_policy<double>(5, 3, 1.0, rng);
  in.pi_b = random_policy<double>(5, 3, 1.0, rng);
  return in;
}

}  // namespace

TEST(PolicyEval, SingleStateGeometricSeries) {
  const auto m = single_state(1.0, 0.9);
  EXPECT_NEAR(exact_policy_eval(m, Matrix(Matrix::Ones(1, 1)))(0, 0), 10.0, 1e-12);
}

TEST(PolicyEval, ZeroRewardGivesZero) {
  Rng rng(1);
  auto m = random_mdp<double>(4, 2, 0.9, rng);
  m.rewards.setZero();
  EXPECT_EQ(exact_policy_eval(m, uniform_policy<double>(4, 2)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PolicyEval, MatchesValueIterationAndHasSmallResidual) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto m = random_mdp<double>(5, 3, 0.9, rng);
    const auto pi = random_policy<double>(5, 3, 1.0, rng);
    const Matrix q = exact_policy_eval(m, pi);
    EXPECT_LT((q - value_iteration(m, pi, 1e-13)).cwiseAbs().maxCoeff(), 1e-8);
    const Vector residual = flatten<double>(q) - flatten<double>(m.rewards) - m.discount * pair_transition(m, pi) * flatten<double>(q);
    EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(PolicyEval, ValidationRejectsBadInputs) {
  auto m = single_state(1.0, 0.9);
  m.discount = 1.0;
  EXPECT_THROW(m.validate(), Error);
  m.discount = 0.9;
  m.transitions(0, 0) = 0.5;
  EXPECT_THROW(m.validate(), Error);
  m.transitions(0, 0) = 1.0;
  EXPECT_NO_THROW(m.validate());
  EXPECT_THROW(validate_policy(m, Matrix(Matrix::Constant(1, 1, 0.7))), Error);
}

TEST(Occupancy, AbsorbingState) {
  const auto m = single_state(0.0, 0.9);
  EXPECT_NEAR(state_occupancy(m, Matrix(Matrix::Ones(1, 1)))(0), 1.0, 1e-14);
}

TEST(Occupancy, TwoStateCycle) {
  TabularMdp<double> m;
  m.num_states = 2;
  m.num_actions = 1;
  m.transitions.resize(2, 2);
  m.transitions << 0, 1, 1, 0;
  m.rewards = Matrix::Zero(2, 1);
  m.initial = Vector::Constant(2, 0.5);
  m.discount = 0.9;
  const Vector d = state_occupancy(m, Matrix(Matrix::Ones(2, 1)));
  EXPECT_NEAR(d(0), 0.5, 1e-14);
  EXPECT_NEAR(d(1), 0.5, 1e-14);
}

TEST(Occupancy, MatchesMonteCarlo) {
  Rng rng(77);
  auto m = random_mdp<double>(5, 3, 0.9, rng);
  m.initial = dirichlet<double>(5, 1.0, rng);
  const auto pi = random_policy<double>(5, 3, 1.0, rng);
  const Vector exact = state_occupancy(m, pi);
  const Vector mc = monte_carlo_occupancy(m, pi, 1000000, rng);
  EXPECT_LT((exact - mc).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Occupancy, TablesSumToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(seed);
    const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
    for (const Matrix* t : {&occ.behavior, &occ.model, &occ.beta, &occ.data, &occ.omega, &occ.rho}) {
      EXPECT_NEAR(t->sum(), 1.0, 1e-10);
      EXPECT_GE(t->minCoeff(), 0.0);
    }
    EXPECT_NO_THROW(require_distribution(occ.beta, "beta"));
  }
}

TEST(Occupancy, ReturnEqualsOccupancyWeightedReward) {
  const auto in = random_instance(3);
  const double j = expected_return(in.truth, in.pi);
  const double via_d = occupancy(in.truth, in.pi).cwiseProduct(in.truth.rewards).sum() / (1 - 0.9);
  EXPECT_NEAR(j, via_d, 1e-12);
}

TEST(DomainBackup, SingleStateClosedForm) {
  const auto m = single_state(1.0, 0.9);
  OccupancyTables<double> occ;
  // eta = (omega - d) / beta = 0.2
  occ.omega = Matrix::Constant(1, 1, 0.6);
  occ.data = Matrix::Constant(1, 1, 0.4);
  occ.beta = Matrix::Constant(1, 1, 1.0);
  const auto fp = domain_backup_fixed_point(m, m, Matrix(Matrix::Ones(1, 1)), occ, 0.5, 0.5);
  EXPECT_TRUE(fp.converged);
  EXPECT_NEAR(fp.q(0, 0), 9.0, 1e-8);
}

TEST(DomainBackup, OmegaEqualsDataIsUnpenalized) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_instance(seed);
    auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
    occ.omega = occ.data;
    const auto fp = domain_backup_fixed_point(in.truth, in.model, in.pi, occ, 0.5, 3.0);
    const Matrix plain = exact_policy_eval(mix(in.truth, in.model, 0.5), in.pi);
    EXPECT_LT((fp.q - plain).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(DomainBackup, LambdaZeroIsUnpenalized) {
  const auto in = random_instance(4);
  auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.3);
  const auto fp = domain_backup_fixed_point(in.truth, in.model, in.pi, occ, 0.3, 0.0);
  EXPECT_LT((fp.q - exact_policy_eval(mix(in.truth, in.model, 0.3), in.pi)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(DomainBackup, ContractionFactorAtMostGamma) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(seed);
    auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
    Rng rng(seed);
    occ.omega = dirichlet<double>(15, 1.0, rng).reshaped(5, 3);
    const auto fp = domain_backup_fixed_point(in.truth, in.model, in.pi, occ, 0.5, 2.0);
    EXPECT_TRUE(fp.converged);
    EXPECT_LE(fp.max_contraction, 0.9 + 1e-6);
  }
}

TEST(DomainBackup, ZeroDenominatorNamesPair) {
  const auto m = single_state(1.0, 0.9);
  OccupancyTables<double> occ;
  occ.omega = Matrix::Constant(1, 1, 0.5);
  occ.data = Matrix::Constant(1, 1, 0.2);
  occ.beta = Matrix::Zero(1, 1);
  try {
    domain_backup_fixed_point(m, m, Matrix(Matrix::Ones(1, 1)), occ, 0.5, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UndefinedPenalty);
    EXPECT_NE(std::string(e.what()).find("s=0, a=0"), std::string::npos);
  }
  occ.omega = occ.data;
  EXPECT_NO_THROW(domain_backup_fixed_point(m, m, Matrix(Matrix::Ones(1, 1)), occ, 0.5, 1.0));
}

TEST(ComboBackup, RhoEqualsDataIsUnpenalized) {
  const auto in = random_instance(8);
  const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
  const auto fp = combo_backup_fixed_point(in.truth, in.model, in.pi, occ.data, occ.data, 0.5, 4.0);
  EXPECT_LT((fp.q - exact_policy_eval(mix(in.truth, in.model, 0.5), in.pi)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ComboBackup, MatchesDomainWhenOmegaIsRho) {
  const auto in = random_instance(9);
  auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
  occ.omega = occ.rho;
  const auto a = domain_backup_fixed_point(in.truth, in.model, in.pi, occ, 0.5, 2.0);
  const auto b = combo_backup_fixed_point(in.truth, in.model, in.pi, occ.rho, occ.data, 0.5, 2.0);
  EXPECT_EQ(a.q, b.q);
}

TEST(ComboBackup, IterationMatchesDirectSolve) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_instance(100 + seed);
    const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
    Rng rng(seed);
    const Matrix rho = dirichlet<double>(15, 1.0, rng).reshaped(5, 3);
    const double lambda = 1.7, f = 0.5;
    const auto fp = combo_backup_fixed_point(in.truth, in.model, in.pi, rho, occ.data, f, lambda);
    Matrix eta(5, 3);
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 3; ++a)
        eta(s, a) = (rho(s, a) - occ.data(s, a)) / ((1 - f) * occ.data(s, a) + f * rho(s, a));
    const auto mixed = mix(in.truth, in.model, f);
    const Matrix direct = direct_penalized(mixed, in.pi, mixed.rewards - lambda * eta);
    EXPECT_LT((fp.q - direct).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Xi, EqualPoliciesGiveOne) {
  const auto in = random_instance(5);
  const auto occ = make_occupancy_tables(in.truth, in.model, in.pi_b, in.pi_b, 0.5);
  const Vector x = xi<double>(occ.behavior_state(), occ.model_state(), in.pi_b, in.pi_b, 0.5);
  EXPECT_LT((x.array() - 1.0).abs().maxCoeff(), 1e-14);
}

TEST(Xi, FullModelFractionGivesOne) {
  const auto in = random_instance(6);
  const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 1.0);
  const Vector x = xi<double>(occ.behavior_state(), occ.model_state(), in.pi, in.pi_b, 1.0);
  EXPECT_LT((x.array() - 1.0).abs().maxCoeff(), 1e-14);
}

TEST(Xi, TwoActionRatioExample) {
  Matrix pi(1, 2), pi_b(1, 2);
  pi << 1.0 / 3, 2.0 / 3;
  pi_b << 2.0 / 3, 1.0 / 3;  // pi_b / pi = {2, 0.5}
  const Vector x = xi<double>(Vector::Ones(1), Vector::Ones(1), pi, pi_b, 0.0);
  EXPECT_NEAR(x(0), 4.0, 1e-14);
}

TEST(Xi, AtLeastOneAndRejectsMissingSupport) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(seed);
    const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
    EXPECT_GE(xi<double>(occ.behavior_state(), occ.model_state(), in.pi, in.pi_b, 0.5).minCoeff(), 1.0);
  }
  Matrix pi(1, 2), pi_b(1, 2);
  pi << 1, 0;
  pi_b << 0.5, 0.5;
  EXPECT_THROW(xi<double>(Vector::Ones(1), Vector::Ones(1), pi, pi_b, 0.5), Error);
}

TEST(DeltaL, ExactModelAndNoSamplingErrorIsZero) {
  const auto in = random_instance(10);
  const auto occ = make_occupancy_tables(in.truth, in.truth, in.pi, in.pi_b, 0.5);
  const auto c = model_error_constants(in.truth, in.truth, Matrix::Constant(5, 3, 10.0), 1.0);
  const Vector x = xi<double>(occ.behavior_state(), occ.model_state(), in.pi, in.pi_b, 0.5);
  EXPECT_EQ(delta_l(c, occ, x, in.pi, in.pi_b, 0.5, 0.9), 0.0);
}

TEST(DeltaL, SamplingTermOnlyAtZeroModelFraction) {
  const auto in = random_instance(11);
  const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.0);
  auto c = model_error_constants(in.truth, in.model, Matrix::Constant(5, 3, 16.0), 2.0);
  c.c_rt = 0.3;
  const Vector x = xi<double>(occ.behavior_state(), occ.model_state(), in.pi, in.pi_b, 0.0);
  const double d1 = delta_l(c, occ, x, in.pi, in.pi_b, 0.0, 0.9);
  c.c_rt = 0.6;
  const double d2 = delta_l(c, occ, x, in.pi, in.pi_b, 0.0, 0.9);
  EXPECT_NEAR(d2, 2 * d1, 1e-12 * d2);
  // Numerator C R_max / ((1-gamma) min sqrt|D|) = 0.6 * 2 / (0.1 * 4).
  double denom = 1e300;
  const Vector bs = occ.behavior_state();
  for (int s = 0; s < 5; ++s) {
    double hi = 0;
    for (int a = 0; a < 3; ++a) hi = std::max(hi, in.pi_b(s, a) / in.pi(s, a));
    denom = std::min(denom, (x(s) - 1) * occ.data.row(s).sum() / (bs(s) * hi));
  }
  EXPECT_NEAR(d2, 3.0 / denom, 1e-12 * d2);
}

TEST(DeltaL, DualPathAgreement) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(200 + seed, 0.2);
    const double f = 0.4, g = 0.9;
    const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, f);
    Rng rng(seed);
    Matrix counts(5, 3);
    for (Index i = 0; i < counts.size(); ++i) counts.data()[i] = std::uniform_int_distribution<int>(1, 50)(rng);
    auto c = model_error_constants(in.truth, in.model, counts, 1.0);
    c.c_rt = 0.25;
    const Vector x = xi<double>(occ.behavior_state(), occ.model_state(), in.pi, in.pi_b, f);
    const double formula = delta_l(c, occ, x, in.pi, in.pi_b, f, g);

    // Assembled from sub-terms computed directly from the MDP tables.
    double max_reward_err = 0, max_tv = 0;
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 3; ++a) {
        max_reward_err = std::max(max_reward_err, std::abs(in.truth.rewards(s, a) - in.model.rewards(s, a)));
        double l1 = 0;
        for (int s2 = 0; s2 < 5; ++s2)
          l1 += std::abs(in.truth.transitions(s * 3 + a, s2) - in.model.transitions(s * 3 + a, s2));
        max_tv = std::max(max_tv, l1 / 2);
      }
    const Vector db = state_occupancy(in.truth, in.pi_b);
    const Vector dm = state_occupancy(in.model, in.pi);
    double denom = 1e300;
    for (int s = 0; s < 5; ++s) {
      double hi = 0, lo = 1e300;
      for (int a = 0; a < 3; ++a) {
        hi = std::max(hi, in.pi_b(s, a) / in.pi(s, a));
        lo = std::min(lo, in.pi_b(s, a) / in.pi(s, a));
      }
      const double top = (1 - f) * db(s) * hi + f * dm(s);
      const double xi_s = top / ((1 - f) * db(s) * lo + f * dm(s));
      denom = std::min(denom, (xi_s - 1) * db(s) / top);
    }
    const double sampling = (1 - f) * 0.25 * 1.0 / ((1 - g) * std::sqrt(counts.minCoeff()));
    const double model = f * (max_reward_err + 2 * g * 1.0 / (1 - g) * max_tv);
    const double assembled = sampling / denom + model / denom;
    EXPECT_NEAR(formula, assembled, 1e-12 * std::abs(assembled)) << seed;
  }
}

TEST(DeltaL, NonPositiveDenominatorIsUnsatisfiable) {
  const auto in = random_instance(12);
  const auto occ = make_occupancy_tables(in.truth, in.model, in.pi_b, in.pi_b, 0.5);  // xi == 1
  const auto c = model_error_constants(in.truth, in.model, Matrix::Ones(5, 3), 1.0);
  const Vector x = xi<double>(occ.behavior_state(), occ.model_state(), in.pi_b, in.pi_b, 0.5);
  try {
    delta_l(c, occ, x, in.pi_b, in.pi_b, 0.5, 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsatisfiable);
  }
}

TEST(Theorem1, NoPenaltyNoErrorGivesExactValues) {
  const auto in = random_instance(13);
  auto occ = make_occupancy_tables(in.truth, in.truth, in.pi, in.pi_b, 0.5);
  occ.omega = occ.data;
  const auto c = model_error_constants(in.truth, in.truth, Matrix::Ones(5, 3), 1.0);
  const auto rep = check_theorem1(in.truth, in.truth, in.truth, in.pi, in.pi_b, occ, 0.5, 7.0, c);
  EXPECT_LT((rep.v - rep.v_hat).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Theorem1, PremiseFailureIsReportedNotAsserted) {
  // Normalised omega and d cannot satisfy the premise at every state.
  const auto in = random_instance(14, 0.5);
  const auto occ = make_occupancy_tables(in.truth, in.model, in.pi, in.pi_b, 0.5);
  const auto c = model_error_constants(in.truth, in.model, Matrix::Ones(5, 3), 1.0);
  const auto rep = check_theorem1(in.truth, in.truth, in.model, in.pi, in.pi_b, occ, 0.5, 0.0, c);
  EXPECT_FALSE(rep.premise_all);
  EXPECT_TRUE(rep.implication_holds);
}

TEST(Theorem1, ConstructedInstancesAreLowerBounds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = run_theorem1_instance(seed);
    ASSERT_FALSE(r.unsatisfiable);
    EXPECT_TRUE(r.premise_all);
    EXPECT_TRUE(r.lambda_ok);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.holds) << "seed " << seed << " margin " << r.min_margin;
  }
}

TEST(Theorem2, OmegaEqualsRhoGivesEqualKappas) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = run_theorem2_instance(seed, Theorem2Family::General, true);
    EXPECT_LE(std::abs(r.kappa1 - r.kappa2), 1e-10);
  }
}

TEST(Theorem2, ConcentratedFamilyFlagImpliesOrdering) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = run_theorem2_instance(seed, Theorem2Family::Concentrated, false);
    EXPECT_TRUE(r.holds) << "seed " << seed;
  }
}

TEST(Theorem2, FamilyNamesRoundTrip) {
  EXPECT_EQ(family_from_name(family_name(Theorem2Family::General)), Theorem2Family::General);
  EXPECT_THROW(family_from_name("bogus"), Error);
}

TEST(Theorem3, BehaviourPolicyAsOptimumGivesZeroGap) {
  const auto in = random_instance(15);
  auto occ = make_occupancy_tables(in.truth, in.model, in.pi_b, in.pi_b, 0.5);
  const auto c = model_error_constants(in.truth, in.model, Matrix::Ones(5, 3), 1.0);
  const auto rep = safety_diagnostic(in.truth, in.truth, in.model, in.pi_b, in.pi_b, occ, 0.5, 2.0, c);
  EXPECT_EQ(rep.mu1, 0.0);
  EXPECT_EQ(rep.j_diff, 0.0);
}

TEST(Theorem3, ExactModelInfiniteDataLeavesOnlyMu1) {
  const auto in = random_instance(16);
  auto occ = make_occupancy_tables(in.truth, in.truth, in.pi_b, in.pi_b, 0.5);
  Rng rng(3);
  occ.omega = dirichlet<double>(15, 1.0, rng).reshaped(5, 3);
  const auto c = model_error_constants(in.truth, in.truth, Matrix::Ones(5, 3), 1.0);
  const auto rep = safety_diagnostic(in.truth, in.truth, in.truth, in.pi, in.pi_b, occ, 0.5, 2.0, c);
  EXPECT_EQ(rep.mu2, 0.0);
  EXPECT_EQ(rep.mu3, 0.0);
  EXPECT_EQ(rep.zeta, rep.mu1);
}

TEST(Theorem3, RandomInstancesRespectBound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = run_theorem3_instance(seed);
    EXPECT_TRUE(r.report.bound_holds) << seed;
    EXPECT_NEAR(r.report.j_diff, r.report.j_star - r.report.j_b, 1e-12);
  }
}

TEST(PolicyIteration, OptimalAgainstAllDeterministicPolicies) {
  Rng rng(21);
  const auto m = random_mdp<double>(3, 2, 0.9, rng);
  const Matrix eta = Matrix::Zero(3, 2);
  const Matrix best = penalized_policy_iteration(m, eta, 0.0, uniform_policy<double>(3, 2));
  const double j_best = expected_return(m, best);
  for (int code = 0; code < 8; ++code) {
    Matrix pi = Matrix::Zero(3, 2);
    for (int s = 0; s < 3; ++s) pi(s, (code >> s) & 1) = 1;
    EXPECT_GE(j_best, expected_return(m, pi) - 1e-12);
  }
}

TEST(EmpiricalMdp, CountsAndUnvisitedSelfLoops) {
  Rng rng(5);
  const auto m = random_mdp<double>(4, 2, 0.9, rng);
  Matrix pi_b = Matrix::Zero(4, 2);
  pi_b.col(0).setOnes();  // action 1 never taken
  const auto e = empirical_mdp(m, pi_b, 500, rng);
  EXPECT_EQ(e.counts.sum(), 500.0);
  EXPECT_EQ(e.counts.col(1).sum(), 0.0);
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(e.mdp.transitions(e.mdp.row(s, 1), s), 1.0);
    EXPECT_EQ(e.mdp.rewards(s, 1), 0.0);
  }
  EXPECT_NO_THROW(e.mdp.validate());
}

TEST(Scalar, FloatInstantiation) {
  Rng rng(1);
  const auto m = random_mdp<float>(4, 2, 0.9f, rng);
  const auto pi = uniform_policy<float>(4, 2);
  const auto qf = exact_policy_eval(m, pi);
  IterationOptions opt;
  opt.tol = 1e-5;
  OccupancyTables<float> occ = make_occupancy_tables(m, m, pi, pi, 0.5f);
  const auto fp = domain_backup_fixed_point(m, m, pi, occ, 0.5f, 1.0f, opt);
  EXPECT_LT((fp.q - qf).cwiseAbs().maxCoeff(), 1e-3f);
}
