#include <lindblad.hpp>

#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace lindblad;
using testing_helpers::random_density;
using testing_helpers::random_matrix;

namespace {

LindbladModel amplitude_damping(double omega, double gamma) {
  const ComplexMatrix z = (ComplexMatrix(2, 2) << 1, 0, 0, -1).finished();
  const ComplexMatrix sm = (ComplexMatrix(2, 2) << 0, 1, 0, 0).finished();
  return LindbladModel(0.5 * omega * z, {std::sqrt(gamma) * sm});
}

}  // namespace

TEST(ExactEvolve, AmplitudeDampingClosedForm) {
  const double omega = 1.3, gamma = 0.7, t = 2.1;
  const LindbladModel m = amplitude_damping(omega, gamma);
  ComplexMatrix rho0(2, 2);
  rho0 << 0.3, Complex(0.2, 0.1), Complex(0.2, -0.1), 0.7;
  // |1> decays to |0> at rate gamma; the coherence rotates at omega and decays at gamma/2.
  const double p1 = 0.7 * std::exp(-gamma * t);
  const Complex c01 = Complex(0.2, 0.1) * std::exp(Complex(-gamma / 2, -omega) * t);
  for (auto method : {PropagatorMethod::Exponential, PropagatorMethod::RungeKutta}) {
    const ReferenceSolution r = exact_evolve(m, DensityMatrix(rho0), t, 1e-10, method);
    EXPECT_NEAR(r.state.matrix()(1, 1).real(), p1, 1e-9);
    EXPECT_NEAR(r.state.matrix()(0, 0).real(), 1.0 - p1, 1e-9);
    EXPECT_NEAR(std::abs(r.state.matrix()(0, 1) - c01), 0.0, 1e-9);
    EXPECT_LE(r.est_error, 1e-10);
  }
}

TEST(ExactEvolve, MethodsAgreeOnRandomModel) {
  std::mt19937_64 gen(23);
  const ComplexMatrix g = random_matrix(5, gen);
  const LindbladModel m(0.25 * (g + g.adjoint()), {0.4 * random_matrix(5, gen), 0.3 * random_matrix(5, gen)});
  const DensityMatrix rho(random_density(5, gen));
  const auto a = exact_evolve(m, rho, 1.5, 1e-10, PropagatorMethod::Exponential);
  const auto b = exact_evolve(m, rho, 1.5, 1e-10, PropagatorMethod::RungeKutta);
  EXPECT_LT(trace_norm(a.state.matrix() - b.state.matrix()), 2e-10);
  EXPECT_EQ(exact_evolve(m, rho, 0.0, 1e-10).state.matrix(), rho.matrix());
}

TEST(ExactEvolve, SemigroupProperty) {
  std::mt19937_64 gen(29);
  const ComplexMatrix g = random_matrix(3, gen);
  const LindbladModel m(0.5 * (g + g.adjoint()), {0.5 * random_matrix(3, gen)});
  const ComplexMatrix p1 = exact_propagator(m, 0.4), p2 = exact_propagator(m, 0.6);
  EXPECT_LT((p1 * p2 - exact_propagator(m, 1.0)).norm(), 1e-12);
}

TEST(ExactEvolve, RejectsBadArguments) {
  const LindbladModel m = amplitude_damping(1.0, 0.1);
  const DensityMatrix rho = DensityMatrix::maximally_mixed(2);
  EXPECT_THROW(exact_evolve(m, rho, -1.0, 1e-8), Error);
  EXPECT_THROW(exact_evolve(m, rho, 1.0, 0.0), Error);
  EXPECT_THROW(exact_evolve(m, DensityMatrix::maximally_mixed(3), 1.0, 1e-8), Error);
}

TEST(Dopri5, ScalarExponential) {
  ComplexVector y(1);
  y(0) = 1.0;
  const auto r = integrate_dopri5([](const ComplexVector& v) -> ComplexVector { return Complex(-1.0, 2.0) * v; }, y,
                                  3.0, 1e-11);
  EXPECT_NEAR(std::abs(r.y(0) - std::exp(Complex(-1.0, 2.0) * 3.0)), 0.0, 1e-10);
}

class GammaOde : public ::testing::TestWithParam<IntegratorKind> {};

// Oracle: (rho_tau(T) - rho(T)) / tau -> Gamma_1(T), extracted by Richardson
// elimination of the tau^2 term from integrator runs.
TEST_P(GammaOde, FirstCoefficientMatchesStepSizeLimit) {
  const IntegratorKind kind = GetParam();
  std::mt19937_64 gen(31);
  const ComplexMatrix g = random_matrix(3, gen);
  const LindbladModel m(0.3 * (g + g.adjoint()), {0.4 * random_matrix(3, gen)});
  const DensityMatrix rho0(random_density(3, gen));
  const double T = 1.0;
  const ComplexMatrix exact = exact_evolve(m, rho0, T, 1e-12).state.matrix();
  auto d = [&](std::size_t n) {
    return ComplexMatrix((evolve(m, rho0, T, n, kind).final_state() - exact) * static_cast<double>(n) / T);
  };
  const ComplexMatrix limit = 2.0 * d(800) - d(400);
  const GammaSolution g1 = gamma_ode_solve(m, kind, 1, T, rho0, 1e-10);
  EXPECT_LT((g1.value_at_T - limit).cwiseAbs().maxCoeff(), 1e-4 * std::max(1.0, limit.cwiseAbs().maxCoeff()));
  EXPECT_LT(hermiticity_defect(g1.value_at_T), 1e-10);
}

// Second coefficient: (rho_tau - rho - tau Gamma_1) / tau^2 -> Gamma_2 with O(tau) error.
TEST_P(GammaOde, SecondCoefficientMatchesStepSizeLimit) {
  const IntegratorKind kind = GetParam();
  std::mt19937_64 gen(37);
  const ComplexMatrix g = random_matrix(3, gen);
  const LindbladModel m(0.3 * (g + g.adjoint()), {0.4 * random_matrix(3, gen)});
  const DensityMatrix rho0(random_density(3, gen));
  const double T = 1.0;
  const ComplexMatrix exact = exact_evolve(m, rho0, T, 1e-12).state.matrix();
  const ComplexMatrix g1 = gamma_ode_solve(m, kind, 1, T, rho0, 1e-9).value_at_T;
  const ComplexMatrix g2 = gamma_ode_solve(m, kind, 2, T, rho0, 1e-9).value_at_T;
  std::vector<double> taus, errs;
  for (std::size_t n : {25, 50, 100, 200}) {
    const double tau = T / static_cast<double>(n);
    const ComplexMatrix est = (evolve(m, rho0, T, n, kind).final_state() - exact - tau * g1) / (tau * tau);
    taus.push_back(tau);
    errs.push_back((est - g2).cwiseAbs().maxCoeff());
  }
  EXPECT_GT(testing_helpers::loglog_slope(taus, errs), 0.85);
  EXPECT_LT(errs.back(), 0.05 * std::max(1.0, g2.cwiseAbs().maxCoeff()));
}

INSTANTIATE_TEST_SUITE_P(Integrators, GammaOde,
                         ::testing::Values(IntegratorKind::KrausFirstOrder, IntegratorKind::DilatedHamiltonian));

TEST(GammaOdeErrors, UnsupportedOrderAndMethodsAgree) {
  const LindbladModel m = amplitude_damping(1.0, 0.5);
  const DensityMatrix rho = DensityMatrix::maximally_mixed(2);
  try {
    gamma_ode_solve(m, IntegratorKind::KrausFirstOrder, 3, 1.0, rho, 1e-8);
    FAIL() << "expected an unsupported-order error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
  const auto a = gamma_ode_solve(m, IntegratorKind::KrausFirstOrder, 2, 1.0, rho, 1e-10, PropagatorMethod::Exponential);
  const auto b = gamma_ode_solve(m, IntegratorKind::KrausFirstOrder, 2, 1.0, rho, 1e-10, PropagatorMethod::RungeKutta);
  EXPECT_LT((a.value_at_T - b.value_at_T).cwiseAbs().maxCoeff(), 1e-9);
}
