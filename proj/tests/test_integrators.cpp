#include <lindblad.hpp>

#include <gtest/gtest.h>

#include <sstream>

#include "helpers.hpp"

using namespace lindblad;
using testing_helpers::loglog_slope;
using testing_helpers::random_density;
using testing_helpers::random_matrix;

namespace {

LindbladModel small_model(std::uint64_t seed, Index d = 3, int jumps = 2) {
  std::mt19937_64 gen(seed);
  const ComplexMatrix g = random_matrix(d, gen);
  std::vector<ComplexMatrix> ls;
  for (int j = 0; j < jumps; ++j) ls.push_back(0.4 * random_matrix(d, gen));
  return LindbladModel(0.3 * (g + g.adjoint()), ls);
}

// Index-level oracle: (tr_A M)_{ab} = Sum_j M_{(j,a),(j,b)} with row index j * dS + a.
ComplexMatrix brute_partial_trace(const ComplexMatrix& m, Index da, Index ds) {
  ComplexMatrix out = ComplexMatrix::Zero(ds, ds);
  for (Index a = 0; a < ds; ++a)
    for (Index b = 0; b < ds; ++b)
      for (Index j = 0; j < da; ++j) out(a, b) += m(j * ds + a, j * ds + b);
  return out;
}

}  // namespace

TEST(Kraus, OperatorsAndCompletenessDefect) {
  const LindbladModel m = small_model(1);
  const double tau = 0.01;
  const KrausChannel ch = kraus_channel(m, tau);
  ASSERT_EQ(ch.operators().size(), 3u);
  ComplexMatrix s = ComplexMatrix::Zero(3, 3);
  for (const auto& k : ch.operators()) s += k.adjoint() * k;
  const ComplexMatrix expected =
      ComplexMatrix::Identity(3, 3) + tau * tau * m.effective().adjoint() * m.effective();
  EXPECT_LT((s - expected).norm(), 1e-14);
  EXPECT_THROW(kraus_channel(m, 0.0), Error);
}

TEST(Kraus, TaylorTermsReproduceTheStepExactly) {
  const LindbladModel m = small_model(2);
  std::mt19937_64 gen(3);
  const ComplexMatrix rho = random_density(3, gen);
  const double tau = 0.07;
  ComplexMatrix series = ComplexMatrix::Zero(3, 3);
  double tp = 1.0;
  for (int n = 0; n <= 3; ++n, tp *= tau)
    series += tp * step_expansion_term(m, IntegratorKind::KrausFirstOrder, n, rho);
  EXPECT_LT((series - kraus_step(m, rho, tau)).norm(), 1e-14);
}

TEST(Dilated, HamiltonianStructureAndPartialTrace) {
  const LindbladModel m = small_model(4);
  const ComplexMatrix h = dilated_hamiltonian(m, 0.2);
  EXPECT_EQ(h.rows(), 9);
  EXPECT_LT(hermiticity_defect(h), 1e-15);
  EXPECT_LT((h.block(0, 0, 3, 3) - 0.2 * m.hamiltonian()).norm(), 1e-15);
  EXPECT_LT((h.block(3, 3, 6, 6)).norm(), 1e-15);
  std::mt19937_64 gen(5);
  const ComplexMatrix big = random_matrix(12, gen);
  EXPECT_LT((partial_trace_ancilla(big, 4, 3) - brute_partial_trace(big, 4, 3)).norm(), 1e-13);
  EXPECT_THROW(partial_trace_ancilla(big, 5, 3), Error);
}

TEST(Dilated, KrausFormMatchesFullConjugation) {
  const LindbladModel m = small_model(6);
  std::mt19937_64 gen(7);
  const ComplexMatrix rho = random_density(3, gen);
  for (double tau : {0.3, 0.01}) {
    // Oracle route: dense exp of the dilated Hamiltonian and a brute-force partial trace.
    const ComplexMatrix u = expm(-kI * dilated_hamiltonian(m, tau));
    ComplexMatrix big = ComplexMatrix::Zero(9, 9);
    big.topLeftCorner(3, 3) = rho;
    const ComplexMatrix oracle = brute_partial_trace(u * big * u.adjoint(), 3, 3);
    EXPECT_LT((dilated_step(m, rho, tau) - oracle).norm(), 1e-13);
    EXPECT_LT((dilated_channel(m, tau).apply(rho) - oracle).norm(), 1e-13);
  }
}

TEST(Dilated, ChannelIsTracePreservingAndCompletelyPositive) {
  const LindbladModel m = small_model(8);
  const KrausChannel ch = dilated_channel(m, 0.4);
  ComplexMatrix s = ComplexMatrix::Zero(3, 3);
  for (const auto& k : ch.operators()) s += k.adjoint() * k;
  EXPECT_LT((s - ComplexMatrix::Identity(3, 3)).norm(), 1e-13);
  // Choi matrix Sum_ab |a><b| (x) E(|a><b|) must be PSD.
  ComplexMatrix choi = ComplexMatrix::Zero(9, 9);
  for (Index a = 0; a < 3; ++a)
    for (Index b = 0; b < 3; ++b) {
      ComplexMatrix e = ComplexMatrix::Zero(3, 3);
      e(a, b) = 1.0;
      choi.block(a * 3, b * 3, 3, 3) = ch.apply(e);
    }
  EXPECT_GT(min_eigenvalue_hermitian(choi), -1e-13);
}

TEST(Dilated, SeriesTruncationErrorHasExpectedOrder) {
  const LindbladModel m = small_model(9);
  std::mt19937_64 gen(10);
  const ComplexMatrix rho = random_density(3, gen);
  for (int K : {1, 2, 3}) {
    std::vector<double> taus, errs;
    for (double tau : {0.08, 0.04, 0.02, 0.01}) {
      ComplexMatrix partial = ComplexMatrix::Zero(3, 3);
      double tp = 1.0;
      for (int n = 0; n <= K; ++n, tp *= tau)
        partial += tp * step_expansion_term(m, IntegratorKind::DilatedHamiltonian, n, rho);
      taus.push_back(tau);
      errs.push_back(trace_norm(dilated_step(m, rho, tau) - partial));
    }
    EXPECT_NEAR(loglog_slope(taus, errs), K + 1.0, 0.15) << "K = " << K;
  }
}

TEST(Dilated, FirstTermIsTheGenerator) {
  const LindbladModel m = small_model(11);
  std::mt19937_64 gen(12);
  const ComplexMatrix rho = random_density(3, gen);
  EXPECT_LT((step_expansion_term(m, IntegratorKind::DilatedHamiltonian, 1, rho) - lindblad_apply(m, rho)).norm(),
            1e-13);
  EXPECT_LT((step_expansion_term(m, IntegratorKind::DilatedHamiltonian, 0, rho) - rho).norm(), 1e-15);
}

class LocalAndGlobalOrder : public ::testing::TestWithParam<IntegratorKind> {};

TEST_P(LocalAndGlobalOrder, LocalErrorIsSecondOrderGlobalIsFirst) {
  const IntegratorKind kind = GetParam();
  const LindbladModel m = small_model(13, 4, 1);
  std::mt19937_64 gen(14);
  const DensityMatrix rho0(random_density(4, gen));
  std::vector<double> taus, local;
  for (int e = 4; e <= 9; ++e) {
    const double tau = std::ldexp(1.0, -e);
    taus.push_back(tau);
    local.push_back(trace_norm(step_channel(m, tau, kind).apply(rho0.matrix()) -
                               exact_evolve(m, rho0, tau, 1e-13).state.matrix()));
  }
  EXPECT_NEAR(loglog_slope(taus, local), 2.0, 0.1);

  const ComplexMatrix exact = exact_evolve(m, rho0, 1.0, 1e-12).state.matrix();
  std::vector<double> hs, global;
  for (std::size_t n : {16, 32, 64, 128, 256}) {
    hs.push_back(1.0 / static_cast<double>(n));
    global.push_back(trace_norm(evolve(m, rho0, 1.0, n, kind).final_state() - exact));
  }
  EXPECT_NEAR(loglog_slope(hs, global), 1.0, 0.1);
}

INSTANTIATE_TEST_SUITE_P(Integrators, LocalAndGlobalOrder,
                         ::testing::Values(IntegratorKind::KrausFirstOrder, IntegratorKind::DilatedHamiltonian));

TEST(Evolve, SnapshotsTraceAndCsv) {
  const LindbladModel m = small_model(15);
  const Observable obs(m.hamiltonian());
  EvolveOptions opt;
  opt.snapshot_every = 5;
  opt.observable = &obs;
  const Trajectory t = evolve(m, DensityMatrix::maximally_mixed(3), 2.0, 20, IntegratorKind::KrausFirstOrder, opt);
  ASSERT_EQ(t.snapshots.size(), 5u);
  EXPECT_EQ(t.snapshots.back().step_index, 20u);
  EXPECT_DOUBLE_EQ(t.snapshots.back().time, 2.0);
  EXPECT_GT(t.trace_drift, 1e-6);  // first-order Kraus is not trace preserving
  const Trajectory d = evolve(m, DensityMatrix::maximally_mixed(3), 2.0, 20, IntegratorKind::DilatedHamiltonian);
  EXPECT_LT(d.trace_drift, 1e-13);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step_index,time,trace,observable_value");
  opt.normalize_trace = true;
  const Trajectory n = evolve(m, DensityMatrix::maximally_mixed(3), 2.0, 20, IntegratorKind::KrausFirstOrder, opt);
  EXPECT_NEAR(n.final_state().trace().real(), 1.0, 1e-14);
  // Per-step renormalization equals a single final renormalization.
  EXPECT_LT((n.final_state() - t.final_state() / t.final_state().trace().real()).norm(), 1e-13);
  EXPECT_THROW(evolve(m, DensityMatrix::maximally_mixed(3), 1.0, 0, IntegratorKind::KrausFirstOrder), Error);
}

TEST(IntegratorNames, RoundTrip) {
  EXPECT_EQ(integrator_from_string(to_string(IntegratorKind::DilatedHamiltonian)), IntegratorKind::DilatedHamiltonian);
  EXPECT_EQ(integrator_from_string("kraus"), IntegratorKind::KrausFirstOrder);
  EXPECT_THROW(integrator_from_string("euler"), Error);
}
