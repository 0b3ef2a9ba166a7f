#include <gtest/gtest.h>

#include "cprnn/constructions.hpp"
#include "cprnn/errors.hpp"
#include "test_support.hpp"

namespace cprnn {
namespace {

CpRnnParams cp_of(const CellParams& c) { return std::get<CpRnnParams>(c); }

// Max deviation between trajectories over explicit random sequences,
// independent of equivalence_certificate.
double trajectory_gap(const CellParams& a, const CellParams& b, int n_seqs, int len, std::uint64_t seed) {
  auto rng = make_rng(seed, {99});
  double gap = 0.0;
  for (int s = 0; s < n_seqs; ++s) {
    std::vector<Vector> xs;
    for (int t = 0; t < len; ++t) xs.push_back(testing::random_vector(input_size(a), rng));
    const Trajectory ta = run_sequence(a, xs), tb = run_sequence(b, xs);
    for (int t = 0; t < len; ++t) gap = std::max(gap, (ta.hiddens[t] - tb.hiddens[t]).cwiseAbs().maxCoeff());
  }
  return gap;
}

TEST(PadRank, RankZeroToOne) {
  const auto p = cp_of(random_cell(ModelKind::cprnn, 3, 4, 0, Activation::tanh, 1));
  const CpRnnParams q = pad_rank(p);
  EXPECT_EQ(q.rank(), 1);
  EXPECT_TRUE(q.cp.a().isZero(0.0));
  EXPECT_EQ(trajectory_gap(p, q, 10, 8, 1), 0.0);
}

TEST(PadRank, TrajectoriesBitIdentical) {
  const auto p = cp_of(random_cell(ModelKind::cprnn, 3, 4, 2, Activation::tanh, 2));
  EXPECT_EQ(trajectory_gap(p, pad_rank(p), 10, 8, 2), 0.0);
  const CpRnnParams twice = pad_rank(pad_rank(p));
  EXPECT_EQ(twice.rank(), 4);
  EXPECT_EQ(trajectory_gap(p, twice, 10, 8, 3), 0.0);
  EXPECT_EQ(equivalence_certificate(p, twice), 0.0);
}

TEST(SaturateTo2Rnn, ZeroTensorReconstructsZero) {
  auto so = std::get<SecondOrderParams>(random_cell(ModelKind::second_order, 3, 4, 0, Activation::tanh, 4));
  so.A = Tensor3({3, 4, 3});
  const CpRnnParams cp = saturate_to_2rnn(so);
  EXPECT_EQ(reconstruct(cp.cp).max_abs(), 0.0);
  const RnnParams rnn{so.h0, so.U, so.V, so.b, so.act};
  EXPECT_LE(trajectory_gap(rnn, cp, 10, 8, 4), 0.0);
}

TEST(SaturateTo2Rnn, RandomModelWithinTolerance) {
  const auto so = std::get<SecondOrderParams>(random_cell(ModelKind::second_order, 3, 4, 0, Activation::tanh, 5));
  const CpRnnParams cp = saturate_to_2rnn(so);
  EXPECT_EQ(cp.rank(), 9);
  EXPECT_LE(trajectory_gap(so, cp, 10, 8, 5), 1e-12);
  EXPECT_LE(equivalence_certificate(so, cp), 1e-12);
}

TEST(SaturateTo2Rnn, IndicatorTensorExact) {
  auto so = std::get<SecondOrderParams>(random_cell(ModelKind::second_order, 2, 3, 0, Activation::linear, 6));
  so.A = Tensor3({2, 3, 2});
  so.A(1, 2, 0) = 1.0;
  EXPECT_EQ(equivalence_certificate(so, saturate_to_2rnn(so)), 0.0);
}

TEST(RnnAsCprnn, IdenticalTrajectories) {
  const auto rnn = std::get<RnnParams>(random_cell(ModelKind::rnn, 5, 7, 0, Activation::tanh, 7));
  const CpRnnParams cp = rnn_as_cprnn(rnn);
  EXPECT_EQ(cp.rank(), 0);
  EXPECT_EQ(equivalence_certificate(rnn, cp), 0.0);
  EXPECT_EQ(trajectory_gap(rnn, cp, 10, 8, 7), 0.0);
}

TEST(RnnAsCprnn, ZeroRnn) {
  const RnnParams rnn{Vector::Zero(2), Matrix::Zero(2, 3), Matrix::Zero(2, 2), Vector::Zero(2), Activation::tanh};
  const CpRnnParams cp = rnn_as_cprnn(rnn);
  EXPECT_TRUE(cp.U.isZero(0.0) && cp.V.isZero(0.0) && cp.b.isZero(0.0));
}

TEST(EmbedMirnn, RandomModelWithinTolerance) {
  const auto mi = std::get<MiRnnParams>(random_cell(ModelKind::mirnn, 3, 4, 0, Activation::tanh, 8));
  const CpRnnParams cp = embed_mirnn(mi);
  EXPECT_EQ(cp.rank(), 3);
  EXPECT_LE(trajectory_gap(mi, cp, 10, 8, 8), 1e-12);
}

TEST(EmbedMirnn, CFactorIsDiagonal) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mi = std::get<MiRnnParams>(random_cell(ModelKind::mirnn, 4, 5, 0, Activation::tanh, seed));
    const CpRnnParams cp = embed_mirnn(mi);
    const Matrix& C = cp.cp.c();
    EXPECT_TRUE(Matrix(C.diagonal().asDiagonal()) == C);
  }
}

TEST(EmbedMirnn, NoMultiplicativeTermIsFirstOrder) {
  auto mi = std::get<MiRnnParams>(random_cell(ModelKind::mirnn, 3, 4, 0, Activation::tanh, 9));
  mi.alpha.setZero();
  const CpRnnParams cp = embed_mirnn(mi);
  EXPECT_TRUE(reconstruct(cp.cp).max_abs() == 0.0);
  EXPECT_LE(equivalence_certificate(mi, cp), 1e-12);
}

TEST(EmbedMirnn, UnitGatesGiveHadamardTerm) {
  auto rng = make_rng(10);
  auto mi = std::get<MiRnnParams>(random_cell(ModelKind::mirnn, 3, 4, 0, Activation::linear, 10));
  mi.alpha.setOnes();
  mi.beta1.setOnes();
  mi.beta2.setOnes();
  mi.b.setZero();
  const CpRnnParams cp = embed_mirnn(mi);
  const Vector h = testing::random_vector(3, rng), x = testing::random_vector(4, rng);
  const Vector expected = (mi.V * h).cwiseProduct(mi.U * x);
  EXPECT_LE((factored_contract(cp.cp, h, x) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PadHidden, OneToTwo) {
  auto rng = make_rng(11);
  const auto p = cp_of(random_cell(ModelKind::cpbirnn, 1, 3, 2, Activation::tanh, 11));
  const Matrix W = testing::random_matrix(2, 1, rng);
  const WithReadout r = pad_hidden(p, W);
  EXPECT_EQ(r.model.hidden_size(), 2);
  EXPECT_LE(equivalence_certificate(p, r.model, {}, &W, &r.readout), 1e-12);
}

TEST(PadHidden, IdentityReadoutRecoversHiddens) {
  const auto p = cp_of(random_cell(ModelKind::cpbirnn, 3, 4, 2, Activation::tanh, 12));
  const Matrix I = Matrix::Identity(3, 3);
  const WithReadout r = pad_hidden(p, I);
  // The extra zero coordinate can change the summation order of dot products.
  EXPECT_LE(equivalence_certificate(p, r.model, {}, &I, &r.readout), 1e-15);
}

TEST(PadHidden, ZeroFactorsGiveZeroOutputs) {
  auto p = cp_of(random_cell(ModelKind::cpbirnn, 2, 3, 2, Activation::tanh, 13));
  p.cp.a().setZero();
  const Matrix W = Matrix::Ones(1, 2);
  const WithReadout r = pad_hidden(p, W);
  EXPECT_EQ(equivalence_certificate(p, r.model, {}, &W, &r.readout), 0.0);
}

TEST(PadHidden, RejectsFirstOrderModels) {
  const auto p = cp_of(random_cell(ModelKind::cprnn, 2, 3, 2, Activation::tanh, 14));
  EXPECT_THROW(pad_hidden(p, Matrix::Identity(2, 2)), ScopeError);
}

TEST(ReduceHidden, RoundTripAfterPadding) {
  auto rng = make_rng(15);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = cp_of(random_cell(ModelKind::cpbirnn, 4, 5, 3, Activation::linear, seed));
    const Matrix W = testing::random_matrix(3, 4, rng);
    const WithReadout big = pad_hidden(p, W);
    const WithReadout small = reduce_hidden(big.model, big.readout);
    EXPECT_EQ(small.model.hidden_size(), 4);
    EXPECT_LE(equivalence_certificate(big.model, small.model, {}, &big.readout, &small.readout), 1e-10);
  }
}

TEST(ReduceHidden, GenericLargeModel) {
  auto rng = make_rng(16);
  // n + 1 = 5 with R = 3: hidden states live in span(C) + h0, dimension 4.
  const auto p = cp_of(random_cell(ModelKind::cpbirnn, 5, 4, 3, Activation::linear, 16));
  const Matrix W = testing::random_matrix(2, 5, rng);
  const WithReadout r = reduce_hidden(p, W);
  EXPECT_EQ(r.model.hidden_size(), 4);
  EXPECT_LE(equivalence_certificate(p, r.model, {}, &W, &r.readout), 1e-10);
}

TEST(ReduceHidden, RankOneTwoToOne) {
  auto rng = make_rng(17);
  // Rank-one factors with h0 in span(C): the states stay on one line.
  const Vector c = testing::random_vector(2, rng);
  const CpRnnParams p{0.7 * c, CpFactors(testing::random_matrix(2, 1, rng), testing::random_matrix(3, 1, rng), c),
                      Matrix::Zero(2, 3), Matrix::Zero(2, 2), Vector::Zero(2), Activation::linear, true};
  const Matrix W = testing::random_matrix(2, 2, rng);
  const WithReadout r = reduce_hidden(p, W);
  EXPECT_EQ(r.model.hidden_size(), 1);
  EXPECT_LE(equivalence_certificate(p, r.model, {}, &W, &r.readout), 1e-10);
}

TEST(ReduceHidden, ZeroModel) {
  CpRnnParams p{Vector::Zero(3), CpFactors(Matrix::Zero(3, 2), Matrix::Zero(4, 2), Matrix::Zero(3, 2)),
                Matrix::Zero(3, 4), Matrix::Zero(3, 3), Vector::Zero(3), Activation::linear, true};
  const Matrix W = Matrix::Ones(1, 3);
  const WithReadout r = reduce_hidden(p, W);
  EXPECT_EQ(equivalence_certificate(p, r.model, {}, &W, &r.readout), 0.0);
}

TEST(ReduceHidden, RejectsOutOfScopeModels) {
  const Matrix W = Matrix::Identity(3, 3);
  EXPECT_THROW(reduce_hidden(cp_of(random_cell(ModelKind::cpbirnn, 3, 4, 2, Activation::tanh, 18)), W), ScopeError);
  EXPECT_THROW(reduce_hidden(cp_of(random_cell(ModelKind::cprnn, 3, 4, 2, Activation::linear, 18)), W), ScopeError);
  // Target hidden size 2 is below rank 3.
  EXPECT_THROW(reduce_hidden(cp_of(random_cell(ModelKind::cpbirnn, 3, 4, 3, Activation::linear, 18)), W), ScopeError);
}

TEST(EquivalenceCertificate, SelfIsZero) {
  const auto cell = random_cell(ModelKind::second_order, 3, 4, 0, Activation::tanh, 19);
  EXPECT_EQ(equivalence_certificate(cell, cell), 0.0);
}

TEST(EquivalenceCertificate, DetectsDifferentModels) {
  const auto a = random_cell(ModelKind::rnn, 3, 4, 0, Activation::tanh, 20);
  const auto b = random_cell(ModelKind::rnn, 3, 4, 0, Activation::tanh, 21);
  EXPECT_GT(equivalence_certificate(a, b), 1e-3);
}

TEST(EquivalenceCertificate, RejectsIncompatibleDims) {
  const auto a = random_cell(ModelKind::rnn, 3, 4, 0, Activation::tanh, 22);
  const auto b = random_cell(ModelKind::rnn, 3, 5, 0, Activation::tanh, 22);
  EXPECT_THROW(equivalence_certificate(a, b), DimensionError);
}

TEST(FirstPreactivationImage, DimensionBoundedByRank) {
  for (Index R = 1; R <= 5; ++R) {
    const CpRnnParams p = strictness_witness_model(4, 6, R, Activation::tanh, 23);
    EXPECT_EQ(numerical_rank(first_preactivation_image(p)), std::min<Index>(R, 4)) << "R = " << R;
  }
}

TEST(FirstPreactivationImage, RandomLowRankCpbirnn) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_cell(ModelKind::cpbirnn, 5, 6, 2, Activation::tanh, seed);
    EXPECT_EQ(numerical_rank(first_preactivation_image(p)), 2);
  }
}

TEST(NumericalRank, KnownMatrices) {
  EXPECT_EQ(numerical_rank(Matrix::Zero(3, 3)), 0);
  EXPECT_EQ(numerical_rank(Matrix::Identity(3, 4)), 3);
  EXPECT_EQ(numerical_rank(Vector::Ones(3) * Vector::Ones(4).transpose()), 1);
}

}  // namespace
}  // namespace cprnn
