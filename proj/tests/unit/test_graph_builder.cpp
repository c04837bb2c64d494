#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "pcqa/error.hpp"
#include "pcqa/graph_builder.hpp"
#include "pcqa/projection.hpp"

using namespace pcqa;

namespace {

Eigen::MatrixXd to_eigen(const Tensor<double>& t) {
  const auto n = static_cast<Eigen::Index>(t.dim(0));
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = t.at({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
  return m;
}

Tensor<double> identity(std::size_t n) {
  Tensor<double> t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at({i, i}) = 1.0;
  return t;
}

const double kStrides[] = {24, 36, 48, 60};
const double kThetas[] = {0, 36, 72};

}  // namespace

TEST(RsDist, Examples) {
  EXPECT_DOUBLE_EQ(rs_dist(0, 1, 36, 10), 36.0);
  EXPECT_DOUBLE_EQ(rs_dist(0, 9, 36, 10), 36.0);
  EXPECT_DOUBLE_EQ(rs_dist(4, 4, 36, 10), 0.0);
  EXPECT_DOUBLE_EQ(rs_dist(0, 5, 36, 10), 180.0);
  EXPECT_DOUBLE_EQ(rs_dist(1, 6, 48, 7), 48.0 * 2);
  EXPECT_THROW(rs_dist(0, 10, 36, 10), Error);
  try {
    rs_dist(11, 0, 36, 10);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IndexOutOfRange);
  }
}

TEST(BuildAdjacency, RingAtDefaultStride) {
  const auto a = build_adjacency(10, 36, 36);
  for (std::size_t j = 0; j < 10; ++j) {
    const double expect = (j == 9 || j == 0 || j == 1) ? 1.0 : 0.0;
    EXPECT_EQ(a.at({0, j}), expect) << j;
  }
}

TEST(BuildAdjacency, ZeroThetaIsIdentity) {
  EXPECT_EQ(build_adjacency(7, 48, 0), identity(7));
}

TEST(BuildAdjacency, LargeThetaIsAllOnes) {
  EXPECT_EQ(build_adjacency(10, 36, 180), Tensor<double>::ones({10, 10}));
}

TEST(BuildAdjacency, MatchesOracleAndIsCirculant) {
  for (double rs : kStrides) {
    for (double th : kThetas) {
      const std::size_t n = view_count(rs);
      const auto a = build_adjacency(n, rs, th);
      const auto ref = oracle::adjacency(n, rs, th);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(a.at({i, i}), 1.0);
        for (std::size_t j = 0; j < n; ++j) {
          EXPECT_EQ(a.at({i, j}), static_cast<double>(ref[i][j])) << rs << " " << th;
          EXPECT_EQ(a.at({i, j}), a.at({j, i}));
          EXPECT_EQ(a.at({i, j}), a.at({(i + 1) % n, (j + 1) % n}));
        }
      }
    }
  }
}

TEST(NormalizeAdjacency, NoEdgesGivesIdentity) {
  EXPECT_EQ(normalize_adjacency(Tensor<double>({5, 5})), identity(5));
  EXPECT_EQ(normalize_adjacency(identity(4)), identity(4));
}

TEST(NormalizeAdjacency, RingEntriesAreOneThird) {
  const auto h = normalize_adjacency(build_adjacency(10, 36, 36));
  for (double v : h.storage()) {
    if (v != 0.0) {
      EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }
  }
}

TEST(NormalizeAdjacency, MatchesDenseOracleAndSpectrum) {
  for (double rs : kStrides) {
    for (double th : kThetas) {
      const std::size_t n = view_count(rs);
      const auto h = normalize_adjacency(build_adjacency(n, rs, th));
      const auto ref = oracle::sym_normalize(oracle::adjacency(n, rs, th));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          EXPECT_NEAR(h.at({i, j}), ref[i][j], 1e-12);
          EXPECT_EQ(h.at({i, j}), h.at({j, i}));
          EXPECT_GE(h.at({i, j}), 0.0);
        }
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(h));
      EXPECT_GE(es.eigenvalues().minCoeff(), -1.0 - 1e-9) << rs << " " << th;
      EXPECT_LE(es.eigenvalues().maxCoeff(), 1.0 + 1e-9) << rs << " " << th;
    }
  }
}

TEST(NormalizeAdjacency, SaturatingSelfLoops) {
  // a raw matrix with an explicit diagonal 1 is treated like one without it
  Tensor<double> with_diag = build_adjacency(6, 60, 60);
  Tensor<double> no_diag = with_diag;
  for (std::size_t i = 0; i < 6; ++i) no_diag.at({i, i}) = 0.0;
  EXPECT_EQ(normalize_adjacency(with_diag), normalize_adjacency(no_diag));
}

TEST(NormalizeAdjacency, AsymmetricIsNotSymmetricOnIrregularGraph) {
  Tensor<double> a({3, 3});
  a.at({0, 1}) = a.at({1, 0}) = 1.0;
  const auto lit = normalize_adjacency(a, AdjacencyNormalization::Asymmetric);
  // degrees are 2,2,1 with self-loops; literal form is D^-1/2 A~ D^+1/2
  EXPECT_NEAR(lit.at({0, 1}), 1.0, 1e-15);
  EXPECT_NEAR(lit.at({2, 2}), 1.0, 1e-15);
  const auto sym = normalize_adjacency(a);
  EXPECT_NEAR(sym.at({0, 1}), 0.5, 1e-15);
  EXPECT_NEAR(sym.at({2, 2}), 1.0, 1e-15);
}

TEST(NormalizeAdjacency, RejectsNonSquare) {
  EXPECT_THROW(normalize_adjacency(Tensor<double>({2, 3})), Error);
}

TEST(Normalization, ParseNames) {
  EXPECT_EQ(parse_normalization("symmetric"), AdjacencyNormalization::Symmetric);
  EXPECT_EQ(parse_normalization("asymmetric"), AdjacencyNormalization::Asymmetric);
  EXPECT_EQ(normalization_name(AdjacencyNormalization::Asymmetric), "asymmetric");
  EXPECT_THROW(parse_normalization("random_walk"), Error);
}

TEST(BuildGraph, DefaultShapes) {
  const auto g = build_graph(Tensor<float>({10, 144}), 36, 36);
  EXPECT_EQ(g.adjacency_norm.shape(), (Shape{10, 10}));
  EXPECT_EQ(g.adjacency_raw, build_adjacency(10, 36, 36));
  EXPECT_EQ(g.adjacency_norm, normalize_adjacency(g.adjacency_raw));
  EXPECT_EQ(g.nodes.shape(), (Shape{10, 144}));
}

TEST(BuildGraph, SingleViewDegenerate) {
  const auto g = build_graph(Tensor<double>({1, 3}), 360, 36);
  EXPECT_EQ(g.adjacency_norm, Tensor<double>::ones({1, 1}));
}

TEST(BuildGraph, NodeCountMismatch) {
  try {
    build_graph(Tensor<double>({9, 4}), 36, 36);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(BuildGraph, CyclicShiftLeavesAdjacencyInvariant) {
  const auto a = build_adjacency(15, 24, 72);
  for (std::size_t k = 1; k < 15; ++k) {
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 15; ++j) EXPECT_EQ(a.at({(i + k) % 15, (j + k) % 15}), a.at({i, j}));
  }
}
