#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sfuda/rng.hpp"
#include "sfuda/rsm.hpp"

using namespace sfuda;

TEST_CASE("record_iteration normalizes per class and logs minima") {
  EntropyMatrix em(2);
  IterationEntropies it = record_iteration(em, {{0.2, 0.5, 0.8}, {0.4, 0.4}});
  CHECK(em.rows() == 1);
  // Min of a min-max-normalized list is zero for every nonempty class.
  CHECK(em.entry(0, 0) == doctest::Approx(0.0));
  CHECK(em.entry(0, 1) == doctest::Approx(0.0));
  // Raw track keeps the class minimum entropies.
  CHECK(em.raw_entry(0, 0) == doctest::Approx(0.2));
  CHECK(em.raw_entry(0, 1) == doctest::Approx(0.4));

  CHECK(it.normalized[0][0] == doctest::Approx(0.0));
  CHECK(it.normalized[0][1] == doctest::Approx(0.5));
  CHECK(it.normalized[0][2] == doctest::Approx(1.0));
  CHECK_FALSE(it.degenerate[0]);
  CHECK(it.degenerate[1]);  // all equal
  CHECK(it.normalized[1][0] == 0.0);
  CHECK(it.normalized[1][1] == 0.0);
}

TEST_CASE("record_iteration missing classes and empty iteration") {
  EntropyMatrix em(3);
  record_iteration(em, {{0.1}, {}, {0.3, 0.2}});
  CHECK_FALSE(EntropyMatrix::is_missing(em.entry(0, 0)));
  CHECK(EntropyMatrix::is_missing(em.entry(0, 1)));
  CHECK(EntropyMatrix::is_missing(em.raw_entry(0, 1)));
  CHECK(em.raw_entry(0, 2) == doctest::Approx(0.2));

  CHECK_THROWS_AS(record_iteration(em, {{}, {}, {}}), EmptyIteration);
  CHECK(em.rows() == 1);  // failed call appends nothing
}

TEST_CASE("compute_threshold max-of-row-minima") {
  EntropyMatrix em(2);
  em.append_row({0.1, 0.4}, {0.1, 0.4});
  em.append_row({0.3, 0.2}, {0.3, 0.2});
  CHECK(compute_threshold(em) == doctest::Approx(0.2));

  // Missing entries are skipped inside a row.
  const double nan = std::nan("");
  em.append_row({nan, 0.05}, {nan, 0.05});
  CHECK(compute_threshold(em) == doctest::Approx(0.2));

  // Window restricts to the most recent rows.
  CHECK(compute_threshold(em, 1) == doctest::Approx(0.05));
  CHECK(compute_threshold(em, 2) == doctest::Approx(0.2));

  // Raw track reads the other set of values.
  EntropyMatrix dual(2);
  dual.append_row({0.0, 0.0}, {0.9, 0.7});
  dual.append_row({0.0, 0.0}, {0.5, 0.6});
  CHECK(compute_threshold(dual, 0, EntropyTrack::normalized) == doctest::Approx(0.0));
  CHECK(compute_threshold(dual, 0, EntropyTrack::raw) == doctest::Approx(0.7));

  CHECK_THROWS_AS(compute_threshold(EntropyMatrix(2)), EmptyInput);
}

TEST_CASE("compute_threshold bounds (property)") {
  SeededRng rng(19);
  for (int trial = 0; trial < 1000; ++trial) {
    const int cols = 1 + static_cast<int>(rng.uniform_int(4));
    const int rows = 1 + static_cast<int>(rng.uniform_int(6));
    EntropyMatrix em(cols);
    double lo = 1e300, hi = -1e300;
    for (int r = 0; r < rows; ++r) {
      std::vector<double> vals(cols);
      for (int c = 0; c < cols; ++c) {
        vals[c] = rng.uniform(0.0, 2.0);
        lo = std::min(lo, vals[c]);
        hi = std::max(hi, vals[c]);
      }
      em.append_row(vals, vals);
    }
    const double eta = compute_threshold(em);
    CHECK(eta >= lo - 1e-12);
    CHECK(eta <= hi + 1e-12);
  }
}

TEST_CASE("build_memory sorts and chunks") {
  ReliableSampleMemory mem = build_memory({{10, 0.5}, {11, 0.1}, {12, 0.9}, {13, 0.3}, {14, 0.7}}, 2);
  CHECK(mem.rows.size() == 2);
  CHECK(mem.rows[0] == std::vector<double>{0.1, 0.3});
  CHECK(mem.id_rows[0] == std::vector<int>{11, 13});
  // Remainder goes to the last row.
  CHECK(mem.rows[1] == std::vector<double>{0.5, 0.7, 0.9});
  CHECK(mem.id_rows[1] == std::vector<int>{10, 14, 12});

  CHECK_THROWS_AS(build_memory({}, 2), InvalidInput);
  CHECK_THROWS_AS(build_memory({{0, 0.1}}, 0), InvalidInput);
}

TEST_CASE("select_reliable threshold semantics") {
  std::vector<std::vector<std::pair<int, double>>> per_class = {
      {{0, 0.0}, {1, 0.2}, {2, 0.8}},
      {{3, 0.5}, {4, 0.0}},
      {},
  };
  auto sel = select_reliable(per_class, 0.2);
  CHECK(sel[0] == std::vector<int>{0, 1});
  CHECK(sel[1] == std::vector<int>{4});
  CHECK(sel[2].empty());

  // eta = 0 keeps only exact minima of the normalized lists.
  auto tight = select_reliable(per_class, 0.0);
  CHECK(tight[0] == std::vector<int>{0});
  CHECK(tight[1] == std::vector<int>{4});
}

TEST_CASE("compute_prototypes unit norm class means") {
  Eigen::MatrixXd feats(4, 2);
  feats << 1, 0, 0, 1, 2, 0, -1, 0;
  PrototypeSet ps = compute_prototypes(feats, {0, 0, 1, 2}, 4);
  CHECK(ps.num_classes() == 4);
  CHECK(ps.present[0]);
  CHECK(ps.present[1]);
  CHECK(ps.present[2]);
  CHECK_FALSE(ps.present[3]);  // no samples
  CHECK(ps.support_count == std::vector<int>{2, 1, 1, 0});
  // Class 0 mean (0.5, 0.5) normalizes to (1/sqrt2, 1/sqrt2).
  CHECK(ps.prototypes(0, 0) == doctest::Approx(std::sqrt(0.5)));
  CHECK(ps.prototypes(0, 1) == doctest::Approx(std::sqrt(0.5)));
  CHECK(ps.prototypes.row(1).norm() == doctest::Approx(1.0));
  CHECK(ps.prototypes(2, 0) == doctest::Approx(-1.0));
  CHECK(ps.any_present());

  // A zero-norm mean marks the class absent.
  Eigen::MatrixXd cancel(2, 2);
  cancel << 1, 0, -1, 0;
  PrototypeSet zero = compute_prototypes(cancel, {0, 0}, 1);
  CHECK_FALSE(zero.present[0]);
  CHECK_FALSE(zero.any_present());

  CHECK_THROWS_AS(compute_prototypes(feats, {0, 0, 1}, 2), InvalidInput);  // size mismatch
  CHECK_THROWS_AS(compute_prototypes(feats, {0, 0, 1, 5}, 4), InvalidInput);  // label range
}

TEST_CASE("prototypes are unit norm (property)") {
  SeededRng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(12));
    const int d = 2 + static_cast<int>(rng.uniform_int(4));
    const int k = 1 + static_cast<int>(rng.uniform_int(3));
    Eigen::MatrixXd feats(m, d);
    std::vector<int> labels(m);
    for (int i = 0; i < m; ++i) {
      labels[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
      for (int j = 0; j < d; ++j) feats(i, j) = rng.uniform(-2.0, 2.0);
    }
    PrototypeSet ps = compute_prototypes(feats, labels, k);
    for (int c = 0; c < k; ++c)
      if (ps.present[c]) CHECK(ps.prototypes.row(c).norm() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("dump_csv raw minima with empty cells") {
  EntropyMatrix em(3);
  record_iteration(em, {{0.25, 0.5}, {}, {0.75}});
  std::ostringstream os;
  em.dump_csv(os);
  CHECK(os.str() == "class_0,class_1,class_2\n0.25,,0.75\n");
}
