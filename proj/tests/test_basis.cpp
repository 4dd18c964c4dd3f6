#include "doctest.h"

#include <algorithm>
#include <set>

#include "qprobe/basis.hpp"

using namespace qprobe;

namespace {

// independent binomial for cross-checks
std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("sector dimensions match closed-form combinatorics") {
  // soft bosons: stars and bars C(N + M - 1, M - 1)
  for (int m = 1; m <= 6; ++m)
    for (int n = 0; n <= 6; ++n)
      CHECK(sector_dimension({m, Statistics::Boson, ModeSpec::kUnbounded}, n) ==
            binomial(n + m - 1, m - 1));
  // fermions / hard core: C(M, N)
  for (int m = 1; m <= 8; ++m)
    for (int n = 0; n <= m; ++n) {
      CHECK(sector_dimension({m, Statistics::Fermion, 1}, n) == binomial(m, n));
      CHECK(sector_dimension({m, Statistics::SpinHalf, 1}, n) == binomial(m, n));
    }
}

TEST_CASE("enumeration agrees with the combinatorial count and is descending") {
  for (auto stats : {Statistics::Boson, Statistics::Fermion}) {
    const int cap = stats == Statistics::Boson ? ModeSpec::kUnbounded : 1;
    ModeSpec modes{4, stats, cap};
    const int n = stats == Statistics::Boson ? 5 : 3;
    const Basis b = Basis::sector(modes, n);
    CHECK(b.dimension() == static_cast<int>(sector_dimension(modes, n)));
    for (int i = 0; i + 1 < b.dimension(); ++i)
      CHECK(std::lexicographical_compare(b.state(i + 1).begin(), b.state(i + 1).end(),
                                         b.state(i).begin(), b.state(i).end()));
  }
}

TEST_CASE("index_of inverts positional indexing exactly") {
  const Basis b = Basis::sector({5, Statistics::Boson, 2}, 4);
  for (int i = 0; i < b.dimension(); ++i) CHECK(b.index_of(b.state(i)) == i);
  CHECK_FALSE(b.try_index(Occupation{4, 0, 0, 0, 0}).has_value());  // over cap
  CHECK_FALSE(b.try_index(Occupation{1, 1, 1, 0, 0}).has_value());  // wrong N
}

TEST_CASE("occupancy cap is respected everywhere") {
  const Basis b = Basis::sector({4, Statistics::Boson, 2}, 4);
  for (const auto& st : b.states()) {
    int total = 0;
    for (auto n : st) {
      CHECK(n <= 2);
      total += n;
    }
    CHECK(total == 4);
  }
}

TEST_CASE("sector_union concatenates disjoint sectors") {
  ModeSpec modes{3, Statistics::Boson, ModeSpec::kUnbounded};
  const Basis u = Basis::sector_union(modes, {1, 2, 3});
  const int expect = static_cast<int>(sector_dimension(modes, 1) + sector_dimension(modes, 2) +
                                      sector_dimension(modes, 3));
  CHECK(u.dimension() == expect);
  std::set<std::vector<std::uint8_t>> seen;
  for (const auto& st : u.states()) CHECK(seen.insert(st).second);
}

TEST_CASE("composite basis with particle-number conservation") {
  const Basis sys = Basis::sector({4, Statistics::Boson, 1}, 2);
  const Basis comp = Basis::compose_with_ancillas(sys, {{Statistics::Boson, 2}}, true);
  CHECK(comp.mode_count() == 5);
  CHECK(comp.ancilla_count() == 1);
  for (const auto& st : comp.states()) {
    int total = 0;
    for (auto n : st) total += n;
    CHECK(total == 2);
    CHECK(st[4] <= 2);
  }
  // dimension: n_anc = 0, 1, 2 -> C(4,2) + C(4,1) + C(4,0)
  CHECK(comp.dimension() == 6 + 4 + 1);
}

TEST_CASE("composite basis without conservation covers the exchange window") {
  const Basis sys = Basis::sector({3, Statistics::SpinHalf, 1}, 1);
  const Basis comp = Basis::compose_with_ancillas(sys, {{Statistics::Boson, 3}}, false);
  // system sectors 0..3 intersected with capacity 3: sum over n of C(3,n) = 8,
  // times 4 ancilla levels, minus states outside the window |N_sys - 1| > 3 (none)
  CHECK(comp.dimension() == 8 * 4);
}

TEST_CASE("structural tags distinguish bases") {
  const Basis a = Basis::sector({4, Statistics::Boson, 1}, 2);
  const Basis b = Basis::sector({4, Statistics::Boson, 1}, 2);
  const Basis c = Basis::sector({4, Statistics::Boson, 1}, 3);
  const Basis d = Basis::sector({4, Statistics::Fermion, 1}, 2);
  CHECK(a.tag() == b.tag());
  CHECK(a.tag() != c.tag());
  CHECK(a.tag() != d.tag());
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS(Basis::sector({0, Statistics::Boson, ModeSpec::kUnbounded}, 1));
  CHECK_THROWS(Basis::sector({3, Statistics::Fermion, 1}, 4));  // over capacity
  CHECK_THROWS((void)ModeSpec{3, Statistics::Fermion, 2}.validate());
}
