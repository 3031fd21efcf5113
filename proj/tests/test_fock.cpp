// Copyright 2026 The hdcpf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "hdcpf/elements.hpp"
#include "hdcpf/fock.hpp"

using namespace hdcpf;
using Catch::Approx;

namespace {

const double r2 = 1 / std::sqrt(2.0);

// Symmetric 50:50 splitter between paths a and b (same pol and l).
ModeTransform beam_splitter(const SpacePtr& sp, const std::string& a, const std::string& b) {
  SparseOp m = SparseOp::identity(sp->size());
  const auto pa = sp->path_index(a), pb = sp->path_index(b);
  const int L = sp->truncation();
  for (int pol = 0; pol < 2; ++pol)
    for (int l = -L; l <= L; ++l) {
      const auto ia = sp->index(pa, Pol(pol), l), ib = sp->index(pb, Pol(pol), l);
      m.set_column(ia, {{ia, r2}, {ib, r2}});
      m.set_column(ib, {{ia, r2}, {ib, -r2}});
    }
  return ModeTransform(sp, m, TransformKind::Unitary, "BS");
}

// Haar-ish random unitary on the whole space via QR of a Gaussian matrix.
ModeTransform random_unitary(const SpacePtr& sp, std::mt19937_64& eng) {
  const auto n = static_cast<Eigen::Index>(sp->size());
  std::normal_distribution<double> g;
  Eigen::MatrixXcd z(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) z(i, j) = {g(eng), g(eng)};
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
  Eigen::MatrixXcd q = qr.householderQ();
  SparseOp m(sp->size());
  for (Eigen::Index j = 0; j < n; ++j) {
    SparseOp::Column c;
    for (Eigen::Index i = 0; i < n; ++i) c.push_back({std::size_t(i), q(i, j)});
    m.set_column(std::size_t(j), c);
  }
  return ModeTransform(sp, m, TransformKind::Unitary, "random");
}

SinglePhotonState random_photon(const SpacePtr& sp, std::mt19937_64& eng) {
  std::normal_distribution<double> g;
  std::vector<cplx> a(sp->size());
  for (auto& x : a) x = {g(eng), g(eng)};
  return SinglePhotonState(sp, a).normalized();
}

}  // namespace

TEST_CASE("injection of product states", "[fock]") {
  auto sp = make_space({"A", "B"}, 2);
  auto one = inject_product({SinglePhotonState::basis(sp, {"A", Pol::H, 0})});
  REQUIRE(one.size() == 1);
  CHECK(one.amp(std::vector<Mode>{{"A", Pol::H, 0}}) == cplx(1.0));

  // identical mode: |2> with basis coefficient 1
  auto m = SinglePhotonState::basis(sp, {"A", Pol::V, 1});
  auto two = inject_product({m, m});
  REQUIRE(two.size() == 1);
  CHECK(std::abs(two.amp(std::vector<Mode>{{"A", Pol::V, 1}, {"A", Pol::V, 1}}) - 1.0) < 1e-15);

  // permuted order gives the identical term map
  std::mt19937_64 eng(7);
  auto p = random_photon(sp, eng), q = random_photon(sp, eng), r = random_photon(sp, eng);
  auto s1 = inject_product({p, q, r});
  auto s2 = inject_product({r, p, q});
  REQUIRE(s1.size() == s2.size());
  for (const auto& [c, v] : s1.terms()) CHECK(std::abs(v - s2.amp(c)) < 1e-14);
  CHECK(s1.norm2() == Approx(1.0).epsilon(1e-12));

  auto other = make_space({"A"}, 2);
  REQUIRE_THROWS_AS(inject_product({p, SinglePhotonState::basis(other, {"A", Pol::H, 0})}),
                    SpaceMismatch);
}

TEST_CASE("four-photon input expands into sixteen terms", "[fock]") {
  // photons 1 and 4 each in (|a>+|b>)/sqrt2, auxiliaries in (|p>+|d-1>)/sqrt2
  auto sp = make_space({"A1", "B1", "A2", "B2"}, 2);
  auto sup = [&](const std::string& path, int l1, int l2) {
    SinglePhotonState s(sp);
    s.add({path, Pol::H, l1}, r2).add({path, Pol::H, l2}, r2);
    return s;
  };
  auto st = inject_product({sup("A1", -2, 0), sup("B1", -1, 1), sup("B2", -1, 1), sup("A2", 0, 1)});
  REQUIRE(st.size() == 16);
  for (const auto& [c, v] : st.terms()) CHECK(std::abs(v - 0.25) < 1e-14);
}

TEST_CASE("Hong-Ou-Mandel bunching", "[fock]") {
  auto sp = make_space({"a", "b"}, 0);
  auto st = inject_product({SinglePhotonState::basis(sp, {"a", Pol::H, 0}),
                            SinglePhotonState::basis(sp, {"b", Pol::H, 0})});
  auto out = apply_transform(beam_splitter(sp, "a", "b"), st);
  CHECK(std::abs(out.amp(std::vector<Mode>{{"a", Pol::H, 0}, {"b", Pol::H, 0}})) < 1e-12);
  CHECK(std::abs(out.amp(std::vector<Mode>{{"a", Pol::H, 0}, {"a", Pol::H, 0}})) ==
        Approx(r2).epsilon(1e-14));
  CHECK(out.norm2() == Approx(1.0).epsilon(1e-14));

  DetectionPattern coinc{{{"a", 1}, {"b", 1}}, {}};
  REQUIRE_THROWS_AS(post_select(out, coinc), EmptyPostSelection);

  // the same effect between polarization modes behind a half-wave plate
  auto sp2 = make_space({"A"}, 0);
  auto hv = inject_product({SinglePhotonState::basis(sp2, {"A", Pol::H, 0}),
                            SinglePhotonState::basis(sp2, {"A", Pol::V, 0})});
  auto o2 = apply_transform(element_transform(el::hwp(kPi / 8, "A"), sp2), hv);
  CHECK(std::abs(o2.amp(std::vector<Mode>{{"A", Pol::H, 0}, {"A", Pol::V, 0}})) < 1e-12);
}

TEST_CASE("unitary evolution preserves the norm and composes", "[fock]") {
  auto sp = make_space({"a", "b"}, 1);  // 12 modes
  std::mt19937_64 eng(2026);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 4;
    std::vector<SinglePhotonState> ph;
    for (int k = 0; k < n; ++k) ph.push_back(random_photon(sp, eng));
    auto st = inject_product(ph);
    auto A = random_unitary(sp, eng), B = random_unitary(sp, eng);
    auto once = apply_transform(compose_transforms({B, A}), st);
    auto twice = apply_transform(A, apply_transform(B, st));
    CHECK(once.norm2() == Approx(1.0).margin(1e-10));
    double worst = 0.0;
    for (const auto& [c, v] : once.terms()) worst = std::max(worst, std::abs(v - twice.amp(c)));
    for (const auto& [c, v] : twice.terms()) worst = std::max(worst, std::abs(v - once.amp(c)));
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("post-selection", "[fock]") {
  auto sp = make_space({"a", "b"}, 0);
  auto st = inject_product({SinglePhotonState::basis(sp, {"a", Pol::H, 0}),
                            SinglePhotonState::basis(sp, {"b", Pol::V, 0})});
  auto all = post_select(st, DetectionPattern{{{"a", 1}, {"b", 1}}, {}});
  CHECK(all.probability == 1.0);
  CHECK(all.state == st);

  auto split = apply_transform(beam_splitter(sp, "a", "b"), st);
  auto half = post_select(split, DetectionPattern{{{"a", 1}, {"b", 1}}, {}});
  CHECK(half.probability == Approx(0.5).epsilon(1e-14));
  CHECK(half.probability + half.discarded == Approx(1.0).epsilon(1e-14));

  REQUIRE_THROWS_AS(post_select(st, DetectionPattern{{{"a", 3}}, {}}), EmptyPostSelection);
  REQUIRE_THROWS_AS(post_select(st, DetectionPattern{{{"zz", 1}}, {}}), SpaceMismatch);

  DetectionPattern alias{{{"both", 2}}, {{"both", {"a", "b"}}}};
  CHECK(post_select(st, alias).probability == 1.0);
}

TEST_CASE("outcome distributions", "[fock]") {
  auto sp = make_space({"a", "b"}, 1);
  auto h = inject_product({SinglePhotonState::basis(sp, {"a", Pol::H, 0})});
  auto d = outcome_distribution(h, Resolution{{{"a", Analyzer::HV}}, {}});
  CHECK(d.size() == 1);
  CHECK(d.at("a:H:0") == Approx(1.0));

  SinglePhotonState diag(sp);
  diag.add({"a", Pol::H, 0}, r2).add({"a", Pol::V, 0}, r2);
  auto dd = inject_product({diag});
  auto dhv = outcome_distribution(dd, Resolution{{{"a", Analyzer::HV}}, {}});
  CHECK(dhv.at("a:H:0") == Approx(0.5));
  CHECK(dhv.at("a:V:0") == Approx(0.5));
  auto dda = outcome_distribution(dd, Resolution{{{"a", Analyzer::DA}}, {}});
  CHECK(dda.at("a:D:0") == Approx(1.0));
  CHECK(dda.count("a:A:0") == 0);

  SinglePhotonState right(sp);
  right.add({"a", Pol::H, 1}, r2).add({"a", Pol::V, 1}, kI * r2);
  auto drl = outcome_distribution(inject_product({right}), Resolution{{{"a", Analyzer::RL}}, {}});
  CHECK(drl.at("a:R:+1") == Approx(1.0));

  REQUIRE_THROWS_AS(outcome_distribution(h, Resolution{{{"b", Analyzer::HV}}, {}}), BasisIncomplete);
}

TEST_CASE("joint Bell readout of the heralded four-photon state", "[fock]") {
  // photons 2 and 3 on paths D1, D2 with |p> = l=-1 and |d-1> = l=+1;
  // photons 1 and 4 on C1, C2 carry the qudit data.
  auto sp = make_space({"C1", "D1", "D2", "C2"}, 2);
  auto mode = [&](const std::string& p, int l) {
    return static_cast<std::uint32_t>(sp->index(Mode{p, Pol::H, l}));
  };
  // psi_14 = (|0>+|3>)/sqrt2 x (|1>+|3>)/sqrt2 encoded as l = -2,+1 and -1,+1;
  // build psi_f of the protocol directly (after H_3), then resolve in the Bell basis.
  const int P = -1, Q = 1;
  Monomials f;
  auto c = [&](int m, int n) {
    const double cm = (m == -2 || m == 1) ? r2 : 0.0;
    const double cn = (n == -1 || n == 1) ? r2 : 0.0;
    return cm * cn;
  };
  for (int m : {-2, 1})
    for (int n : {-1, 1}) {
      const bool m3 = m == 1, n3 = n == 1;
      const int l2 = m3 ? Q : P;
      // photon 3 after the subspace Hadamard
      const double s = n3 ? -1.0 : 1.0;
      f[detail::merged(detail::merged({mode("C1", m)}, {mode("D1", l2)}),
                       detail::merged({mode("D2", P)}, {mode("C2", n)}))] += c(m, n) * r2;
      Config k = detail::merged(detail::merged({mode("C1", m)}, {mode("D1", l2)}),
                                detail::merged({mode("D2", Q)}, {mode("C2", n)}));
      f[k] += c(m, n) * r2 * s;
    }
  auto psi = MultiPhotonState::from_monomials(sp, f);

  JointBasis bell{{"D1", "D2"}, {}};
  auto bs = [&](int a2, int a3, int b2, int b3, double sign) {
    Monomials mm;
    mm[detail::merged({mode("D1", a2)}, {mode("D2", a3)})] += r2;
    mm[detail::merged({mode("D1", b2)}, {mode("D2", b3)})] += sign * r2;
    return MultiPhotonState::from_monomials(sp, mm);
  };
  bell.states = {{"PhiPlus", bs(P, P, Q, Q, 1)},
                 {"PhiMinus", bs(P, P, Q, Q, -1)},
                 {"PsiPlus", bs(P, Q, Q, P, 1)},
                 {"PsiMinus", bs(P, Q, Q, P, -1)}};
  Resolution res{{{"C1", Analyzer::HV}, {"C2", Analyzer::HV}}, {bell}};
  auto dist = outcome_distribution(psi, res);
  std::map<std::string, double> per_bell;
  for (const auto& [k, p] : dist) per_bell[k.substr(0, k.find(','))] += p;
  REQUIRE(per_bell.size() == 4);
  for (const auto& [k, p] : per_bell) CHECK(p == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("multinomial sampling", "[fock]") {
  Distribution one{{"a", 1.0}};
  CHECK(sample_counts(one, 0, 1).at("a") == 0);
  CHECK(sample_counts(one, 100, 1).at("a") == 100);

  Distribution fair{{"h", 0.5}, {"t", 0.5}};
  auto c = sample_counts(fair, 10000, 12345);
  CHECK(c.at("h") + c.at("t") == 10000);
  CHECK(std::abs(double(c.at("h")) - 5000.0) < 5 * 50.0);
  CHECK(sample_counts(fair, 10000, 12345) == c);
  CHECK(sample_counts(fair, 10000, 12345, 1) != c);

  Distribution three{{"x", 0.2}, {"y", 0.3}, {"z", 0.5}};
  auto t = sample_counts(three, 777, 9);
  CHECK(t.at("x") + t.at("y") + t.at("z") == 777);
}

TEST_CASE("canonical text form", "[fock]") {
  auto sp = make_space({"C", "D"}, 2);
  SinglePhotonState a(sp);
  a.add({"C", Pol::H, 1}, r2).add({"D", Pol::V, -1}, cplx(0, r2));
  auto st = inject_product({a, SinglePhotonState::basis(sp, {"D", Pol::H, 0})});
  const auto txt = st.to_text();
  CHECK(txt.find("C:H:+1,D:H:0 0.707106781187 0") != std::string::npos);
  CHECK(txt.find("D:H:0,D:V:-1 0 0.707106781187") != std::string::npos);
}
