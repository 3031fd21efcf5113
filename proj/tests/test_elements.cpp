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

#include "hdcpf/elements.hpp"

using namespace hdcpf;

namespace {

const double r2 = 1 / std::sqrt(2.0);

SpacePtr one_path(int L = 4) { return make_space({"A"}, L); }

// Image of A:pol:l under t, as a state.
SinglePhotonState img(const ModeTransform& t, Pol p, int l) {
  return apply_to_single_photon(t, SinglePhotonState::basis(t.space(), {"A", p, l}));
}

bool close(cplx a, cplx b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("half-wave plate rotates linear polarization", "[elements]") {
  auto sp = one_path();
  auto t = element_transform(el::hwp(kPi / 8, "A"), sp);
  auto s = img(t, Pol::H, 0);
  CHECK(close(s.amp(Mode{"A", Pol::H, 0}), r2));
  CHECK(close(s.amp(Mode{"A", Pol::V, 0}), r2));

  const double a = 0.37;
  auto u = element_transform(el::hwp(a, "A"), sp);
  auto v = img(u, Pol::V, 2);
  CHECK(close(v.amp(Mode{"A", Pol::H, 2}), std::sin(2 * a)));
  CHECK(close(v.amp(Mode{"A", Pol::V, 2}), -std::cos(2 * a)));
}

TEST_CASE("quarter-wave plate rows", "[elements]") {
  auto sp = one_path();
  const cplx e = std::polar(1.0, kPi / 4);
  auto q = element_transform(el::qwp(kPi / 4, "A"), sp);
  auto h = img(q, Pol::H, 0);
  auto v = img(q, Pol::V, 0);
  // e^{i pi/4} R and -e^{-i pi/4} L
  CHECK(close(h.amp(Mode{"A", Pol::H, 0}), e * r2));
  CHECK(close(h.amp(Mode{"A", Pol::V, 0}), e * kI * r2));
  CHECK(close(v.amp(Mode{"A", Pol::H, 0}), -std::conj(e) * r2));
  CHECK(close(v.amp(Mode{"A", Pol::V, 0}), std::conj(e) * kI * r2));

  auto m = element_transform(el::qwp(-kPi / 4, "A"), sp);
  auto mh = img(m, Pol::H, 0);
  CHECK(close(mh.amp(Mode{"A", Pol::H, 0}), e * r2));
  CHECK(close(mh.amp(Mode{"A", Pol::V, 0}), -e * kI * r2));
  // A retarder is a symmetric matrix, so the V row is fixed by the H row;
  // it equals e^{i pi/4} R up to the constant factor -i.
  auto mv = img(m, Pol::V, 0);
  CHECK(close(mv.amp(Mode{"A", Pol::H, 0}), -kI * e * r2));
  CHECK(close(mv.amp(Mode{"A", Pol::V, 0}), -kI * e * kI * r2));
  CHECK(close(m.at({"A", Pol::H, 0}, {"A", Pol::V, 0}), m.at({"A", Pol::V, 0}, {"A", Pol::H, 0})));

  // angle 0: phase i on H only
  auto z = element_transform(el::qwp(0.0, "A"), sp);
  CHECK(close(z.at({"A", Pol::H, 1}, {"A", Pol::H, 1}), kI));
  CHECK(close(z.at({"A", Pol::V, 1}, {"A", Pol::V, 1}), 1.0));
}

TEST_CASE("Dove prism", "[elements]") {
  auto sp = one_path();
  auto d = element_transform(el::dp(kPi / 4, "A"), sp);
  auto s = img(d, Pol::H, 1);
  CHECK(close(s.amp(Mode{"A", Pol::H, -1}), -1.0));
  CHECK(s.norm2() == Catch::Approx(1.0));

  // two identical prisms: i * i = -1 on every mode
  for (double g : {0.0, 0.3, kPi / 8, -1.1}) {
    auto t = element_transform(el::dp(g, "A"), sp);
    auto tt = compose_transforms({t, t});
    for (int l = -4; l <= 4; ++l)
      for (Pol p : {Pol::H, Pol::V}) CHECK(close(tt.at({"A", p, l}, {"A", p, l}), -1.0));
    // opposite angles: -e^{-4 i g l}, which is -1 only where 4 g l is a multiple of 2 pi
    auto tm = compose_transforms({element_transform(el::dp(-g, "A"), sp), t});
    for (int l = -4; l <= 4; ++l)
      CHECK(close(tm.at({"A", Pol::H, l}, {"A", Pol::H, l}), -std::exp(-4.0 * kI * g * double(l))));
  }

  // polarization-selective prism leaves the other polarization alone
  auto sel = element_transform(el::dp_pol(kPi / 4, Pol::V, "A"), sp);
  CHECK(close(sel.at({"A", Pol::H, 2}, {"A", Pol::H, 2}), 1.0));
  CHECK(close(sel.at({"A", Pol::V, -2}, {"A", Pol::V, 2}), kI * std::exp(kI * kPi)));
}

TEST_CASE("q-plate shifts OAM and flips handedness", "[elements]") {
  auto sp = one_path();
  auto q = element_transform(el::qp(0.5, "A"), sp);
  SinglePhotonState R(sp);
  R.add({"A", Pol::H, 0}, r2).add({"A", Pol::V, 0}, kI * r2);
  auto out = apply_to_single_photon(q, R);
  // -> L|+1>
  CHECK(close(out.amp(Mode{"A", Pol::H, 1}), r2));
  CHECK(close(out.amp(Mode{"A", Pol::V, 1}), -kI * r2));
  CHECK(out.norm2() == Catch::Approx(1.0));

  SinglePhotonState Lc(sp);
  Lc.add({"A", Pol::H, 0}, r2).add({"A", Pol::V, 0}, -kI * r2);
  auto outl = apply_to_single_photon(q, Lc);
  CHECK(close(outl.amp(Mode{"A", Pol::H, -1}), r2));
  CHECK(close(outl.amp(Mode{"A", Pol::V, -1}), kI * r2));

  // QP applied twice returns the input within the window
  auto qq = compose_transforms({q, q});
  for (int l = -2; l <= 2; ++l)
    for (Pol p : {Pol::H, Pol::V}) {
      auto s = apply_to_single_photon(qq, SinglePhotonState::basis(sp, {"A", p, l}));
      CHECK(close(s.amp(Mode{"A", p, l}), 1.0));
    }
  for (double off : {0.0, kPi / 8, kPi / 4}) {
    auto qo = element_transform(el::qp(0.5, "A", off), sp);
    auto qq2 = compose_transforms({qo, qo});
    auto s = apply_to_single_photon(qq2, SinglePhotonState::basis(sp, {"A", Pol::V, 1}));
    CHECK(close(s.amp(Mode{"A", Pol::V, 1}), 1.0));
  }

  REQUIRE_THROWS_AS(img(q, Pol::H, 4), TruncationOverflow);
  REQUIRE_THROWS_AS(element_transform(el::qp(0.25, "A"), sp), InvalidParameter);
}

TEST_CASE("spiral phase plate", "[elements]") {
  auto sp = one_path(2);
  auto t = element_transform(el::spp(-1, "A"), sp);
  auto s = img(t, Pol::H, 0);
  CHECK(close(s.amp(Mode{"A", Pol::H, -1}), 1.0));
  REQUIRE_THROWS_AS(img(t, Pol::H, -2), TruncationOverflow);
}

TEST_CASE("composition in application order", "[elements]") {
  auto sp = one_path();
  auto h = element_transform(el::hwp(kPi / 8, "A"), sp);
  auto hh = compose_transforms({h, h});
  CHECK(SparseOp::max_abs_diff(hh.matrix(), SparseOp::identity(sp->size())) < 1e-12);
  for (double a : {0.1, 0.7, -2.0}) {
    auto t = element_transform(el::hwp(a, "A"), sp);
    auto tt = compose_transforms({t, t});
    CHECK(SparseOp::max_abs_diff(tt.matrix(), SparseOp::identity(sp->size())) < 1e-12);
  }

  // auxiliary-photon chain: QP then QWP(pi/4) on H|0>
  std::vector<Element> chain{el::qp(0.5, "A", kPi / 8), el::qwp(kPi / 4, "A")};
  auto c = chain_transform(chain, sp);
  auto s = img(c, Pol::H, 0);
  SinglePhotonState target(sp);
  target.add({"A", Pol::V, -1}, r2).add({"A", Pol::H, 1}, r2);
  const auto ph = alignment_phase(target.amps(), s.amps());
  CHECK(std::abs(target.inner(s.scaled(ph)) - 1.0) < 1e-12);
  CHECK(close(s.scaled(ph).amp(Mode{"A", Pol::V, -1}), r2));

  // the same chain with a zero-offset plate leaves a relative phase of i
  std::vector<Element> plain{el::qp(0.5, "A"), el::qwp(kPi / 4, "A")};
  auto p = img(chain_transform(plain, sp), Pol::H, 0);
  CHECK(close(p.amp(Mode{"A", Pol::V, -1}) / p.amp(Mode{"A", Pol::H, 1}), kI));
}

TEST_CASE("polarizer is a projector", "[elements]") {
  auto sp = one_path();
  auto t = element_transform(el::pol(kPi / 4, "A"), sp);
  CHECK(t.kind() == TransformKind::Projector);
  CHECK(t.projector_defect() < 1e-14);
  auto s = img(t, Pol::H, 0);
  CHECK(close(s.amp(Mode{"A", Pol::H, 0}), 0.5));
  CHECK(close(s.amp(Mode{"A", Pol::V, 0}), 0.5));
  CHECK(s.probability() == Catch::Approx(0.5));

  auto u = element_transform(el::hwp(0.2, "A"), sp);
  CHECK(compose_transforms({u, t}).kind() == TransformKind::Projector);
}

TEST_CASE("mirror, phase plate and delay line", "[elements]") {
  auto sp = one_path();
  auto m = element_transform(el::mirror("A"), sp);
  auto s = img(m, Pol::H, 1);
  CHECK(close(s.amp(Mode{"A", Pol::H, -1}), kI));

  Conventions keep;
  keep.reflection_flips_oam = false;
  auto k = element_transform(el::mirror("A"), sp, keep);
  CHECK(close(img(k, Pol::H, 1).amp(Mode{"A", Pol::H, 1}), kI));

  auto pp = element_transform(el::pp(kPi, "A"), sp);
  CHECK(close(img(pp, Pol::V, 2).amp(Mode{"A", Pol::V, 2}), -1.0));
  auto dl = element_transform(el::dl("A"), sp);
  CHECK(SparseOp::max_abs_diff(dl.matrix(), SparseOp::identity(sp->size())) == 0.0);
}

TEST_CASE("polarizing beam splitter routing", "[elements]") {
  auto sp = make_space({"X", "Y", "U", "W"}, 2);
  auto t = element_transform(el::pbs({"X", "Y"}, {"U", "W"}), sp);
  CHECK(close(t.at({"U", Pol::H, 1}, {"X", Pol::H, 1}), 1.0));
  CHECK(close(t.at({"W", Pol::V, -1}, {"X", Pol::V, 1}), kI));
  CHECK(close(t.at({"W", Pol::H, 2}, {"Y", Pol::H, 2}), 1.0));
  CHECK(close(t.at({"U", Pol::V, 0}, {"Y", Pol::V, 0}), kI));
  CHECK(t.isometry_defect() < 1e-14);
  CHECK(t.coisometry_defect() < 1e-14);

  // an output path may coincide with an input path
  auto sp2 = make_space({"P2", "B", "D"}, 2);
  auto u = element_transform(el::pbs({"P2", "B"}, {"D", "P2"}), sp2);
  CHECK(close(u.at({"D", Pol::H, 0}, {"P2", Pol::H, 0}), 1.0));
  CHECK(close(u.at({"P2", Pol::H, 1}, {"B", Pol::H, 1}), 1.0));
  CHECK(close(u.at({"D", Pol::V, 1}, {"B", Pol::V, -1}), kI));
  CHECK(u.coisometry_defect() < 1e-14);

  Conventions bad;
  bad.pbs_reflection_phase = -kPi / 2;
  auto b = element_transform(el::pbs({"X", "Y"}, {"U", "W"}), sp, bad);
  CHECK(close(b.at({"W", Pol::V, -1}, {"X", Pol::V, 1}), -kI));

  REQUIRE_THROWS_AS(element_transform(el::pbs({"X", "X"}, {"U", "W"}), sp), InvalidParameter);
  REQUIRE_THROWS_AS(element_transform(el::pbs({"X", "Q"}, {"U", "W"}), sp), SpaceMismatch);
}

TEST_CASE("O1-CNOT matches its closed form", "[elements]") {
  auto sp = one_path(4);
  auto t = element_transform(el::okcnot(1, "A"), sp);
  for (int l = -4; l <= 4; ++l) {
    const cplx ph = std::exp(-kI * double(l) * kPi / 2.0);
    const bool even = (l % 2) == 0;
    for (Pol in : {Pol::H, Pol::V}) {
      const Pol flipped = in == Pol::H ? Pol::V : Pol::H;
      const Pol outp = even ? in : flipped;
      const cplx expect = in == Pol::H ? ph : -ph;
      for (Pol o : {Pol::H, Pol::V})
        for (int lo = -4; lo <= 4; ++lo) {
          const cplx want = (o == outp && lo == -l) ? expect : cplx(0.0);
          CHECK(close(t.at({"A", o, lo}, {"A", in, l}), want, 1e-10));
        }
    }
  }
  auto s = img(t, Pol::H, 1);
  CHECK(close(s.amp(Mode{"A", Pol::V, -1}), -kI));
}

TEST_CASE("O2-CNOT matches its closed form", "[elements]") {
  auto sp = one_path(4);
  auto t = element_transform(el::okcnot(2, "A"), sp);
  for (int l = -4; l <= 4; ++l) {
    const double x = double(l - 1);
    const cplx pre = std::exp(-kI * x * kPi / 4.0);
    const cplx e = std::exp(kI * x * kPi / 2.0);
    const cplx hh = pre * (1.0 - e) / 2.0, hv = pre * kI * (1.0 + e) / 2.0;
    const cplx vh = -pre * (1.0 + e) / 2.0, vv = -pre * kI * (1.0 - e) / 2.0;
    CHECK(close(t.at({"A", Pol::H, -l}, {"A", Pol::H, l}), hh, 1e-10));
    CHECK(close(t.at({"A", Pol::V, -l}, {"A", Pol::H, l}), hv, 1e-10));
    CHECK(close(t.at({"A", Pol::H, -l}, {"A", Pol::V, l}), vh, 1e-10));
    CHECK(close(t.at({"A", Pol::V, -l}, {"A", Pol::V, l}), vv, 1e-10));
  }
  CHECK(close(img(t, Pol::H, 1).amp(Mode{"A", Pol::V, -1}), kI));
  CHECK(close(img(t, Pol::V, 1).amp(Mode{"A", Pol::H, -1}), -1.0));
  REQUIRE_THROWS_AS(element_transform(el::okcnot(3, "A"), sp), InvalidParameter);
}

TEST_CASE("every unitary element is unitary on its domain", "[elements]") {
  auto sp = make_space({"A", "B", "C", "D"}, 4);
  const std::vector<Element> all{
      el::hwp(0.3, "A"),   el::qwp(-0.9, "B"),      el::qp(0.5, "C", 0.2),
      el::spp(2, "D"),     el::dp(0.77, "A"),       el::dp_pol(-0.4, Pol::H, "B"),
      el::pp(1.3, "C"),    el::mirror("D"),         el::dl("A"),
      el::okcnot(1, "B"),  el::okcnot(2, "C"),      el::pbs({"A", "B"}, {"C", "D"}),
      el::route("C", "A")};
  for (const auto& e : all) {
    auto t = element_transform(e, sp);
    INFO(to_string(e));
    CHECK(t.kind() == TransformKind::Unitary);
    CHECK(t.isometry_defect() < 1e-10);
  }
}

TEST_CASE("descriptor grammar", "[elements]") {
  auto e = element_from_string("HWP(angle=pi/8) @ A");
  CHECK(e.kind == "HWP");
  CHECK(e.number("angle") == kPi / 8);
  CHECK(e.path == "A");
  CHECK(element_from_string(to_string(e)) == e);

  auto p = element_from_string("PBS(in=[A,B],out=[C,D])");
  CHECK(p.list("in") == std::vector<std::string>{"A", "B"});
  CHECK(to_string(p) == "PBS(in=[A,B],out=[C,D])");

  CHECK(element_from_string("QP(q=0.5)").number("q") == 0.5);
  CHECK(element_from_string("DP(angle=-3*pi/4,pol=H)@P2").word("pol") == "H");
  CHECK(element_from_string("MIRROR@D").kind == "MIRROR");
  CHECK(element_from_string("MIRROR()@D").params.empty());

  auto bad = parse_element("HWP(angle=)");
  REQUIRE_FALSE(bad.element);
  REQUIRE(bad.issues.size() == 1);
  CHECK(bad.issues[0].message.find("missing parameter value") != std::string::npos);
  CHECK(bad.issues[0].column == 10);

  CHECK_FALSE(parse_element("FOO(x=1)").element);
  REQUIRE_THROWS_AS(element_from_string("FOO(x=1)"), UnknownElement);
  REQUIRE_THROWS_AS(element_from_string("HWP(angle=1"), InvalidParameter);
  CHECK_FALSE(parse_element("HWP(angle=1) trailing").element);
  CHECK_FALSE(parse_element("HWP(angle=2*pie)").element);

  auto sp = one_path();
  REQUIRE_THROWS_AS(element_transform(Element{"BOGUS", {}, "A"}, sp), UnknownElement);
  REQUIRE_THROWS_AS(element_transform(Element{"HWP", {}, "A"}, sp), InvalidParameter);
  REQUIRE_THROWS_AS(element_transform(el::hwp(0.1, "Z"), sp), SpaceMismatch);
}

TEST_CASE("convention fixture matches the defaults", "[elements]") {
  const auto c = load_conventions(std::string(HDCPF_FIXTURES) + "/conventions.txt");
  CHECK(c == Conventions{});
  REQUIRE_THROWS_AS(load_conventions("/nonexistent/conv.txt"), InvalidParameter);
}
