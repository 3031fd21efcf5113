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

#include "hdcpf/mode_space.hpp"

using namespace hdcpf;
using Catch::Approx;

TEST_CASE("mode space index is a bijection over the window", "[mode_space]") {
  auto sp = make_space({"A", "B", "C"}, 3);
  REQUIRE(sp->size() == 3 * 2 * 7);
  std::vector<bool> seen(sp->size(), false);
  for (const auto& p : sp->paths())
    for (Pol pol : {Pol::H, Pol::V})
      for (int l = -3; l <= 3; ++l) {
        const Mode m{p, pol, l};
        const auto i = sp->index(m);
        REQUIRE(i < sp->size());
        REQUIRE_FALSE(seen[i]);
        seen[i] = true;
        REQUIRE(sp->mode(i) == m);
      }
}

TEST_CASE("out-of-window modes and bad spaces are rejected", "[mode_space]") {
  auto sp = make_space({"A"}, 2);
  REQUIRE_THROWS_AS(sp->index(Mode{"A", Pol::H, 3}), TruncationOverflow);
  REQUIRE_THROWS_AS(sp->index(Mode{"Z", Pol::H, 0}), SpaceMismatch);
  REQUIRE_THROWS_AS(make_space({"A", "A"}, 2), InvalidParameter);
  REQUIRE_THROWS_AS(make_space({"A"}, -1), InvalidParameter);
}

TEST_CASE("mode text form", "[mode_space]") {
  REQUIRE(to_string(Mode{"C", Pol::H, 1}) == "C:H:+1");
  REQUIRE(to_string(Mode{"P1", Pol::V, -2}) == "P1:V:-2");
  REQUIRE(to_string(Mode{"D", Pol::H, 0}) == "D:H:0");
}

TEST_CASE("identity composition and space checks", "[mode_space]") {
  auto sp = make_space({"A", "B"}, 2);
  auto id = ModeTransform::identity(sp);
  auto c = compose_transforms({id, id});
  REQUIRE(SparseOp::max_abs_diff(c.matrix(), id.matrix()) == 0.0);
  REQUIRE(c.kind() == TransformKind::Unitary);

  auto other = make_space({"A", "C"}, 2);
  REQUIRE_THROWS_AS(compose_transforms({id, ModeTransform::identity(other)}), SpaceMismatch);

  auto s = SinglePhotonState::basis(sp, {"A", Pol::V, 1});
  auto out = apply_to_single_photon(id, s);
  REQUIRE(out.amp(Mode{"A", Pol::V, 1}) == cplx(1.0));
  REQUIRE_THROWS_AS(apply_to_single_photon(id, SinglePhotonState(other)), SpaceMismatch);
}

TEST_CASE("self check flags non-unitary matrices", "[mode_space]") {
  auto sp = make_space({"A"}, 0);
  SparseOp m = SparseOp::identity(sp->size());
  m.set_column(0, {{0, 2.0}});
  ModeTransform t(sp, m, TransformKind::Unitary, "bad");
  REQUIRE_THROWS_AS(t.self_check(), ConventionError);
  ModeTransform p(sp, m, TransformKind::Projector, "bad");
  REQUIRE_THROWS_AS(p.self_check(), ConventionError);
}

TEST_CASE("alignment phase makes rays comparable", "[mode_space]") {
  std::vector<cplx> a{1.0 / std::sqrt(2.0), cplx(0, 1) / std::sqrt(2.0)};
  const cplx g = std::polar(1.0, 0.7);
  std::vector<cplx> b{a[0] * g, a[1] * g};
  const cplx ph = alignment_phase(a, b);
  REQUIRE(std::abs(b[0] * ph - a[0]) < 1e-14);
  REQUIRE(std::abs(b[1] * ph - a[1]) < 1e-14);
  REQUIRE(ray_overlap(a, b) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("projector application carries the post-selection probability", "[mode_space]") {
  auto sp = make_space({"A"}, 1);
  SparseOp m(sp->size());
  const auto h0 = sp->index(Mode{"A", Pol::H, 0});
  m.set_column(h0, {{h0, 1.0}});
  ModeTransform proj(sp, m, TransformKind::Projector, "keep H0");
  proj.self_check();
  SinglePhotonState s(sp);
  s.add({"A", Pol::H, 0}, 0.6).add({"A", Pol::V, 1}, 0.8);
  auto out = apply_to_single_photon(proj, s);
  REQUIRE(out.probability() == Approx(0.36).epsilon(1e-14));
  REQUIRE_THROWS_AS(SinglePhotonState(sp).normalized(), EmptyPostSelection);
}
