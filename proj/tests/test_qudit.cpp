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

#include <random>

#include "hdcpf/qudit.hpp"

using namespace hdcpf;
using Catch::Approx;

namespace {

QuditState random_state(int d, std::mt19937_64& eng) {
  std::normal_distribution<double> g;
  Eigen::VectorXcd v(d * d);
  for (auto& x : v) x = {g(eng), g(eng)};
  return QuditState(d, v).normalized();
}

Eigen::VectorXcd ket(int d, std::initializer_list<std::pair<int, cplx>> parts) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d);
  for (auto [k, a] : parts) v(k) += a;
  return v;
}

}  // namespace

TEST_CASE("CPF oracle", "[qudit]") {
  Eigen::MatrixXcd cz = Eigen::MatrixXcd::Identity(4, 4);
  cz(3, 3) = -1;
  CHECK(cpf_oracle(2) == cz);
  REQUIRE_THROWS_AS(cpf_oracle(1), InvalidDimension);

  const double r = 1 / std::sqrt(2.0);
  auto in = QuditState::product(ket(4, {{3, 1.0}}), ket(4, {{1, r}, {3, r}}));
  Eigen::VectorXcd out = cpf_oracle(4) * in.amps();
  auto want = QuditState::product(ket(4, {{3, 1.0}}), ket(4, {{1, r}, {3, -r}}));
  CHECK((out - want.amps()).norm() < 1e-15);

  for (int d = 2; d <= 6; ++d) {
    auto u = cpf_oracle(d);
    CHECK((u * u - QuditOperator::Identity(d * d, d * d)).norm() == 0.0);
    CHECK(u.isDiagonal());
    CHECK((cpf_oracle(d) * QuditState::basis(d, 0, 0).amps() - QuditState::basis(d, 0, 0).amps())
              .norm() == 0.0);
    // swap symmetry
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n) CHECK(u(m * d + n, m * d + n) == u(n * d + m, n * d + m));
  }
}

TEST_CASE("ideal HD router", "[qudit]") {
  auto bs = ideal_hd_bs(4);
  CHECK(bs.route(Port::A, 3) == Port::D);
  CHECK(bs.route(Port::B, 1) == Port::D);
  CHECK(bs.route(Port::A, 0) == Port::C);
  CHECK(bs.route(Port::B, 3) == Port::C);
  auto m = bs.matrix();
  CHECK((m.adjoint() * m - QuditOperator::Identity(8, 8)).norm() == 0.0);
  // relabel outputs C -> B, D -> A and apply again: identity
  QuditOperator relabel = QuditOperator::Zero(8, 8);
  relabel.block(4, 0, 4, 4) = QuditOperator::Identity(4, 4);  // C -> B
  relabel.block(0, 4, 4, 4) = QuditOperator::Identity(4, 4);  // D -> A
  CHECK((relabel * m * relabel * m - QuditOperator::Identity(8, 8)).norm() == 0.0);
  REQUIRE_THROWS_AS(ideal_hd_bs(1), InvalidDimension);
}

TEST_CASE("subspace Hadamard", "[qudit]") {
  const double r = 1 / std::sqrt(2.0);
  QuditOperator h2(2, 2);
  h2 << r, r, r, -r;
  CHECK((subspace_hadamard(0, 2) - h2).norm() < 1e-16);
  auto h = subspace_hadamard(1, 4);
  CHECK((h * h - QuditOperator::Identity(4, 4)).norm() < 1e-15);
  CHECK((h * ket(4, {{1, 1.0}}) - ket(4, {{1, r}, {3, r}})).norm() < 1e-15);
  REQUIRE_THROWS_AS(subspace_hadamard(3, 4), InvalidSubspace);
  REQUIRE_THROWS_AS(subspace_hadamard(-1, 4), InvalidSubspace);
}

TEST_CASE("correction unitaries", "[qudit]") {
  CHECK(correction_unitary(BellOutcome::PhiPlus, 3) == QuditOperator::Identity(9, 9));
  auto u = correction_unitary(BellOutcome::PhiMinus, 4);
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) CHECK(u(m * 4 + n, m * 4 + n) == cplx(m == 3 ? -1.0 : 1.0));
  CHECK(correction_unitary(BellOutcome::PsiMinus, 4) ==
        correction_unitary(BellOutcome::PhiMinus, 4) * correction_unitary(BellOutcome::PsiPlus, 4));
}

TEST_CASE("protocol on |3,3>", "[qudit]") {
  auto res = run_protocol(QuditState::basis(4, 3, 3), 1);
  const auto& b = res.branches.at(BellOutcome::PhiPlus);
  CHECK(b.probability == Approx(1.0 / 16).epsilon(1e-12));
  // heralded state is -|3,3> up to the ray; check the oracle relation
  CHECK(oracle_fidelity(QuditState::basis(4, 3, 3), b.state) == Approx(1.0).epsilon(1e-14));
  CHECK(res.splitter_probability[0] == Approx(0.5).epsilon(1e-14));
  CHECK(res.post_selection_probability == Approx(0.25).epsilon(1e-14));
  CHECK(res.accepted_probability({BellOutcome::PhiPlus, BellOutcome::PhiMinus}) ==
        Approx(0.125).epsilon(1e-12));
}

TEST_CASE("protocol equals the oracle for random inputs", "[qudit]") {
  std::mt19937_64 eng(99);
  for (int d = 2; d <= 6; ++d)
    for (int trial = 0; trial < 100; ++trial) {
      auto psi = random_state(d, eng);
      const int p = trial % (d - 1);
      auto res = run_protocol(psi, p);
      const Eigen::VectorXcd ideal = cpf_oracle(d) * psi.amps();
      double sum = 0.0;
      for (auto o : kAllBell) {
        const auto& br = res.branches.at(o);
        sum += br.probability;
        CHECK(std::abs(br.probability - 1.0 / 16) <= 1e-10);
        std::vector<cplx> a(ideal.data(), ideal.data() + ideal.size());
        std::vector<cplx> b(br.state.amps().data(), br.state.amps().data() + ideal.size());
        const cplx ph = alignment_phase(a, b);
        for (auto& x : b) x *= ph;
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
        CHECK(diff < 1e-10);
        CHECK(ray_overlap(a, b) >= 1 - 1e-10);
      }
      CHECK(std::abs(sum - 0.25) <= 1e-10);
      CHECK(std::abs(res.splitter_probability[0] - 0.5) <= 1e-10);
      CHECK(std::abs(res.splitter_probability[1] - 0.5) <= 1e-10);
    }
}

TEST_CASE("auxiliary subspace choice does not matter", "[qudit]") {
  std::mt19937_64 eng(5);
  auto psi = random_state(5, eng);
  auto a = run_protocol(psi, 0), b = run_protocol(psi, 3);
  for (auto o : kAllBell)
    CHECK(a.branches.at(o).state.fidelity(b.branches.at(o).state) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("protocol input validation", "[qudit]") {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(16);
  v(0) = 2.0;
  REQUIRE_THROWS_AS(run_protocol(QuditState(4, v), 1), NotNormalized);
  REQUIRE_THROWS_AS(run_protocol(QuditState::basis(4, 0, 0), 3), InvalidSubspace);
  REQUIRE_THROWS_AS(QuditState(1, Eigen::VectorXcd::Zero(1)), InvalidDimension);
}

TEST_CASE("qudit JSON form", "[qudit]") {
  std::mt19937_64 eng(3);
  auto s = random_state(3, eng);
  auto j = s.to_json();
  CHECK(j.size() == 9);
  CHECK(j[0].size() == 4);
  auto back = QuditState::from_json(3, j);
  CHECK((back.amps() - s.amps()).norm() == 0.0);
  CHECK(QuditState::basis(4, 2, 1).to_json().dump() == "[[2,1,1.0,0.0]]");
  CHECK(bell_from_string("PsiMinus") == BellOutcome::PsiMinus);
  REQUIRE_THROWS_AS(bell_from_string("Phi"), InvalidParameter);
}
