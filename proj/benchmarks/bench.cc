// Copyright 2026 The qcp-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "qcp/cd.h"
#include "qcp/cp.h"
#include "qcp/f2.h"
#include "qcp/measure.h"
#include "qcp/qsim.h"

using namespace qcp;

static void f2_dual(benchmark::State &state) {
    auto n = static_cast<unsigned>(state.range(0));
    Rng rng(1);
    F2Subspace a = rand_subspace(n, n / 2, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dual(a));
    }
}
BENCHMARK(f2_dual)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

static void qsim_hadamard_all(benchmark::State &state) {
    auto n = static_cast<unsigned>(state.range(0));
    Rng rng(1);
    QuantumState s = prepare_subspace_state(rand_subspace(n, n / 2, rng));
    for (auto _ : state) {
        benchmark::DoNotOptimize(hadamard_all(s, "A"));
    }
}
BENCHMARK(qsim_hadamard_all)->Arg(8)->Arg(12)->Arg(16);

static void qsim_gentle_measure_diagonal(benchmark::State &state) {
    auto n = static_cast<unsigned>(state.range(0));
    Rng rng(1);
    F2Subspace a = rand_subspace(n, n / 2, rng);
    QuantumState s = prepare_subspace_state(a);
    Mat proj = Mat::Zero(Eigen::Index{1} << n, Eigen::Index{1} << n);
    for (uint64_t v = 0; v < (uint64_t{1} << n); v++) {
        proj(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v)) = a.contains(v) ? 1.0 : 0.0;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(gentle_measure(s, proj, rng));
    }
}
BENCHMARK(qsim_gentle_measure_diagonal)->Arg(6)->Arg(8);

static void measure_apply_proj_impl(benchmark::State &state) {
    auto dim = static_cast<Eigen::Index>(state.range(0));
    Rng rng(1);
    Mat x = Mat::Random(dim, dim);
    Mat p = x.adjoint() * x;
    p /= p.norm() * 1.01;
    ProjectiveImplementation pi = proj_impl(BinaryPovm(p));
    unsigned q = 0;
    while ((Eigen::Index{1} << q) < dim) {
        q++;
    }
    QuantumState s = QuantumState::mixed(RegisterLayout({{"r", q}}), Mat::Identity(dim, dim) / static_cast<double>(dim));
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_proj_impl(pi, s, rng));
    }
}
BENCHMARK(measure_apply_proj_impl)->Arg(4)->Arg(16);

static void cp_compute(benchmark::State &state) {
    auto lambda = static_cast<unsigned>(state.range(0));
    Rng rng(1);
    CpSecretKey sk = cp_setup(lambda, rng);
    ClassicalFunction f = ClassicalFunction::random(4, 2, rng);
    for (auto _ : state) {
        state.PauseTiming();
        CpProgram prog = cp_generate(sk, f, rng);
        state.ResumeTiming();
        benchmark::DoNotOptimize(prog.compute(1, rng));
    }
}
BENCHMARK(cp_compute)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

static void cd_check_honest(benchmark::State &state) {
    auto lambda = static_cast<unsigned>(state.range(0));
    Rng rng(1);
    ToyWatermark wm(64, 8);
    CdKeys keys = cd_setup(wm, rng);
    nlohmann::json aux;
    ClassicalFunction f = wm.sample(rng, aux);
    SubspaceMoney bank(lambda, wm.message_space());
    CdProgram prog = cd_generate(wm, keys.sk, bank, f, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cd_check(wm, keys.pk, bank, aux, prog, rng));
    }
}
BENCHMARK(cd_check_honest)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
