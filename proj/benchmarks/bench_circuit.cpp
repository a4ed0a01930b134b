#include <benchmark/benchmark.h>

#include <random>

#include "xbemu/circuit.hpp"
#include "xbemu/surrogate.hpp"

using namespace xbemu;

namespace {

struct Operand {
    CrossbarConfig cfg;
    Eigen::MatrixXd g;
    Eigen::VectorXd v;
};

Operand make_operand(int n) {
    Operand op;
    op.cfg.n_rows = op.cfg.n_cols = n;
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> ug(op.cfg.g_off(), op.cfg.g_on()), uv(0.0, op.cfg.v_supply);
    op.g.resize(n, n);
    for (auto& x : op.g.reshaped()) x = ug(rng);
    op.v.resize(n);
    for (auto& x : op.v) x = uv(rng);
    return op;
}

}  // namespace

static void BM_SolveLinear(benchmark::State& state) {
    const auto op = make_operand(static_cast<int>(state.range(0)));
    CrossbarSolver solver(op.cfg);
    for (auto _ : state) benchmark::DoNotOptimize(solver.solve_linear(op.g, op.v).i_out.data());
}
BENCHMARK(BM_SolveLinear)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SolveNonlinear(benchmark::State& state) {
    const auto op = make_operand(static_cast<int>(state.range(0)));
    const auto programmed = CrossbarState::program(op.cfg, op.g);
    CrossbarSolver solver(op.cfg);
    int iterations = 0;
    for (auto _ : state) {
        const auto r = solver.solve_nonlinear(programmed, op.v);
        iterations = r.iterations;
        benchmark::DoNotOptimize(r.i_out.data());
    }
    state.counters["newton_iters"] = iterations;
}
BENCHMARK(BM_SolveNonlinear)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_LinearTransfer(benchmark::State& state) {
    const auto op = make_operand(static_cast<int>(state.range(0)));
    CrossbarSolver solver(op.cfg);
    for (auto _ : state) benchmark::DoNotOptimize(solver.linear_transfer(op.g).data());
}
BENCHMARK(BM_LinearTransfer)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SurrogateEvaluate(benchmark::State& state) {
    const auto op = make_operand(64);
    auto model = SurrogateModel::initialize(64, 500, 1);
    model.scalers = {0.0, op.cfg.v_supply, op.cfg.g_off(), op.cfg.g_on(), 0.9, 1.5};
    model.fingerprint = op.cfg.fingerprint();
    const SurrogateCrossbar xbar(model, op.cfg, op.g);
    const Eigen::MatrixXd v = op.v.replicate(1, state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(xbar.evaluate(v).data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SurrogateEvaluate)->Arg(1)->Arg(64);
