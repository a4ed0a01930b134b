#include "xbemu/nf_sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

#include "xbemu/parallel.hpp"

namespace xbemu {

const char* to_string(SolverKind kind) { return kind == SolverKind::linear ? "linear" : "nonlinear"; }

SolverKind parse_solver_kind(const std::string& text) {
    if (text == "linear") return SolverKind::linear;
    if (text == "nonlinear") return SolverKind::nonlinear;
    throw std::invalid_argument("unknown solver '" + text + "' (expected linear|nonlinear)");
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<NfSweepRow> sweep_nf(const std::vector<CrossbarConfig>& grid, std::size_t samples, SolverKind solver,
                                 std::uint64_t seed, NfSampling sampling, unsigned threads) {
    if (threads == 0) threads = default_thread_count();
    std::vector<NfSweepRow> rows;
    rows.reserve(grid.size());
    for (const auto& cfg : grid) {
        cfg.validate();
        const int n_rows = cfg.n_rows;
        const int n_cols = cfg.n_cols;

        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<Eigen::VectorXd> vs(samples);
        std::vector<Eigen::MatrixXd> gs(samples);
        for (std::size_t s = 0; s < samples; ++s) {
            vs[s].resize(n_rows);
            for (int i = 0; i < n_rows; ++i) {
                const bool on = unit(rng) < sampling.v_density;
                const double u = unit(rng);
                vs[s](i) = on ? u * cfg.v_supply : 0.0;
            }
            gs[s].resize(n_rows, n_cols);
            for (Eigen::Index k = 0; k < gs[s].size(); ++k) {
                const bool on = unit(rng) < sampling.g_density;
                const double u = unit(rng);
                gs[s].data()[k] = on ? std::min(cfg.g_on(), cfg.g_off() + u * (cfg.g_on() - cfg.g_off())) : cfg.g_off();
            }
        }

        std::vector<CrossbarSolver> solvers;
        for (unsigned w = 0; w < threads; ++w) solvers.emplace_back(cfg);
        std::vector<NfResult> nf(samples);
        std::vector<char> failed(samples, 0);
        parallel_for(samples, threads, [&](unsigned w, std::size_t s) {
            try {
                const Eigen::VectorXd ideal = ideal_mvm(vs[s], gs[s]);
                const SolveResult r = solver == SolverKind::linear
                                          ? solvers[w].solve_linear(gs[s], vs[s])
                                          : solvers[w].solve_nonlinear(CrossbarState::program(cfg, gs[s]), vs[s]);
                nf[s] = nonideality_factor(ideal, r.i_out);
            } catch (const SolverError&) {
                failed[s] = 1;
            }
        });

        NfSweepRow row;
        row.config = cfg;
        row.samples = samples;
        std::vector<double> pooled;
        for (std::size_t s = 0; s < samples; ++s) {
            if (failed[s]) {
                ++row.failures;
                continue;
            }
            for (Eigen::Index j = 0; j < nf[s].value.size(); ++j)
                if (nf[s].defined[j]) pooled.push_back(nf[s].value(j));
        }
        row.entries = pooled.size();
        if (!pooled.empty()) {
            row.min = *std::min_element(pooled.begin(), pooled.end());
            row.max = *std::max_element(pooled.begin(), pooled.end());
            row.q1 = quantile(pooled, 0.25);
            row.median = quantile(pooled, 0.5);
            row.q3 = quantile(pooled, 0.75);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_nf_csv(std::ostream& out, const std::vector<NfSweepRow>& rows) {
    out << "n_rows,n_cols,r_on,on_off_ratio,r_source,r_sink,r_wire,r_access,v_supply,"
           "nf_min,nf_q1,nf_median,nf_q3,nf_max,samples,entries,failures\n";
    char buf[512];
    for (const auto& r : rows) {
        const auto& c = r.config;
        std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.9f,%.9f,%.9f,%.9f,%.9f,%zu,%zu,%zu\n",
                      c.n_rows, c.n_cols, c.r_on, c.on_off_ratio(), c.r_source, c.r_sink, c.r_wire, c.r_access,
                      c.v_supply, r.min, r.q1, r.median, r.q3, r.max, r.samples, r.entries, r.failures);
        out << buf;
    }
}

}  // namespace xbemu
