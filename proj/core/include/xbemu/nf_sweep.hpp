#pragma once

// Non-ideality factor statistics over grids of crossbar configurations.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "xbemu/circuit.hpp"

namespace xbemu {

enum class SolverKind : std::uint8_t { linear = 0, nonlinear = 1 };

const char* to_string(SolverKind kind);
SolverKind parse_solver_kind(const std::string& text);

// Random operating points: each voltage is U(0, v_supply) with probability
// v_density (else 0); each conductance is U(G_off, G_on) with probability
// g_density (else G_off).
struct NfSampling {
    double v_density = 1.0;
    double g_density = 1.0;
};

struct NfSweepRow {
    CrossbarConfig config;
    std::size_t samples = 0;
    std::size_t failures = 0;
    std::size_t entries = 0;  // defined NF values pooled over all samples
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
};

// Every configuration sees the same random stream (seeded by `seed`), so
// configurations of equal size are compared on matched samples.
std::vector<NfSweepRow> sweep_nf(const std::vector<CrossbarConfig>& grid, std::size_t samples, SolverKind solver,
                                 std::uint64_t seed, NfSampling sampling = {}, unsigned threads = 0);

// Linear-interpolated quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> values, double q);

void write_nf_csv(std::ostream& out, const std::vector<NfSweepRow>& rows);

}  // namespace xbemu
