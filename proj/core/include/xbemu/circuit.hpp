#pragma once

// Crossbar circuit oracle.
//
// Network per cell (i, j): a word-line node WL(i,j), a bit-line node BL(i,j)
// and, when r_access > 0, an internal node between the device and the access
// resistor. Row i is driven from source terminal S(i) through r_source plus
// one wire segment; successive WL nodes are joined by r_wire. Each bit line
// runs down through r_wire segments and the last segment plus r_sink into a
// grounded sense terminal. Zero-valued resistors are shorts.

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xbemu {

struct DeviceModel {
    double i0 = 1e-4;   // A
    double d0 = 0.25;   // nm
    double v0 = 0.25;   // V

    void validate() const;
    // I(d, V) = I0 exp(d / d0) sinh(V / V0)
    double current(double gap, double v) const;
    double differential_conductance(double gap, double v) const;
    double small_signal_conductance(double gap) const;
};

using Fingerprint = std::array<std::uint8_t, 32>;

std::string to_hex(const Fingerprint& fp);
Fingerprint sha256(const void* data, std::size_t size);
Fingerprint sha256(const std::string& text);

struct CrossbarConfig {
    int n_rows = 64;
    int n_cols = 64;
    double r_source = 500.0;
    double r_sink = 100.0;
    double r_wire = 2.5;     // per cell segment
    double r_access = 0.0;   // series with each device; 0 disables
    double r_on = 100e3;
    double r_off = 600e3;
    double v_supply = 0.25;
    double v_read = 0.01;    // calibration voltage for device gaps
    DeviceModel device{};

    void validate() const;
    double on_off_ratio() const { return r_off / r_on; }
    void set_on_off_ratio(double ratio) { r_off = r_on * ratio; }
    double g_on() const { return 1.0 / r_on; }
    double g_off() const { return 1.0 / r_off; }

    // SHA-256 over a canonical text rendering of every field.
    Fingerprint fingerprint() const;
    std::string canonical_text() const;
};

struct CrossbarState {
    Eigen::MatrixXd conductance;  // programmed targets, S
    Eigen::MatrixXd gaps;         // nm, such that I(d, v_read) / v_read = target

    // Throws std::invalid_argument when a target leaves [G_off, G_on].
    static CrossbarState program(const CrossbarConfig& cfg, const Eigen::MatrixXd& targets);
    Eigen::MatrixXd small_signal_conductance(const DeviceModel& device) const;
};

struct SolveResult {
    Eigen::VectorXd i_out;          // column currents, A
    Eigen::VectorXd node_voltages;  // free-node solution, solver ordering
    int iterations = 0;
    double residual = 0.0;          // relative KCL residual
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    int iterations() const { return iterations_; }

private:
    double residual_;
    int iterations_;
};

struct SolverOptions {
    double linear_tolerance = 1e-10;
    double newton_tolerance = 1e-9;
    int max_newton_iterations = 100;
    int max_step_halvings = 20;
};

Eigen::VectorXd ideal_mvm(const Eigen::VectorXd& v, const Eigen::MatrixXd& g);

double calibrate_gap(double g_target, const DeviceModel& device, double v_cal);

// Reusable solver bound to one configuration. The sparsity pattern and its
// symbolic factorization are computed once and shared by every solve, so a
// single instance is not safe for concurrent use; make one per thread.
class CrossbarSolver {
public:
    explicit CrossbarSolver(CrossbarConfig cfg, SolverOptions options = {});
    ~CrossbarSolver();
    CrossbarSolver(CrossbarSolver&&) noexcept;
    CrossbarSolver& operator=(CrossbarSolver&&) noexcept;

    const CrossbarConfig& config() const { return cfg_; }
    std::size_t free_node_count() const;

    SolveResult solve_linear(const Eigen::MatrixXd& g, const Eigen::VectorXd& v);
    SolveResult solve_nonlinear(const CrossbarState& state, const Eigen::VectorXd& v);

    // Column-current response to unit row voltages: i_out = T * v for every v.
    // Built from one factorization and n_rows back-substitutions.
    Eigen::MatrixXd linear_transfer(const Eigen::MatrixXd& g);

private:
    struct Impl;
    CrossbarConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

SolveResult solve_linear(const CrossbarConfig& cfg, const Eigen::MatrixXd& g, const Eigen::VectorXd& v);
SolveResult solve_nonlinear(const CrossbarConfig& cfg, const CrossbarState& state, const Eigen::VectorXd& v);

struct NfResult {
    Eigen::VectorXd value;      // NaN where undefined
    std::vector<bool> defined;
    std::size_t defined_count() const;
};

inline constexpr double kCurrentEpsilon = 1e-12;  // A

NfResult nonideality_factor(const Eigen::VectorXd& i_ideal, const Eigen::VectorXd& i_nonideal,
                            double epsilon = kCurrentEpsilon);

}  // namespace xbemu
