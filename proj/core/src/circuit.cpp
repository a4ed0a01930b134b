#include "xbemu/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <openssl/evp.h>

namespace xbemu {

// ---------------------------------------------------------------------------
// Device and configuration

void DeviceModel::validate() const {
    if (!(i0 > 0.0) || !(d0 > 0.0) || !(v0 > 0.0))
        throw std::invalid_argument("DeviceModel: I0, d0 and V0 must be strictly positive");
}

double DeviceModel::current(double gap, double v) const {
    return i0 * std::exp(gap / d0) * std::sinh(v / v0);
}

double DeviceModel::differential_conductance(double gap, double v) const {
    return (i0 / v0) * std::exp(gap / d0) * std::cosh(v / v0);
}

double DeviceModel::small_signal_conductance(double gap) const {
    return (i0 / v0) * std::exp(gap / d0);
}

std::string to_hex(const Fingerprint& fp) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (auto b : fp) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

void CrossbarConfig::validate() const {
    if (n_rows < 1 || n_cols < 1) throw std::invalid_argument("CrossbarConfig: crossbar must be at least 1x1");
    for (double r : {r_source, r_sink, r_wire, r_access})
        if (!(r >= 0.0) || !std::isfinite(r))
            throw std::invalid_argument("CrossbarConfig: parasitic resistances must be finite and >= 0");
    if (!(r_on > 0.0) || !(r_off > r_on) || !std::isfinite(r_off))
        throw std::invalid_argument("CrossbarConfig: require 0 < r_on < r_off");
    if (!(v_supply > 0.0)) throw std::invalid_argument("CrossbarConfig: v_supply must be positive");
    if (!(v_read > 0.0)) throw std::invalid_argument("CrossbarConfig: v_read must be positive");
    device.validate();
}

std::string CrossbarConfig::canonical_text() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "n_rows=%d\nn_cols=%d\nr_source=%.17g\nr_sink=%.17g\nr_wire=%.17g\nr_access=%.17g\n"
                  "r_on=%.17g\nr_off=%.17g\nv_supply=%.17g\nv_read=%.17g\ni0=%.17g\nd0=%.17g\nv0=%.17g\n",
                  n_rows, n_cols, r_source, r_sink, r_wire, r_access, r_on, r_off, v_supply, v_read,
                  device.i0, device.d0, device.v0);
    return buf;
}

Fingerprint sha256(const void* data, std::size_t size) {
    Fingerprint fp{};
    unsigned int len = 0;
    if (EVP_Digest(data, size, fp.data(), &len, EVP_sha256(), nullptr) != 1 || len != fp.size())
        throw std::runtime_error("SHA-256 digest failed");
    return fp;
}

Fingerprint sha256(const std::string& text) { return sha256(text.data(), text.size()); }

Fingerprint CrossbarConfig::fingerprint() const { return sha256(canonical_text()); }

double calibrate_gap(double g_target, const DeviceModel& device, double v_cal) {
    if (!(g_target > 0.0) || !(v_cal > 0.0))
        throw std::invalid_argument("calibrate_gap: conductance and calibration voltage must be positive");
    return device.d0 * std::log(g_target * v_cal / (device.i0 * std::sinh(v_cal / device.v0)));
}

CrossbarState CrossbarState::program(const CrossbarConfig& cfg, const Eigen::MatrixXd& targets) {
    if (targets.rows() != cfg.n_rows || targets.cols() != cfg.n_cols)
        throw std::invalid_argument("CrossbarState: target matrix shape does not match the crossbar");
    const double lo = cfg.g_off();
    const double hi = cfg.g_on();
    CrossbarState state;
    state.conductance = targets;
    state.gaps.resize(targets.rows(), targets.cols());
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
        for (Eigen::Index j = 0; j < targets.cols(); ++j) {
            const double g = targets(i, j);
            if (!(g >= lo && g <= hi))
                throw std::invalid_argument("CrossbarState: target conductance outside [G_off, G_on]");
            state.gaps(i, j) = calibrate_gap(g, cfg.device, cfg.v_read);
        }
    }
    return state;
}

Eigen::MatrixXd CrossbarState::small_signal_conductance(const DeviceModel& device) const {
    return gaps.unaryExpr([&](double d) { return device.small_signal_conductance(d); });
}

Eigen::VectorXd ideal_mvm(const Eigen::VectorXd& v, const Eigen::MatrixXd& g) {
    if (v.size() != g.rows()) throw std::invalid_argument("ideal_mvm: voltage length must equal row count");
    return g.transpose() * v;
}

std::size_t NfResult::defined_count() const {
    return static_cast<std::size_t>(std::count(defined.begin(), defined.end(), true));
}

NfResult nonideality_factor(const Eigen::VectorXd& i_ideal, const Eigen::VectorXd& i_nonideal, double epsilon) {
    if (i_ideal.size() != i_nonideal.size())
        throw std::invalid_argument("nonideality_factor: current vectors differ in length");
    NfResult out;
    out.value.resize(i_ideal.size());
    out.defined.assign(i_ideal.size(), false);
    for (Eigen::Index j = 0; j < i_ideal.size(); ++j) {
        if (std::abs(i_ideal(j)) < epsilon) {
            out.value(j) = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        out.value(j) = (i_ideal(j) - i_nonideal(j)) / i_ideal(j);
        out.defined[j] = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Network assembly

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

// Endpoint of a branch: a free unknown (>= 0) or a fixed terminal (-1 - k).
struct Terminal {
    int id;
    bool is_free() const { return id >= 0; }
    int fixed_index() const { return -1 - id; }
};

enum class BranchKind { resistor, cell };

struct Branch {
    Terminal a;  // word-line side for cells
    Terminal b;
    BranchKind kind;
    double conductance;  // resistors only
    int cell;            // i * n_cols + j, cells only
    // value slots in the sparse matrix; -1 when not present
    int slot_aa = -1, slot_bb = -1, slot_ab = -1, slot_ba = -1;
};

struct SenseTap {
    int branch;
    int column;
    bool into_b;  // current flows a -> b into the sense terminal
};

}  // namespace

struct CrossbarSolver::Impl {
    int n_rows = 0;
    int n_cols = 0;
    int n_free = 0;
    std::vector<Branch> branches;
    std::vector<SenseTap> taps;
    Eigen::SparseMatrix<double> matrix;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    DeviceModel device;
    SolverOptions options;

    // fixed terminals: [0, n_rows) sources, [n_rows, n_rows + n_cols) sense grounds
    std::vector<double> fixed_potential;

    void build(const CrossbarConfig& cfg);
    void stamp(const std::vector<double>& cell_conductance);
    void stamp_jacobian(const Eigen::VectorXd& x, const Eigen::MatrixXd& gaps);
    void set_sources(const Eigen::VectorXd& v);

    double potential(const Eigen::VectorXd& x, Terminal t) const {
        return t.is_free() ? x(t.id) : fixed_potential[t.fixed_index()];
    }
    Eigen::VectorXd linear_rhs(const std::vector<double>& cell_conductance) const;
    double branch_current(const Branch& br, const Eigen::VectorXd& x, const std::vector<double>* cell_g,
                          const Eigen::MatrixXd* gaps) const;
    double kcl(const Eigen::VectorXd& x, const std::vector<double>* cell_g, const Eigen::MatrixXd* gaps,
               Eigen::VectorXd& f) const;
    Eigen::VectorXd sense(const Eigen::VectorXd& x, const std::vector<double>* cell_g,
                          const Eigen::MatrixXd* gaps) const;
    void factorize();
};

void CrossbarSolver::Impl::build(const CrossbarConfig& cfg) {
    n_rows = cfg.n_rows;
    n_cols = cfg.n_cols;
    device = cfg.device;
    const int cells = n_rows * n_cols;
    const bool access = cfg.r_access > 0.0;
    const int wl0 = 0;
    const int bl0 = cells;
    const int mid0 = 2 * cells;
    const int src0 = access ? 3 * cells : 2 * cells;
    const int gnd0 = src0 + n_rows;
    const int total = gnd0 + n_cols;
    auto wl = [&](int i, int j) { return wl0 + i * n_cols + j; };
    auto bl = [&](int i, int j) { return bl0 + i * n_cols + j; };
    auto mid = [&](int i, int j) { return mid0 + i * n_cols + j; };

    struct RawBranch {
        int a, b;
        BranchKind kind;
        double resistance;
        int cell;
    };
    std::vector<RawBranch> raw;
    raw.reserve(static_cast<std::size_t>(cells) * 4);
    for (int i = 0; i < n_rows; ++i) {
        raw.push_back({src0 + i, wl(i, 0), BranchKind::resistor, cfg.r_source + cfg.r_wire, -1});
        for (int j = 0; j + 1 < n_cols; ++j)
            raw.push_back({wl(i, j), wl(i, j + 1), BranchKind::resistor, cfg.r_wire, -1});
    }
    for (int j = 0; j < n_cols; ++j) {
        for (int i = 0; i + 1 < n_rows; ++i)
            raw.push_back({bl(i, j), bl(i + 1, j), BranchKind::resistor, cfg.r_wire, -1});
        raw.push_back({bl(n_rows - 1, j), gnd0 + j, BranchKind::resistor, cfg.r_wire + cfg.r_sink, -1});
    }
    for (int i = 0; i < n_rows; ++i) {
        for (int j = 0; j < n_cols; ++j) {
            const int cell = i * n_cols + j;
            if (access) {
                raw.push_back({wl(i, j), mid(i, j), BranchKind::cell, 0.0, cell});
                raw.push_back({mid(i, j), bl(i, j), BranchKind::resistor, cfg.r_access, -1});
            } else {
                raw.push_back({wl(i, j), bl(i, j), BranchKind::cell, 0.0, cell});
            }
        }
    }

    UnionFind uf(total);
    for (const auto& r : raw)
        if (r.kind == BranchKind::resistor && r.resistance == 0.0) uf.unite(r.a, r.b);

    // Terminal numbering: a class containing a source or sense node is fixed.
    std::vector<int> class_terminal(total, 0);
    std::vector<bool> assigned(total, false);
    for (int i = 0; i < n_rows; ++i) {
        const int root = uf.find(src0 + i);
        class_terminal[root] = -1 - i;
        assigned[root] = true;
    }
    for (int j = 0; j < n_cols; ++j) {
        const int root = uf.find(gnd0 + j);
        if (assigned[root]) throw std::logic_error("CrossbarSolver: source shorted to a sense terminal");
        class_terminal[root] = -1 - (n_rows + j);
        assigned[root] = true;
    }
    n_free = 0;
    for (int node = 0; node < total; ++node) {
        const int root = uf.find(node);
        if (!assigned[root]) {
            class_terminal[root] = n_free++;
            assigned[root] = true;
        }
    }
    fixed_potential.assign(n_rows + n_cols, 0.0);

    branches.clear();
    for (const auto& r : raw) {
        if (r.kind == BranchKind::resistor && r.resistance == 0.0) continue;
        Terminal a{class_terminal[uf.find(r.a)]};
        Terminal b{class_terminal[uf.find(r.b)]};
        if (a.id == b.id) continue;
        Branch br{a, b, r.kind, r.kind == BranchKind::resistor ? 1.0 / r.resistance : 0.0, r.cell};
        branches.push_back(br);
    }

    taps.clear();
    for (int k = 0; k < static_cast<int>(branches.size()); ++k) {
        const auto& br = branches[k];
        for (bool b_side : {true, false}) {
            const Terminal t = b_side ? br.b : br.a;
            if (!t.is_free() && t.fixed_index() >= n_rows) taps.push_back({k, t.fixed_index() - n_rows, b_side});
        }
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(branches.size() * 4);
    for (const auto& br : branches) {
        if (br.a.is_free()) trip.emplace_back(br.a.id, br.a.id, 1.0);
        if (br.b.is_free()) trip.emplace_back(br.b.id, br.b.id, 1.0);
        if (br.a.is_free() && br.b.is_free()) {
            trip.emplace_back(br.a.id, br.b.id, 1.0);
            trip.emplace_back(br.b.id, br.a.id, 1.0);
        }
    }
    matrix.resize(n_free, n_free);
    matrix.setFromTriplets(trip.begin(), trip.end());
    matrix.makeCompressed();
    auto slot = [&](int r, int c) { return static_cast<int>(&matrix.coeffRef(r, c) - matrix.valuePtr()); };
    for (auto& br : branches) {
        if (br.a.is_free()) br.slot_aa = slot(br.a.id, br.a.id);
        if (br.b.is_free()) br.slot_bb = slot(br.b.id, br.b.id);
        if (br.a.is_free() && br.b.is_free()) {
            br.slot_ab = slot(br.a.id, br.b.id);
            br.slot_ba = slot(br.b.id, br.a.id);
        }
    }
    if (n_free > 0) ldlt.analyzePattern(matrix);
}

namespace {

inline void add_stamp(double* values, const Branch& br, double g) {
    if (br.slot_aa >= 0) values[br.slot_aa] += g;
    if (br.slot_bb >= 0) values[br.slot_bb] += g;
    if (br.slot_ab >= 0) {
        values[br.slot_ab] -= g;
        values[br.slot_ba] -= g;
    }
}

}  // namespace

void CrossbarSolver::Impl::stamp(const std::vector<double>& cell_conductance) {
    double* values = matrix.valuePtr();
    std::fill(values, values + matrix.nonZeros(), 0.0);
    for (const auto& br : branches)
        add_stamp(values, br, br.kind == BranchKind::resistor ? br.conductance : cell_conductance[br.cell]);
}

void CrossbarSolver::Impl::stamp_jacobian(const Eigen::VectorXd& x, const Eigen::MatrixXd& gaps) {
    double* values = matrix.valuePtr();
    std::fill(values, values + matrix.nonZeros(), 0.0);
    for (const auto& br : branches) {
        double g = br.conductance;
        if (br.kind == BranchKind::cell) {
            const double gap = gaps(br.cell / n_cols, br.cell % n_cols);
            g = device.differential_conductance(gap, potential(x, br.a) - potential(x, br.b));
        }
        add_stamp(values, br, g);
    }
}

void CrossbarSolver::Impl::set_sources(const Eigen::VectorXd& v) {
    if (v.size() != n_rows) throw std::invalid_argument("CrossbarSolver: voltage vector length must equal n_rows");
    for (int i = 0; i < n_rows; ++i) fixed_potential[i] = v(i);
}

Eigen::VectorXd CrossbarSolver::Impl::linear_rhs(const std::vector<double>& cell_conductance) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_free);
    for (const auto& br : branches) {
        if (br.a.is_free() == br.b.is_free()) continue;
        const double g = br.kind == BranchKind::resistor ? br.conductance : cell_conductance[br.cell];
        const Terminal free = br.a.is_free() ? br.a : br.b;
        const Terminal fixed = br.a.is_free() ? br.b : br.a;
        rhs(free.id) += g * fixed_potential[fixed.fixed_index()];
    }
    return rhs;
}

double CrossbarSolver::Impl::branch_current(const Branch& br, const Eigen::VectorXd& x,
                                            const std::vector<double>* cell_g, const Eigen::MatrixXd* gaps) const {
    const double dv = potential(x, br.a) - potential(x, br.b);
    if (br.kind == BranchKind::resistor) return br.conductance * dv;
    if (gaps) return device.current((*gaps)(br.cell / n_cols, br.cell % n_cols), dv);
    return (*cell_g)[br.cell] * dv;
}

// Fills f with the net current leaving each free node and returns the
// relative residual ||f|| / ||sum of |branch currents| per node||.
double CrossbarSolver::Impl::kcl(const Eigen::VectorXd& x, const std::vector<double>* cell_g,
                                 const Eigen::MatrixXd* gaps, Eigen::VectorXd& f) const {
    f.setZero(n_free);
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(n_free);
    for (const auto& br : branches) {
        const double i = branch_current(br, x, cell_g, gaps);
        if (br.a.is_free()) {
            f(br.a.id) += i;
            scale(br.a.id) += std::abs(i);
        }
        if (br.b.is_free()) {
            f(br.b.id) -= i;
            scale(br.b.id) += std::abs(i);
        }
    }
    const double denom = scale.norm();
    if (denom == 0.0) return 0.0;
    return f.norm() / denom;
}

Eigen::VectorXd CrossbarSolver::Impl::sense(const Eigen::VectorXd& x, const std::vector<double>* cell_g,
                                           const Eigen::MatrixXd* gaps) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_cols);
    for (const auto& tap : taps) {
        const double i = branch_current(branches[tap.branch], x, cell_g, gaps);
        out(tap.column) += tap.into_b ? i : -i;
    }
    return out;
}

void CrossbarSolver::Impl::factorize() {
    ldlt.factorize(matrix);
    if (ldlt.info() != Eigen::Success)
        throw SolverError("CrossbarSolver: nodal matrix factorization failed", std::numeric_limits<double>::infinity(), 0);
}

// ---------------------------------------------------------------------------

CrossbarSolver::CrossbarSolver(CrossbarConfig cfg, SolverOptions options)
    : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
    cfg_.validate();
    impl_->options = options;
    impl_->build(cfg_);
}

CrossbarSolver::~CrossbarSolver() = default;
CrossbarSolver::CrossbarSolver(CrossbarSolver&&) noexcept = default;
CrossbarSolver& CrossbarSolver::operator=(CrossbarSolver&&) noexcept = default;

std::size_t CrossbarSolver::free_node_count() const { return static_cast<std::size_t>(impl_->n_free); }

namespace {

std::vector<double> flatten_cells(const Eigen::MatrixXd& g, int rows, int cols) {
    if (g.rows() != rows || g.cols() != cols)
        throw std::invalid_argument("CrossbarSolver: conductance matrix shape does not match the crossbar");
    std::vector<double> out(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out[static_cast<std::size_t>(i) * cols + j] = g(i, j);
    return out;
}

}  // namespace

SolveResult CrossbarSolver::solve_linear(const Eigen::MatrixXd& g, const Eigen::VectorXd& v) {
    auto& im = *impl_;
    const auto cell_g = flatten_cells(g, im.n_rows, im.n_cols);
    im.set_sources(v);

    SolveResult result;
    result.iterations = 1;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(im.n_free);
    if (im.n_free > 0) {
        im.stamp(cell_g);
        im.factorize();
        const Eigen::VectorXd rhs = im.linear_rhs(cell_g);
        if (rhs.squaredNorm() > 0.0) x = im.ldlt.solve(rhs);
    }
    Eigen::VectorXd f;
    result.residual = im.kcl(x, &cell_g, nullptr, f);
    if (!(result.residual <= im.options.linear_tolerance))
        throw SolverError("solve_linear: residual " + std::to_string(result.residual) + " above tolerance",
                          result.residual, 1);
    result.i_out = im.sense(x, &cell_g, nullptr);
    result.node_voltages = std::move(x);
    return result;
}

SolveResult CrossbarSolver::solve_nonlinear(const CrossbarState& state, const Eigen::VectorXd& v) {
    auto& im = *impl_;
    const auto& opt = im.options;
    if (state.gaps.rows() != im.n_rows || state.gaps.cols() != im.n_cols)
        throw std::invalid_argument("solve_nonlinear: state shape does not match the crossbar");
    for (Eigen::Index k = 0; k < state.gaps.size(); ++k)
        if (!std::isfinite(state.gaps.data()[k])) throw std::invalid_argument("solve_nonlinear: gaps must be finite");

    const auto small_signal = flatten_cells(state.small_signal_conductance(im.device), im.n_rows, im.n_cols);
    im.set_sources(v);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(im.n_free);
    if (im.n_free > 0) {
        im.stamp(small_signal);
        im.factorize();
        const Eigen::VectorXd rhs = im.linear_rhs(small_signal);
        if (rhs.squaredNorm() > 0.0) x = im.ldlt.solve(rhs);
    }

    Eigen::VectorXd f;
    Eigen::VectorXd f_trial;
    double rel = im.kcl(x, nullptr, &state.gaps, f);
    int iter = 0;
    while (rel > opt.newton_tolerance) {
        if (iter >= opt.max_newton_iterations)
            throw SolverError("solve_nonlinear: Newton iteration limit reached, residual " + std::to_string(rel), rel,
                              iter);
        ++iter;
        im.stamp_jacobian(x, state.gaps);
        im.factorize();
        const Eigen::VectorXd step = im.ldlt.solve(-f);
        const double f_norm = f.norm();
        double t = 1.0;
        Eigen::VectorXd trial;
        double trial_rel = rel;
        for (int h = 0; h <= opt.max_step_halvings; ++h) {
            trial = x + t * step;
            trial_rel = im.kcl(trial, nullptr, &state.gaps, f_trial);
            if (f_trial.norm() < f_norm) break;
            t *= 0.5;
        }
        x = std::move(trial);
        f.swap(f_trial);
        rel = trial_rel;
    }

    SolveResult result;
    result.iterations = iter;
    result.residual = rel;
    result.i_out = im.sense(x, nullptr, &state.gaps);
    result.node_voltages = std::move(x);
    return result;
}

Eigen::MatrixXd CrossbarSolver::linear_transfer(const Eigen::MatrixXd& g) {
    auto& im = *impl_;
    const auto cell_g = flatten_cells(g, im.n_rows, im.n_cols);
    Eigen::MatrixXd transfer = Eigen::MatrixXd::Zero(im.n_cols, im.n_rows);

    Eigen::MatrixXd x;
    if (im.n_free > 0) {
        im.stamp(cell_g);
        im.factorize();
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(im.n_free, im.n_rows);
        for (const auto& br : im.branches) {
            if (br.a.is_free() == br.b.is_free()) continue;
            const Terminal free = br.a.is_free() ? br.a : br.b;
            const Terminal fixed = br.a.is_free() ? br.b : br.a;
            if (fixed.fixed_index() >= im.n_rows) continue;
            const double gb = br.kind == BranchKind::resistor ? br.conductance : cell_g[br.cell];
            rhs(free.id, fixed.fixed_index()) += gb;
        }
        x = im.ldlt.solve(rhs);
    }
    // Sense currents are linear in (x, sources); evaluate them per unit input.
    for (const auto& tap : im.taps) {
        const auto& br = im.branches[tap.branch];
        const double gb = br.kind == BranchKind::resistor ? br.conductance : cell_g[br.cell];
        const double sign = tap.into_b ? 1.0 : -1.0;
        // i = gb * (V_a - V_b)
        for (const auto& [t, s] : {std::pair{br.a, 1.0}, std::pair{br.b, -1.0}}) {
            if (t.is_free()) {
                transfer.row(tap.column) += (sign * s * gb) * x.row(t.id);
            } else if (t.fixed_index() < im.n_rows) {
                transfer(tap.column, t.fixed_index()) += sign * s * gb;
            }
        }
    }
    return transfer;
}

SolveResult solve_linear(const CrossbarConfig& cfg, const Eigen::MatrixXd& g, const Eigen::VectorXd& v) {
    CrossbarSolver solver(cfg);
    return solver.solve_linear(g, v);
}

SolveResult solve_nonlinear(const CrossbarConfig& cfg, const CrossbarState& state, const Eigen::VectorXd& v) {
    CrossbarSolver solver(cfg);
    return solver.solve_nonlinear(state, v);
}

}  // namespace xbemu
