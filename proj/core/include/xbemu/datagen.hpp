#pragma once

// Training corpora for the crossbar surrogate: sparse (V, G) operating points
// labeled with the distortion ratio f_R = I_ideal / I_non-ideal.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xbemu/circuit.hpp"
#include "xbemu/nf_sweep.hpp"

namespace xbemu {

struct SamplingSpec {
    int n = 64;
    std::vector<double> v_sparsity{0.0, 0.25, 0.5, 0.75, 0.9};
    std::vector<double> g_sparsity{0.0, 0.25, 0.5, 0.75, 0.9};
    int v_grid_bits = 4;  // stream width: V in {k / (2^b - 1) * v_supply}
    int g_grid_bits = 4;  // slice width: G in {G_off + k / (2^b - 1) * (G_on - G_off)}
    std::size_t samples_per_level = 2000;
    std::uint64_t seed = 1;

    void validate() const;
    std::size_t total() const { return v_sparsity.size() * g_sparsity.size() * samples_per_level; }
};

struct CrossbarSample {
    Eigen::VectorXd v;  // V
    Eigen::MatrixXd g;  // S
};

// Deterministic in (spec, cfg). Samples are ordered by (v level, g level, index).
std::vector<CrossbarSample> generate_samples(const SamplingSpec& spec, const CrossbarConfig& cfg);

struct Scalers {
    double v_min = 0.0, v_max = 1.0;
    double g_min = 0.0, g_max = 1.0;
    double fr_min = 0.0, fr_max = 1.0;

    double normalize_v(double x) const { return (x - v_min) / (v_max - v_min); }
    double normalize_g(double x) const { return (x - g_min) / (g_max - g_min); }
    double normalize_fr(double x) const { return (x - fr_min) / (fr_max - fr_min); }
    double denormalize_v(double u) const { return v_min + u * (v_max - v_min); }
    double denormalize_g(double u) const { return g_min + u * (g_max - g_min); }
    double denormalize_fr(double u) const { return fr_min + u * (fr_max - fr_min); }

    friend bool operator==(const Scalers&, const Scalers&) = default;
};

// Columnar corpus: column k of v, g and f_r is record k. g stores the
// row-major flattening of the n x n conductance matrix. mask(j, k) != 0 marks
// column j of record k as undefined (near-zero current); its f_r holds the
// normalized neutral ratio 1.
struct CrossbarDataset {
    int n = 0;
    SolverKind solver = SolverKind::nonlinear;
    Fingerprint fingerprint{};
    Scalers scalers{};
    Eigen::MatrixXd v;
    Eigen::MatrixXd g;
    Eigen::MatrixXd f_r;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;

    std::size_t size() const { return static_cast<std::size_t>(v.cols()); }
    Eigen::VectorXd physical_v(std::size_t k) const;
    Eigen::MatrixXd physical_g(std::size_t k) const;
    Eigen::VectorXd physical_fr(std::size_t k) const;
};

struct LabelStats {
    std::size_t failures = 0;
    std::size_t masked_columns = 0;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Labels every sample with the chosen circuit solve. When `reuse` is given the
// corpus is normalized with those scalers (validation splits reuse the
// training split's scalers); otherwise f_R scalers are fitted here.
CrossbarDataset label_with_fr(const std::vector<CrossbarSample>& samples, const CrossbarConfig& cfg,
                              SolverKind solver, const Scalers* reuse = nullptr, LabelStats* stats = nullptr,
                              unsigned threads = 0);

// Little-endian container: "XBDS" magic, u16 version, u16 n, u32 count,
// u8 solver, 32-byte fingerprint, 6 x f64 scalers, then per record
// v(n) | g(n^2) | f_r(n) as f64 followed by a ceil(n/8)-byte mask bitfield.
void write_dataset(const CrossbarDataset& ds, const std::string& path);
CrossbarDataset read_dataset(const std::string& path);
void write_dataset(const CrossbarDataset& ds, std::ostream& out);
CrossbarDataset read_dataset(std::istream& in);

// Physical-unit CSV for inspection.
void write_dataset_csv(const CrossbarDataset& ds, std::ostream& out);

// Concatenates two corpora of the same configuration, refitting f_R scalers
// to the union. Throws DatasetError when fingerprints, sizes or solvers differ.
CrossbarDataset merge_datasets(const CrossbarDataset& a, const CrossbarDataset& b);

}  // namespace xbemu
