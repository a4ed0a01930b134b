#pragma once

// Experiment specs, accuracy evaluation and resumable sweeps.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xbemu/datagen.hpp"
#include "xbemu/funcsim.hpp"
#include "xbemu/network.hpp"
#include "xbemu/surrogate.hpp"

namespace xbemu {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// key = value lines; '#' starts a comment. Keys are dotted lower-case names.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::vector<std::string> get_list(const std::string& key) const;
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }
    std::string origin() const { return origin_; }

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

struct SweepAxes {
    std::vector<int> xbar_size;
    std::vector<double> r_on;
    std::vector<double> on_off;
    std::vector<double> v_supply;
    std::vector<Precision> precision;
    std::vector<int> slice_stream;  // sets slice and stream width together
    std::vector<BackendKind> backend;

    std::size_t points() const;
};

struct ExperimentSpec {
    CrossbarConfig crossbar;   // n_rows/n_cols follow arch.xbar_size
    MvmArch arch;              // scheme widths follow precision
    Precision precision;
    BackendKind backend = BackendKind::analytical_linear;
    std::string model_path = "data/digits_cnn.xbmt";
    std::string dataset_path = "data/digits_test.xbmt";
    std::string surrogate_dir = "surrogates";
    std::size_t samples = 200;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    SweepAxes sweep;

    // Surrogate corpus and training.
    SamplingSpec datagen;
    std::size_t validation_per_level = 40;
    SolverKind label_solver = SolverKind::nonlinear;
    TrainSpec train;

    void validate() const;
};

// Throws ConfigError for unknown keys, malformed values or invalid settings.
ExperimentSpec spec_from_config(const KeyValueConfig& config);
ExperimentSpec load_spec(const std::string& path);

struct SweepPoint {
    CrossbarConfig crossbar;
    MvmArch arch;
    Precision precision;
    BackendKind backend = BackendKind::ideal;

    // Identity of the point under a fixed workload, sample budget and seed.
    std::string fingerprint(const std::string& workload) const;
};

// The experiment's base point with its arch/crossbar made consistent.
SweepPoint base_point(const ExperimentSpec& spec);
// Cartesian product of the declared axes in declaration order; the base point
// when no axis is declared.
std::vector<SweepPoint> expand_sweep(const ExperimentSpec& spec);

std::string surrogate_file_name(const CrossbarConfig& cfg);

struct PointResult {
    std::string id;
    std::string fingerprint;
    SweepPoint point;
    std::string backend_label;
    std::size_t samples = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;
    double baseline_accuracy = 0.0;
    double degradation = 0.0;            // baseline - accuracy, percentage points
    double precision_baseline = 0.0;     // ideal FxP at this point's precision
    std::vector<LayerCounters> layers;
    MvmCounters totals;
    std::string status = "ok";
};

struct SweepReport {
    PointResult baseline;
    std::vector<PointResult> points;
    std::size_t failures() const;
};

// Same seed and settings give byte-identical CSV and summary output. Points whose
// fingerprint already appears in `previous` (a prior CSV) are reused.
SweepReport run_sweep(const ExperimentSpec& spec, const std::vector<SweepPoint>& points,
                      const std::map<std::string, std::vector<std::string>>* previous = nullptr,
                      std::ostream* log = nullptr);
SweepReport evaluate_accuracy(const ExperimentSpec& spec, std::ostream* log = nullptr);

const std::vector<std::string>& sweep_csv_columns();
void write_sweep_csv(std::ostream& out, const SweepReport& report);
void write_summary(std::ostream& out, const SweepReport& report);
// Rows of a previous sweep CSV keyed by fingerprint; empty when absent.
std::map<std::string, std::vector<std::string>> read_sweep_csv(const std::string& path);

// Trains (or loads) the surrogate an experiment needs, reporting where it lives.
std::string surrogate_path(const ExperimentSpec& spec, const CrossbarConfig& cfg);

}  // namespace xbemu
