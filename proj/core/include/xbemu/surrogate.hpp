#pragma once

// Two-layer rectifier network mapping normalized (V, G) to the normalized
// distortion ratio f_R of one crossbar configuration.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "xbemu/circuit.hpp"
#include "xbemu/datagen.hpp"

namespace xbemu {

struct SurrogateModel {
    int n = 0;
    int p = 0;
    Eigen::MatrixXd w1;  // (n^2 + n) x p, rows ordered v then row-major g
    Eigen::VectorXd b1;  // p
    Eigen::MatrixXd w2;  // p x n
    Eigen::VectorXd b2;  // n
    Scalers scalers{};
    Fingerprint fingerprint{};

    int input_dim() const { return n * n + n; }
    void validate() const;

    static SurrogateModel zeros(int n, int p);
    // He initialization for w1 and w2, zero biases.
    static SurrogateModel initialize(int n, int p, std::uint64_t seed);

    // out = w2^T relu(w1^T [v; g] + b1) + b2
    Eigen::VectorXd forward(const Eigen::VectorXd& v_norm, const Eigen::VectorXd& g_norm) const;
    // Column-batched form over stacked inputs (input_dim x B).
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

class SurrogateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainSpec {
    int hidden = 500;
    int epochs = 200;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double weight_decay = 0.0;  // decoupled, weights only
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochLoss {
    int epoch = 0;
    double train_mse = 0.0;
    double validation_mse = 0.0;  // NaN without a validation split
};

struct TrainResult {
    SurrogateModel model;
    std::vector<EpochLoss> history;
    double final_validation_mse = 0.0;
};

struct SurrogateGradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
};

// Stacks dataset records [v; g] into an input_dim x count matrix.
Eigen::MatrixXd stacked_inputs(const CrossbarDataset& ds);

// Mean squared error over unmasked outputs; fills grads when non-null.
double masked_mse(const SurrogateModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                  const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& mask,
                  SurrogateGradients* grads = nullptr);

double validation_mse(const SurrogateModel& model, const CrossbarDataset& ds);

// Adam over shuffled mini-batches. The model inherits the training corpus's
// scalers and fingerprint; `validation` must share both.
TrainResult train(const CrossbarDataset& training, const CrossbarDataset* validation, const TrainSpec& spec);
TrainResult train(SurrogateModel init, const CrossbarDataset& training, const CrossbarDataset* validation,
                  const TrainSpec& spec);

void write_loss_csv(std::ostream& out, const std::vector<EpochLoss>& history);

struct SurrogateCounters {
    std::uint64_t clamped = 0;
    std::uint64_t fallbacks = 0;
};

inline constexpr double kRatioEpsilon = 1e-3;

// A model bound to one programmed conductance matrix. The conductance half of
// the first layer is folded into a per-matrix bias, so each evaluation costs
// only the voltage half plus the output layer.
class SurrogateCrossbar {
public:
    SurrogateCrossbar(const SurrogateModel& model, const CrossbarConfig& cfg, const Eigen::MatrixXd& g,
                      double ratio_epsilon = kRatioEpsilon);

    // v: n x B volts -> n x B amperes.
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& v, SurrogateCounters* counters = nullptr) const;
    Eigen::VectorXd predicted_ratio(const Eigen::VectorXd& v, SurrogateCounters* counters = nullptr) const;
    std::uint64_t clamped_conductances() const { return clamped_g_; }

private:
    Eigen::MatrixXd normalized_v(const Eigen::MatrixXd& v, SurrogateCounters* counters) const;

    const SurrogateModel* model_;
    Eigen::MatrixXd g_;
    Eigen::VectorXd hidden_bias_;
    double ratio_epsilon_;
    std::uint64_t clamped_g_ = 0;
};

Eigen::VectorXd predict_current(const SurrogateModel& model, const CrossbarConfig& cfg, const Eigen::VectorXd& v,
                                const Eigen::MatrixXd& g, SurrogateCounters* counters = nullptr);

struct RmseReport {
    std::size_t columns = 0;
    double surrogate_rmse = 0.0;
    double analytical_rmse = 0.0;
    double ratio() const { return analytical_rmse / surrogate_rmse; }
};

using CurrentPredictor = std::function<Eigen::VectorXd(const Eigen::VectorXd& v, const Eigen::MatrixXd& g)>;

// NF of the predictor and of solve_linear, each against the oracle NF implied
// by the (nonlinear-labeled) validation corpus; masked columns are skipped.
RmseReport benchmark_rmse(const CurrentPredictor& predictor, const CrossbarDataset& validation,
                          const CrossbarConfig& cfg, unsigned threads = 0);
RmseReport benchmark_rmse(const SurrogateModel& model, const CrossbarDataset& validation, const CrossbarConfig& cfg,
                          unsigned threads = 0);

// "XBNN" container: u16 version, u16 n, u32 p, fingerprint, 6 x f64 scalers,
// then w1 (row-major), b1, w2 (row-major), b2 as f64.
void save_model(const SurrogateModel& model, std::ostream& out);
void save_model(const SurrogateModel& model, const std::string& path);
SurrogateModel load_model(std::istream& in);
SurrogateModel load_model(const std::string& path);

}  // namespace xbemu
