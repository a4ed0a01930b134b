#include "xbemu/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "xbemu/parallel.hpp"

namespace xbemu {

namespace {

constexpr std::uint16_t kModelVersion = 1;

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

void check_dims(const SurrogateModel& m) {
    if (m.w1.rows() != m.input_dim() || m.w1.cols() != m.p || m.b1.size() != m.p || m.w2.rows() != m.p ||
        m.w2.cols() != m.n || m.b2.size() != m.n)
        throw SurrogateError("SurrogateModel: parameter shapes do not match n=" + std::to_string(m.n) +
                             ", p=" + std::to_string(m.p));
}

struct AdamState {
    Eigen::MatrixXd m_w1, v_w1, m_w2, v_w2;
    Eigen::VectorXd m_b1, v_b1, m_b2, v_b2;
    long step = 0;

    explicit AdamState(const SurrogateModel& model)
        : m_w1(Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols())),
          v_w1(m_w1),
          m_w2(Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols())),
          v_w2(m_w2),
          m_b1(Eigen::VectorXd::Zero(model.p)),
          v_b1(m_b1),
          m_b2(Eigen::VectorXd::Zero(model.n)),
          v_b2(m_b2) {}
};

template <class Param, class Grad, class Moment>
void adam_update(Param& param, const Grad& grad, Moment& m, Moment& v, const TrainSpec& spec, double c1, double c2,
                 double decay = 0.0) {
    if (decay > 0.0) param *= 1.0 - spec.learning_rate * decay;
    m = spec.beta1 * m + (1.0 - spec.beta1) * grad;
    v = spec.beta2 * v + (1.0 - spec.beta2) * grad.cwiseAbs2();
    param.array() -= spec.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + spec.adam_epsilon);
}

void check_compatible(const SurrogateModel& model, const CrossbarDataset& ds, const char* what) {
    if (ds.n != model.n) throw SurrogateError(std::string(what) + ": dataset size differs from model");
    if (ds.fingerprint != model.fingerprint)
        throw SurrogateError(std::string(what) + ": dataset fingerprint differs from the model's configuration");
}

}  // namespace

void SurrogateModel::validate() const {
    if (n < 1 || p < 1) throw SurrogateError("SurrogateModel: n and p must be positive");
    check_dims(*this);
}

SurrogateModel SurrogateModel::zeros(int n, int p) {
    if (n < 1 || p < 1) throw SurrogateError("SurrogateModel: n and p must be positive");
    SurrogateModel m;
    m.n = n;
    m.p = p;
    m.w1 = Eigen::MatrixXd::Zero(m.input_dim(), p);
    m.b1 = Eigen::VectorXd::Zero(p);
    m.w2 = Eigen::MatrixXd::Zero(p, n);
    m.b2 = Eigen::VectorXd::Zero(n);
    return m;
}

SurrogateModel SurrogateModel::initialize(int n, int p, std::uint64_t seed) {
    auto m = zeros(n, p);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s1 = std::sqrt(2.0 / m.input_dim());
    const double s2 = std::sqrt(2.0 / p);
    for (Eigen::Index j = 0; j < m.w1.cols(); ++j)
        for (Eigen::Index i = 0; i < m.w1.rows(); ++i) m.w1(i, j) = s1 * normal(rng);
    for (Eigen::Index j = 0; j < m.w2.cols(); ++j)
        for (Eigen::Index i = 0; i < m.w2.rows(); ++i) m.w2(i, j) = s2 * normal(rng);
    return m;
}

Eigen::VectorXd SurrogateModel::forward(const Eigen::VectorXd& v_norm, const Eigen::VectorXd& g_norm) const {
    if (v_norm.size() != n || g_norm.size() != static_cast<Eigen::Index>(n) * n)
        throw std::invalid_argument("SurrogateModel::forward: expected v of " + std::to_string(n) + " and g of " +
                                    std::to_string(n * n) + " entries");
    Eigen::VectorXd x(input_dim());
    x << v_norm, g_norm;
    return forward(Eigen::MatrixXd(x)).col(0);
}

Eigen::MatrixXd SurrogateModel::forward(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim())
        throw std::invalid_argument("SurrogateModel::forward: input has " + std::to_string(x.rows()) +
                                    " rows, expected " + std::to_string(input_dim()));
    Eigen::MatrixXd h = (w1.transpose() * x).colwise() + b1;
    h = h.cwiseMax(0.0);
    Eigen::MatrixXd out = (w2.transpose() * h).colwise() + b2;
    return out;
}

void TrainSpec::validate() const {
    if (hidden < 1 || epochs < 0 || batch_size < 1) throw SurrogateError("TrainSpec: sizes must be positive");
    if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
        !(adam_epsilon > 0.0) || !(weight_decay >= 0.0))
        throw SurrogateError("TrainSpec: invalid optimizer parameters");
}

Eigen::MatrixXd stacked_inputs(const CrossbarDataset& ds) {
    Eigen::MatrixXd x(ds.v.rows() + ds.g.rows(), ds.v.cols());
    x << ds.v, ds.g;
    return x;
}

double masked_mse(const SurrogateModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Mask& mask,
                  SurrogateGradients* grads) {
    if (x.cols() != y.cols() || y.rows() != model.n || mask.rows() != y.rows() || mask.cols() != y.cols())
        throw std::invalid_argument("masked_mse: inconsistent batch shapes");
    const Eigen::MatrixXd z = (model.w1.transpose() * x).colwise() + model.b1;
    const Eigen::MatrixXd h = z.cwiseMax(0.0);
    const Eigen::MatrixXd out = (model.w2.transpose() * h).colwise() + model.b2;

    const Eigen::MatrixXd keep = (mask.array() == 0).cast<double>().matrix();
    const double count = keep.sum();
    const Eigen::MatrixXd err = (out - y).cwiseProduct(keep);
    const double loss = count > 0 ? err.squaredNorm() / count : 0.0;
    if (grads) {
        const Eigen::MatrixXd d_out = count > 0 ? Eigen::MatrixXd(err * (2.0 / count)) : Eigen::MatrixXd(err * 0.0);
        grads->w2.noalias() = h * d_out.transpose();
        grads->b2 = d_out.rowwise().sum();
        Eigen::MatrixXd d_z = model.w2 * d_out;
        d_z = d_z.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        grads->w1.noalias() = x * d_z.transpose();
        grads->b1 = d_z.rowwise().sum();
    }
    return loss;
}

double validation_mse(const SurrogateModel& model, const CrossbarDataset& ds) {
    check_compatible(model, ds, "validation_mse");
    double sum = 0.0;
    double count = 0.0;
    const Eigen::Index chunk = 512;
    for (Eigen::Index start = 0; start < static_cast<Eigen::Index>(ds.size()); start += chunk) {
        const Eigen::Index len = std::min<Eigen::Index>(chunk, static_cast<Eigen::Index>(ds.size()) - start);
        Eigen::MatrixXd x(model.input_dim(), len);
        x << ds.v.middleCols(start, len), ds.g.middleCols(start, len);
        const Eigen::MatrixXd out = model.forward(x);
        for (Eigen::Index c = 0; c < len; ++c)
            for (Eigen::Index j = 0; j < model.n; ++j) {
                if (ds.mask(j, start + c)) continue;
                const double e = out(j, c) - ds.f_r(j, start + c);
                sum += e * e;
                count += 1.0;
            }
    }
    return count > 0 ? sum / count : 0.0;
}

TrainResult train(const CrossbarDataset& training, const CrossbarDataset* validation, const TrainSpec& spec) {
    spec.validate();
    auto init = SurrogateModel::initialize(training.n, spec.hidden, spec.seed);
    init.scalers = training.scalers;
    init.fingerprint = training.fingerprint;
    return train(std::move(init), training, validation, spec);
}

TrainResult train(SurrogateModel model, const CrossbarDataset& training, const CrossbarDataset* validation,
                  const TrainSpec& spec) {
    spec.validate();
    model.validate();
    if (training.size() == 0) throw SurrogateError("train: empty training corpus");
    model.scalers = training.scalers;
    model.fingerprint = training.fingerprint;
    check_compatible(model, training, "train");
    if (validation) {
        check_compatible(model, *validation, "train");
        if (!(validation->scalers == training.scalers))
            throw SurrogateError("train: validation corpus must reuse the training scalers");
    }

    const Eigen::MatrixXd x_all = stacked_inputs(training);
    const auto count = static_cast<Eigen::Index>(training.size());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ull);

    AdamState adam(model);
    SurrogateGradients grads;
    TrainResult result;
    Eigen::MatrixXd xb, yb;
    Mask mb;
    for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double weighted = 0.0;
        Eigen::Index seen = 0;
        for (Eigen::Index start = 0; start < count; start += spec.batch_size) {
            const Eigen::Index len = std::min<Eigen::Index>(spec.batch_size, count - start);
            xb.resize(x_all.rows(), len);
            yb.resize(model.n, len);
            mb.resize(model.n, len);
            for (Eigen::Index c = 0; c < len; ++c) {
                const Eigen::Index k = order[static_cast<std::size_t>(start + c)];
                xb.col(c) = x_all.col(k);
                yb.col(c) = training.f_r.col(k);
                mb.col(c) = training.mask.col(k);
            }
            const double loss = masked_mse(model, xb, yb, mb, &grads);
            if (!std::isfinite(loss))
                throw SurrogateError("train: loss diverged (non-finite) at epoch " + std::to_string(epoch) +
                                     "; lower the learning rate");
            weighted += loss * static_cast<double>(len);
            seen += len;

            ++adam.step;
            const double c1 = 1.0 - std::pow(spec.beta1, static_cast<double>(adam.step));
            const double c2 = 1.0 - std::pow(spec.beta2, static_cast<double>(adam.step));
            adam_update(model.w1, grads.w1, adam.m_w1, adam.v_w1, spec, c1, c2, spec.weight_decay);
            adam_update(model.b1, grads.b1, adam.m_b1, adam.v_b1, spec, c1, c2);
            adam_update(model.w2, grads.w2, adam.m_w2, adam.v_w2, spec, c1, c2, spec.weight_decay);
            adam_update(model.b2, grads.b2, adam.m_b2, adam.v_b2, spec, c1, c2);
        }
        EpochLoss row;
        row.epoch = epoch;
        row.train_mse = weighted / static_cast<double>(seen);
        row.validation_mse =
            validation ? validation_mse(model, *validation) : std::numeric_limits<double>::quiet_NaN();
        result.history.push_back(row);
    }
    result.final_validation_mse =
        validation ? validation_mse(model, *validation) : std::numeric_limits<double>::quiet_NaN();
    result.model = std::move(model);
    return result;
}

void write_loss_csv(std::ostream& out, const std::vector<EpochLoss>& history) {
    out << "epoch,train_mse,validation_mse\n";
    char buf[128];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g\n", e.epoch, e.train_mse, e.validation_mse);
        out << buf;
    }
}

SurrogateCrossbar::SurrogateCrossbar(const SurrogateModel& model, const CrossbarConfig& cfg, const Eigen::MatrixXd& g,
                                     double ratio_epsilon)
    : model_(&model), g_(g), ratio_epsilon_(ratio_epsilon) {
    model.validate();
    if (cfg.fingerprint() != model.fingerprint)
        throw SurrogateError("surrogate was trained for configuration " + to_hex(model.fingerprint).substr(0, 16) +
                             ", not " + to_hex(cfg.fingerprint()).substr(0, 16));
    const int n = model.n;
    if (g.rows() != n || g.cols() != n)
        throw std::invalid_argument("SurrogateCrossbar: conductance matrix must be " + std::to_string(n) + "x" +
                                    std::to_string(n));
    Eigen::VectorXd g_norm(static_cast<Eigen::Index>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double u = model.scalers.normalize_g(g(i, j));
            if (u < 0.0 || u > 1.0) {
                ++clamped_g_;
                u = std::clamp(u, 0.0, 1.0);
            }
            g_norm(i * n + j) = u;
        }
    hidden_bias_ = model.w1.bottomRows(static_cast<Eigen::Index>(n) * n).transpose() * g_norm + model.b1;
}

Eigen::MatrixXd SurrogateCrossbar::normalized_v(const Eigen::MatrixXd& v, SurrogateCounters* counters) const {
    if (v.rows() != model_->n) throw std::invalid_argument("SurrogateCrossbar: voltage vector has wrong length");
    Eigen::MatrixXd u(v.rows(), v.cols());
    std::uint64_t clamped = 0;
    for (Eigen::Index c = 0; c < v.cols(); ++c)
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            double x = model_->scalers.normalize_v(v(i, c));
            if (x < 0.0 || x > 1.0) {
                ++clamped;
                x = std::clamp(x, 0.0, 1.0);
            }
            u(i, c) = x;
        }
    if (counters) counters->clamped += clamped;
    return u;
}

Eigen::MatrixXd SurrogateCrossbar::evaluate(const Eigen::MatrixXd& v, SurrogateCounters* counters) const {
    const auto& m = *model_;
    const Eigen::MatrixXd u = normalized_v(v, counters);
    Eigen::MatrixXd h = (m.w1.topRows(m.n).transpose() * u).colwise() + hidden_bias_;
    h = h.cwiseMax(0.0);
    const Eigen::MatrixXd out = (m.w2.transpose() * h).colwise() + m.b2;
    Eigen::MatrixXd current = g_.transpose() * v;
    std::uint64_t fallbacks = 0;
    for (Eigen::Index c = 0; c < v.cols(); ++c)
        for (Eigen::Index j = 0; j < m.n; ++j) {
            const double ratio = m.scalers.denormalize_fr(out(j, c));
            if (std::abs(ratio) < ratio_epsilon_)
                ++fallbacks;
            else
                current(j, c) /= ratio;
        }
    if (counters) {
        counters->fallbacks += fallbacks;
        counters->clamped += clamped_g_;
    }
    return current;
}

Eigen::VectorXd SurrogateCrossbar::predicted_ratio(const Eigen::VectorXd& v, SurrogateCounters* counters) const {
    const auto& m = *model_;
    const Eigen::MatrixXd u = normalized_v(v, counters);
    Eigen::VectorXd h = (m.w1.topRows(m.n).transpose() * u.col(0) + hidden_bias_).cwiseMax(0.0);
    Eigen::VectorXd out = m.w2.transpose() * h + m.b2;
    return out.unaryExpr([&](double x) { return m.scalers.denormalize_fr(x); });
}

Eigen::VectorXd predict_current(const SurrogateModel& model, const CrossbarConfig& cfg, const Eigen::VectorXd& v,
                                const Eigen::MatrixXd& g, SurrogateCounters* counters) {
    SurrogateCrossbar xbar(model, cfg, g);
    return xbar.evaluate(Eigen::MatrixXd(v), counters).col(0);
}

RmseReport benchmark_rmse(const CurrentPredictor& predictor, const CrossbarDataset& validation,
                          const CrossbarConfig& cfg, unsigned threads) {
    if (validation.fingerprint != cfg.fingerprint())
        throw SurrogateError("benchmark_rmse: validation corpus was labeled for a different configuration");
    if (validation.solver != SolverKind::nonlinear)
        throw SurrogateError("benchmark_rmse: validation corpus must carry nonlinear oracle labels");
    if (threads == 0) threads = default_thread_count();
    const std::size_t count = validation.size();
    const int n = validation.n;

    std::vector<Eigen::VectorXd> linear(count);
    std::vector<CrossbarSolver> solvers;
    for (unsigned w = 0; w < threads; ++w) solvers.emplace_back(cfg);
    parallel_for(count, threads, [&](unsigned w, std::size_t k) {
        linear[k] = solvers[w].solve_linear(validation.physical_g(k), validation.physical_v(k)).i_out;
    });

    double se_sur = 0.0;
    double se_lin = 0.0;
    RmseReport report;
    for (std::size_t k = 0; k < count; ++k) {
        const Eigen::VectorXd v = validation.physical_v(k);
        const Eigen::MatrixXd g = validation.physical_g(k);
        const Eigen::VectorXd fr = validation.physical_fr(k);
        const Eigen::VectorXd ideal = ideal_mvm(v, g);
        const Eigen::VectorXd predicted = predictor(v, g);
        for (int j = 0; j < n; ++j) {
            if (validation.mask(j, static_cast<Eigen::Index>(k))) continue;
            const double nf_oracle = 1.0 - 1.0 / fr(j);
            const double nf_sur = (ideal(j) - predicted(j)) / ideal(j);
            const double nf_lin = (ideal(j) - linear[k](j)) / ideal(j);
            se_sur += (nf_sur - nf_oracle) * (nf_sur - nf_oracle);
            se_lin += (nf_lin - nf_oracle) * (nf_lin - nf_oracle);
            ++report.columns;
        }
    }
    if (report.columns == 0) throw SurrogateError("benchmark_rmse: no defined columns in the validation corpus");
    report.surrogate_rmse = std::sqrt(se_sur / static_cast<double>(report.columns));
    report.analytical_rmse = std::sqrt(se_lin / static_cast<double>(report.columns));
    return report;
}

RmseReport benchmark_rmse(const SurrogateModel& model, const CrossbarDataset& validation, const CrossbarConfig& cfg,
                          unsigned threads) {
    check_compatible(model, validation, "benchmark_rmse");
    return benchmark_rmse(
        [&](const Eigen::VectorXd& v, const Eigen::MatrixXd& g) { return predict_current(model, cfg, v, g); },
        validation, cfg, threads);
}

void save_model(const SurrogateModel& model, std::ostream& out) {
    model.validate();
    if (model.n > 0xFFFF) throw SurrogateError("save_model: crossbar size not representable");
    io::Writer w(out);
    w.bytes("XBNN", 4);
    w.u16(kModelVersion);
    w.u16(static_cast<std::uint16_t>(model.n));
    w.u32(static_cast<std::uint32_t>(model.p));
    w.bytes(model.fingerprint.data(), model.fingerprint.size());
    const auto& s = model.scalers;
    for (double x : {s.v_min, s.v_max, s.g_min, s.g_max, s.fr_min, s.fr_max}) w.f64(x);
    for (Eigen::Index i = 0; i < model.w1.rows(); ++i)
        for (Eigen::Index j = 0; j < model.w1.cols(); ++j) w.f64(model.w1(i, j));
    w.f64s(model.b1.data(), static_cast<std::size_t>(model.b1.size()));
    for (Eigen::Index i = 0; i < model.w2.rows(); ++i)
        for (Eigen::Index j = 0; j < model.w2.cols(); ++j) w.f64(model.w2(i, j));
    w.f64s(model.b2.data(), static_cast<std::size_t>(model.b2.size()));
    if (!out) throw SurrogateError("save_model: stream write failed");
}

SurrogateModel load_model(std::istream& in) {
    auto r = io::Reader<SurrogateError>::from_stream(in, "load_model");
    r.expect_magic("XBNN");
    const auto version = r.u16();
    if (version != kModelVersion) throw SurrogateError("load_model: unsupported version " + std::to_string(version));
    const int n = r.u16();
    const auto p = r.u32();
    if (n < 1 || p < 1 || p > (1u << 24)) throw SurrogateError("load_model: implausible dimensions");
    const std::size_t in_dim = static_cast<std::size_t>(n) * n + n;
    const std::size_t expected =
        32 + 6 * 8 + (in_dim * p + p + static_cast<std::size_t>(p) * n + static_cast<std::size_t>(n)) * 8;
    if (r.remaining() != expected)
        throw SurrogateError("load_model: payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                             std::to_string(expected));
    auto m = SurrogateModel::zeros(n, static_cast<int>(p));
    r.bytes(m.fingerprint.data(), m.fingerprint.size());
    m.scalers.v_min = r.f64();
    m.scalers.v_max = r.f64();
    m.scalers.g_min = r.f64();
    m.scalers.g_max = r.f64();
    m.scalers.fr_min = r.f64();
    m.scalers.fr_max = r.f64();
    for (Eigen::Index i = 0; i < m.w1.rows(); ++i)
        for (Eigen::Index j = 0; j < m.w1.cols(); ++j) m.w1(i, j) = r.f64();
    r.f64s(m.b1.data(), static_cast<std::size_t>(m.b1.size()));
    for (Eigen::Index i = 0; i < m.w2.rows(); ++i)
        for (Eigen::Index j = 0; j < m.w2.cols(); ++j) m.w2(i, j) = r.f64();
    r.f64s(m.b2.data(), static_cast<std::size_t>(m.b2.size()));
    return m;
}

void save_model(const SurrogateModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw SurrogateError("save_model: cannot open " + path);
    save_model(model, out);
}

SurrogateModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SurrogateError("load_model: cannot open " + path);
    return load_model(in);
}

}  // namespace xbemu
