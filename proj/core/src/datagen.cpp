#include "xbemu/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "binary_io.hpp"
#include "xbemu/parallel.hpp"

namespace xbemu {

namespace {

constexpr std::uint16_t kDatasetVersion = 1;

double grid_conductance(const CrossbarConfig& cfg, std::uint32_t level, std::uint32_t max_level) {
    const double g = cfg.g_off() + static_cast<double>(level) / max_level * (cfg.g_on() - cfg.g_off());
    return std::clamp(g, cfg.g_off(), cfg.g_on());
}

}  // namespace

void SamplingSpec::validate() const {
    if (n < 1) throw std::invalid_argument("SamplingSpec: n must be positive");
    if (v_sparsity.empty() || g_sparsity.empty()) throw std::invalid_argument("SamplingSpec: empty sparsity grid");
    for (double s : v_sparsity)
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("SamplingSpec: sparsity must lie in [0, 1]");
    for (double s : g_sparsity)
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("SamplingSpec: sparsity must lie in [0, 1]");
    if (samples_per_level < 1) throw std::invalid_argument("SamplingSpec: samples_per_level must be >= 1");
    if (v_grid_bits < 1 || v_grid_bits > 16 || g_grid_bits < 1 || g_grid_bits > 16)
        throw std::invalid_argument("SamplingSpec: grid widths must lie in [1, 16] bits");
}

std::vector<CrossbarSample> generate_samples(const SamplingSpec& spec, const CrossbarConfig& cfg) {
    spec.validate();
    cfg.validate();
    if (spec.n != cfg.n_rows || spec.n != cfg.n_cols)
        throw std::invalid_argument("generate_samples: spec.n must match a square crossbar configuration");

    const std::uint32_t v_max_level = (1u << spec.v_grid_bits) - 1u;
    const std::uint32_t g_max_level = (1u << spec.g_grid_bits) - 1u;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> v_level(1, v_max_level);
    std::uniform_int_distribution<std::uint32_t> g_level(1, g_max_level);

    std::vector<CrossbarSample> out;
    out.reserve(spec.total());
    for (double sv : spec.v_sparsity) {
        for (double sg : spec.g_sparsity) {
            for (std::size_t k = 0; k < spec.samples_per_level; ++k) {
                CrossbarSample s;
                s.v.resize(spec.n);
                for (int i = 0; i < spec.n; ++i) {
                    const bool zero = unit(rng) < sv;
                    const auto level = v_level(rng);
                    s.v(i) = zero ? 0.0 : static_cast<double>(level) / v_max_level * cfg.v_supply;
                }
                s.g.resize(spec.n, spec.n);
                for (int i = 0; i < spec.n; ++i) {
                    for (int j = 0; j < spec.n; ++j) {
                        const bool zero = unit(rng) < sg;
                        const auto level = g_level(rng);
                        s.g(i, j) = grid_conductance(cfg, zero ? 0u : level, g_max_level);
                    }
                }
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

Eigen::VectorXd CrossbarDataset::physical_v(std::size_t k) const {
    return v.col(static_cast<Eigen::Index>(k)).unaryExpr([&](double u) { return scalers.denormalize_v(u); });
}

Eigen::MatrixXd CrossbarDataset::physical_g(std::size_t k) const {
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = scalers.denormalize_g(g(i * n + j, static_cast<Eigen::Index>(k)));
    return out;
}

Eigen::VectorXd CrossbarDataset::physical_fr(std::size_t k) const {
    return f_r.col(static_cast<Eigen::Index>(k)).unaryExpr([&](double u) { return scalers.denormalize_fr(u); });
}

CrossbarDataset label_with_fr(const std::vector<CrossbarSample>& samples, const CrossbarConfig& cfg, SolverKind solver,
                              const Scalers* reuse, LabelStats* stats, unsigned threads) {
    cfg.validate();
    if (cfg.n_rows != cfg.n_cols) throw std::invalid_argument("label_with_fr: crossbar must be square");
    if (threads == 0) threads = default_thread_count();
    const int n = cfg.n_rows;
    const std::size_t count = samples.size();

    std::vector<Eigen::VectorXd> ratio(count);
    std::vector<std::vector<std::uint8_t>> masked(count);
    std::vector<char> failed(count, 0);
    std::vector<CrossbarSolver> solvers;
    for (unsigned w = 0; w < threads; ++w) solvers.emplace_back(cfg);

    parallel_for(count, threads, [&](unsigned w, std::size_t k) {
        const auto& s = samples[k];
        if (s.v.size() != n || s.g.rows() != n || s.g.cols() != n)
            throw std::invalid_argument("label_with_fr: sample shape does not match the configuration");
        SolveResult r;
        try {
            r = solver == SolverKind::linear ? solvers[w].solve_linear(s.g, s.v)
                                             : solvers[w].solve_nonlinear(CrossbarState::program(cfg, s.g), s.v);
        } catch (const SolverError&) {
            failed[k] = 1;
            return;
        }
        const Eigen::VectorXd ideal = ideal_mvm(s.v, s.g);
        ratio[k].resize(n);
        masked[k].assign(n, 0);
        for (int j = 0; j < n; ++j) {
            if (std::abs(ideal(j)) < kCurrentEpsilon || std::abs(r.i_out(j)) < kCurrentEpsilon) {
                ratio[k](j) = 1.0;
                masked[k][j] = 1;
            } else {
                ratio[k](j) = ideal(j) / r.i_out(j);
            }
        }
    });

    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < count; ++k)
        if (!failed[k]) kept.push_back(k);
    const std::size_t failures = count - kept.size();
    if (stats) stats->failures = failures;
    if (failures * 100 > count)
        throw DatasetError("label_with_fr: " + std::to_string(failures) + " of " + std::to_string(count) +
                           " circuit solves failed (more than 1%)");

    CrossbarDataset ds;
    ds.n = n;
    ds.solver = solver;
    ds.fingerprint = cfg.fingerprint();
    if (reuse) {
        ds.scalers = *reuse;
    } else {
        Scalers sc;
        sc.v_min = 0.0;
        sc.v_max = cfg.v_supply;
        sc.g_min = cfg.g_off();
        sc.g_max = cfg.g_on();
        // The neutral ratio 1 is always inside the fitted range.
        sc.fr_min = 1.0;
        sc.fr_max = 1.0;
        for (auto k : kept) {
            for (int j = 0; j < n; ++j) {
                if (masked[k][j]) continue;
                sc.fr_min = std::min(sc.fr_min, ratio[k](j));
                sc.fr_max = std::max(sc.fr_max, ratio[k](j));
            }
        }
        if (sc.fr_max - sc.fr_min < 1e-12) sc.fr_max = sc.fr_min + 1.0;
        ds.scalers = sc;
    }

    const auto m = static_cast<Eigen::Index>(kept.size());
    ds.v.resize(n, m);
    ds.g.resize(static_cast<Eigen::Index>(n) * n, m);
    ds.f_r.resize(n, m);
    ds.mask.resize(n, m);
    std::size_t masked_columns = 0;
    for (Eigen::Index c = 0; c < m; ++c) {
        const std::size_t k = kept[static_cast<std::size_t>(c)];
        const auto& s = samples[k];
        for (int i = 0; i < n; ++i) ds.v(i, c) = ds.scalers.normalize_v(s.v(i));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) ds.g(i * n + j, c) = ds.scalers.normalize_g(s.g(i, j));
        for (int j = 0; j < n; ++j) {
            ds.f_r(j, c) = ds.scalers.normalize_fr(ratio[k](j));
            ds.mask(j, c) = masked[k][j];
            masked_columns += masked[k][j];
        }
    }
    if (stats) stats->masked_columns = masked_columns;
    return ds;
}

void write_dataset(const CrossbarDataset& ds, std::ostream& out) {
    if (ds.n < 1 || ds.n > 0xFFFF) throw DatasetError("write_dataset: crossbar size not representable");
    if (ds.size() > 0xFFFFFFFFull) throw DatasetError("write_dataset: too many records");
    io::Writer w(out);
    w.bytes("XBDS", 4);
    w.u16(kDatasetVersion);
    w.u16(static_cast<std::uint16_t>(ds.n));
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u8(static_cast<std::uint8_t>(ds.solver));
    w.bytes(ds.fingerprint.data(), ds.fingerprint.size());
    for (double s : {ds.scalers.v_min, ds.scalers.v_max, ds.scalers.g_min, ds.scalers.g_max, ds.scalers.fr_min,
                     ds.scalers.fr_max})
        w.f64(s);
    const int n = ds.n;
    const std::size_t mask_bytes = (static_cast<std::size_t>(n) + 7) / 8;
    std::vector<std::uint8_t> bits(mask_bytes);
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(ds.size()); ++c) {
        w.f64s(ds.v.col(c).data(), static_cast<std::size_t>(n));
        w.f64s(ds.g.col(c).data(), static_cast<std::size_t>(n) * n);
        w.f64s(ds.f_r.col(c).data(), static_cast<std::size_t>(n));
        std::fill(bits.begin(), bits.end(), 0);
        for (int j = 0; j < n; ++j)
            if (ds.mask(j, c)) bits[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
        w.bytes(bits.data(), bits.size());
    }
    if (!out) throw DatasetError("write_dataset: stream write failed");
}

CrossbarDataset read_dataset(std::istream& in) {
    auto r = io::Reader<DatasetError>::from_stream(in, "read_dataset");
    r.expect_magic("XBDS");
    const auto version = r.u16();
    if (version != kDatasetVersion) throw DatasetError("read_dataset: unsupported version " + std::to_string(version));
    CrossbarDataset ds;
    ds.n = r.u16();
    const std::uint32_t count = r.u32();
    const auto solver = r.u8();
    if (solver > 1) throw DatasetError("read_dataset: unknown solver tag");
    ds.solver = static_cast<SolverKind>(solver);
    r.bytes(ds.fingerprint.data(), ds.fingerprint.size());
    ds.scalers.v_min = r.f64();
    ds.scalers.v_max = r.f64();
    ds.scalers.g_min = r.f64();
    ds.scalers.g_max = r.f64();
    ds.scalers.fr_min = r.f64();
    ds.scalers.fr_max = r.f64();
    if (ds.n < 1) throw DatasetError("read_dataset: zero crossbar size");

    const auto n = static_cast<std::size_t>(ds.n);
    const std::size_t mask_bytes = (n + 7) / 8;
    const std::size_t record_bytes = (n + n * n + n) * sizeof(double) + mask_bytes;
    if (r.remaining() != record_bytes * count)
        throw DatasetError("read_dataset: body holds " + std::to_string(r.remaining()) + " bytes, expected " +
                           std::to_string(record_bytes * count) + " for " + std::to_string(count) + " records");

    ds.v.resize(ds.n, count);
    ds.g.resize(static_cast<Eigen::Index>(n * n), count);
    ds.f_r.resize(ds.n, count);
    ds.mask.resize(ds.n, count);
    std::vector<std::uint8_t> bits(mask_bytes);
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(count); ++c) {
        r.f64s(ds.v.col(c).data(), n);
        r.f64s(ds.g.col(c).data(), n * n);
        r.f64s(ds.f_r.col(c).data(), n);
        r.bytes(bits.data(), bits.size());
        for (std::size_t j = 0; j < n; ++j)
            ds.mask(static_cast<Eigen::Index>(j), c) = (bits[j / 8] >> (j % 8)) & 1u;
    }
    return ds;
}

void write_dataset(const CrossbarDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError("write_dataset: cannot open " + path);
    write_dataset(ds, out);
}

CrossbarDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("read_dataset: cannot open " + path);
    return read_dataset(in);
}

void write_dataset_csv(const CrossbarDataset& ds, std::ostream& out) {
    const int n = ds.n;
    out << "record";
    for (int i = 0; i < n; ++i) out << ",v" << i;
    for (int i = 0; i < n * n; ++i) out << ",g" << i;
    for (int j = 0; j < n; ++j) out << ",fr" << j;
    for (int j = 0; j < n; ++j) out << ",mask" << j;
    out << '\n';
    char buf[64];
    for (std::size_t k = 0; k < ds.size(); ++k) {
        const auto c = static_cast<Eigen::Index>(k);
        out << k;
        for (int i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof buf, ",%.17g", ds.scalers.denormalize_v(ds.v(i, c)));
            out << buf;
        }
        for (int i = 0; i < n * n; ++i) {
            std::snprintf(buf, sizeof buf, ",%.17g", ds.scalers.denormalize_g(ds.g(i, c)));
            out << buf;
        }
        for (int j = 0; j < n; ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", ds.scalers.denormalize_fr(ds.f_r(j, c)));
            out << buf;
        }
        for (int j = 0; j < n; ++j) out << ',' << static_cast<int>(ds.mask(j, c));
        out << '\n';
    }
}

CrossbarDataset merge_datasets(const CrossbarDataset& a, const CrossbarDataset& b) {
    if (a.fingerprint != b.fingerprint)
        throw DatasetError("merge_datasets: configuration fingerprints differ (" + to_hex(a.fingerprint).substr(0, 16) +
                           " vs " + to_hex(b.fingerprint).substr(0, 16) + ")");
    if (a.n != b.n || a.solver != b.solver) throw DatasetError("merge_datasets: size or solver tag differs");
    if (a.scalers.v_min != b.scalers.v_min || a.scalers.v_max != b.scalers.v_max ||
        a.scalers.g_min != b.scalers.g_min || a.scalers.g_max != b.scalers.g_max)
        throw DatasetError("merge_datasets: V/G scalers differ");

    CrossbarDataset out;
    out.n = a.n;
    out.solver = a.solver;
    out.fingerprint = a.fingerprint;
    out.scalers = a.scalers;
    out.scalers.fr_min = std::min(a.scalers.fr_min, b.scalers.fr_min);
    out.scalers.fr_max = std::max(a.scalers.fr_max, b.scalers.fr_max);

    const Eigen::Index na = static_cast<Eigen::Index>(a.size());
    const Eigen::Index nb = static_cast<Eigen::Index>(b.size());
    out.v.resize(a.v.rows(), na + nb);
    out.v << a.v, b.v;
    out.g.resize(a.g.rows(), na + nb);
    out.g << a.g, b.g;
    out.mask.resize(a.mask.rows(), na + nb);
    out.mask << a.mask, b.mask;
    out.f_r.resize(a.f_r.rows(), na + nb);
    auto refit = [&](const CrossbarDataset& src, Eigen::Index offset) {
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(src.size()); ++c)
            for (Eigen::Index j = 0; j < src.f_r.rows(); ++j)
                out.f_r(j, offset + c) = out.scalers.normalize_fr(src.scalers.denormalize_fr(src.f_r(j, c)));
    };
    refit(a, 0);
    refit(b, na);
    return out;
}

}  // namespace xbemu
