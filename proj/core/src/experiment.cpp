#include "xbemu/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include "xbemu/parallel.hpp"

namespace xbemu {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string fmt_fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::vector<char> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string csv_safe(std::string s) {
    for (auto& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = c == ',' ? ';' : ' ';
    return s;
}

const std::vector<std::string> kKnownKeys = {
    "model", "dataset", "samples", "seed", "threads", "backend", "surrogate_dir",
    "xbar.size", "xbar.r_source", "xbar.r_sink", "xbar.r_wire", "xbar.r_access", "xbar.r_on", "xbar.on_off",
    "xbar.v_supply", "xbar.v_read", "device.i0", "device.d0", "device.v0",
    "arch.weight_bits", "arch.weight_frac", "arch.act_bits", "arch.act_frac", "arch.slice_width",
    "arch.stream_width", "arch.adc_bits", "arch.adc_full_scale", "arch.acc_bits", "arch.acc_frac",
    "sweep.xbar_size", "sweep.r_on", "sweep.on_off", "sweep.v_supply", "sweep.precision", "sweep.slice_stream",
    "sweep.backend",
    "datagen.samples_per_level", "datagen.validation_per_level", "datagen.v_sparsity", "datagen.g_sparsity",
    "datagen.solver",
    "train.hidden", "train.epochs", "train.batch_size", "train.learning_rate",
    "train.weight_decay"};

template <class T, class Parse>
std::vector<T> parse_list(const KeyValueConfig& cfg, const std::string& key, Parse parse) {
    std::vector<T> out;
    for (const auto& item : cfg.get_list(key)) {
        try {
            out.push_back(parse(item));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(cfg.origin() + ": " + key + ": cannot parse '" + item + "' (" + e.what() + ")");
        }
    }
    return out;
}

double parse_number(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
}

Precision parse_precision(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("expected bits:frac");
    Precision p;
    p.weight_bits = p.act_bits = static_cast<int>(parse_number(s.substr(0, colon)));
    p.weight_frac = p.act_frac = static_cast<int>(parse_number(s.substr(colon + 1)));
    return p;
}

std::string precision_label(const Precision& p) {
    return std::to_string(p.weight_bits) + ":" + std::to_string(p.weight_frac) + "/" + std::to_string(p.act_bits) +
           ":" + std::to_string(p.act_frac);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (cfg.values_.count(key)) throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

bool KeyValueConfig::has(const std::string& key) const { return values_.count(key) != 0; }

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    try {
        return parse_number(values_.at(key));
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": " + key + ": expected a number, got '" + values_.at(key) + "'");
    }
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    try {
        std::size_t used = 0;
        const long long v = std::stoll(values_.at(key), &used);
        if (used != values_.at(key).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": " + key + ": expected an integer, got '" + values_.at(key) + "'");
    }
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    std::stringstream ss(values_.at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError(origin_ + ": " + key + ": empty list entry");
        out.push_back(item);
    }
    return out;
}

std::size_t SweepAxes::points() const {
    std::size_t n = 1;
    for (std::size_t k : {xbar_size.size(), r_on.size(), on_off.size(), v_supply.size(), precision.size(),
                          slice_stream.size(), backend.size()})
        n *= std::max<std::size_t>(k, 1);
    return n;
}

void ExperimentSpec::validate() const {
    try {
        crossbar.validate();
        arch.validate();
        precision.validate();
        datagen.validate();
        train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (samples < 1) throw ConfigError("samples must be >= 1");
    if (validation_per_level < 1) throw ConfigError("datagen.validation_per_level must be >= 1");
    if (arch.scheme.weight_bits != precision.weight_bits || arch.scheme.input_bits != precision.act_bits)
        throw ConfigError("slice scheme widths must follow the precision");
    for (const auto& p : sweep.precision) {
        try {
            p.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("sweep.precision: ") + e.what());
        }
    }
    // Every combination of widths must slice evenly.
    std::vector<int> widths = sweep.slice_stream;
    if (widths.empty()) widths = {arch.scheme.slice_width};
    std::vector<Precision> precisions = sweep.precision;
    if (precisions.empty()) precisions = {precision};
    for (int w : widths) {
        if (w < 1 || w > 16) throw ConfigError("slice/stream width must lie in [1, 16]");
        for (const auto& p : precisions)
            if (p.weight_bits % w != 0 || p.act_bits % w != 0)
                throw ConfigError("width " + std::to_string(w) + " does not divide precision " + precision_label(p));
    }
    for (int s : sweep.xbar_size)
        if (s < 1) throw ConfigError("sweep.xbar_size entries must be positive");
}

ExperimentSpec spec_from_config(const KeyValueConfig& c) {
    for (const auto& [key, value] : c.values())
        if (std::find(kKnownKeys.begin(), kKnownKeys.end(), key) == kKnownKeys.end())
            throw ConfigError(c.origin() + ": unknown key '" + key + "'");

    ExperimentSpec s;
    s.model_path = c.get("model", s.model_path);
    s.dataset_path = c.get("dataset", s.dataset_path);
    s.surrogate_dir = c.get("surrogate_dir", s.surrogate_dir);
    const auto samples = c.get_int("samples", static_cast<long long>(s.samples));
    if (samples < 1) throw ConfigError("samples must be >= 1");
    s.samples = static_cast<std::size_t>(samples);
    s.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));
    s.threads = static_cast<unsigned>(std::max(0LL, c.get_int("threads", 0)));
    try {
        s.backend = parse_backend_kind(c.get("backend", "analytical"));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    auto& x = s.crossbar;
    const int size = static_cast<int>(c.get_int("xbar.size", 64));
    x.n_rows = x.n_cols = size;
    x.r_source = c.get_double("xbar.r_source", x.r_source);
    x.r_sink = c.get_double("xbar.r_sink", x.r_sink);
    x.r_wire = c.get_double("xbar.r_wire", x.r_wire);
    x.r_access = c.get_double("xbar.r_access", x.r_access);
    x.r_on = c.get_double("xbar.r_on", x.r_on);
    x.set_on_off_ratio(c.get_double("xbar.on_off", 6.0));
    x.v_supply = c.get_double("xbar.v_supply", x.v_supply);
    x.v_read = c.get_double("xbar.v_read", x.v_read);
    x.device.i0 = c.get_double("device.i0", x.device.i0);
    x.device.d0 = c.get_double("device.d0", x.device.d0);
    x.device.v0 = c.get_double("device.v0", x.device.v0);

    s.precision.weight_bits = static_cast<int>(c.get_int("arch.weight_bits", 16));
    s.precision.weight_frac = static_cast<int>(c.get_int("arch.weight_frac", 13));
    s.precision.act_bits = static_cast<int>(c.get_int("arch.act_bits", 16));
    s.precision.act_frac = static_cast<int>(c.get_int("arch.act_frac", 13));
    s.arch.xbar_size = size;
    s.arch.scheme.weight_bits = s.precision.weight_bits;
    s.arch.scheme.input_bits = s.precision.act_bits;
    s.arch.scheme.slice_width = static_cast<int>(c.get_int("arch.slice_width", 4));
    s.arch.scheme.stream_width = static_cast<int>(c.get_int("arch.stream_width", 4));
    s.arch.adc_bits = static_cast<int>(c.get_int("arch.adc_bits", 14));
    s.arch.adc_full_scale = c.get_double("arch.adc_full_scale", 0.0);
    s.arch.accumulator.total_bits = static_cast<int>(c.get_int("arch.acc_bits", 32));
    s.arch.accumulator.frac_bits = static_cast<int>(c.get_int("arch.acc_frac", 24));

    s.sweep.xbar_size = parse_list<int>(c, "sweep.xbar_size", [](const std::string& v) { return static_cast<int>(parse_number(v)); });
    s.sweep.r_on = parse_list<double>(c, "sweep.r_on", parse_number);
    s.sweep.on_off = parse_list<double>(c, "sweep.on_off", parse_number);
    s.sweep.v_supply = parse_list<double>(c, "sweep.v_supply", parse_number);
    s.sweep.precision = parse_list<Precision>(c, "sweep.precision", parse_precision);
    s.sweep.slice_stream = parse_list<int>(c, "sweep.slice_stream", [](const std::string& v) { return static_cast<int>(parse_number(v)); });
    s.sweep.backend = parse_list<BackendKind>(c, "sweep.backend", [](const std::string& v) {
        try {
            return parse_backend_kind(v);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("sweep.backend: ") + e.what());
        }
    });

    s.datagen.n = size;
    s.datagen.seed = s.seed;
    s.datagen.v_grid_bits = s.arch.scheme.stream_width;
    s.datagen.g_grid_bits = s.arch.scheme.slice_width;
    s.datagen.samples_per_level = static_cast<std::size_t>(std::max(1LL, c.get_int("datagen.samples_per_level", 2000)));
    s.validation_per_level = static_cast<std::size_t>(std::max(1LL, c.get_int("datagen.validation_per_level", 200)));
    if (c.has("datagen.v_sparsity")) s.datagen.v_sparsity = parse_list<double>(c, "datagen.v_sparsity", parse_number);
    if (c.has("datagen.g_sparsity")) s.datagen.g_sparsity = parse_list<double>(c, "datagen.g_sparsity", parse_number);
    try {
        s.label_solver = parse_solver_kind(c.get("datagen.solver", "nonlinear"));
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    s.train.hidden = static_cast<int>(c.get_int("train.hidden", 500));
    s.train.epochs = static_cast<int>(c.get_int("train.epochs", 200));
    s.train.batch_size = static_cast<int>(c.get_int("train.batch_size", 128));
    s.train.learning_rate = c.get_double("train.learning_rate", 1e-3);
    s.train.weight_decay = c.get_double("train.weight_decay", 0.0);
    s.train.seed = s.seed;
    s.validate();
    return s;
}

ExperimentSpec load_spec(const std::string& path) { return spec_from_config(KeyValueConfig::load(path)); }

std::string SweepPoint::fingerprint(const std::string& workload) const {
    std::ostringstream text;
    text << crossbar.canonical_text() << "xbar=" << arch.xbar_size << "\nscheme=" << arch.scheme.weight_bits << '/'
         << arch.scheme.slice_width << '/' << arch.scheme.input_bits << '/' << arch.scheme.stream_width
         << "\nadc=" << arch.adc_bits << '/' << fmt_double(arch.adc_full_scale) << "\nacc=" << arch.accumulator.to_string()
         << "\nprecision=" << precision_label(precision) << "\nbackend=" << to_string(backend) << "\nworkload=" << workload
         << '\n';
    return to_hex(sha256(text.str()));
}

SweepPoint base_point(const ExperimentSpec& spec) {
    SweepPoint p;
    p.crossbar = spec.crossbar;
    p.crossbar.n_rows = p.crossbar.n_cols = spec.arch.xbar_size;
    p.arch = spec.arch;
    p.precision = spec.precision;
    p.backend = spec.backend;
    return p;
}

std::vector<SweepPoint> expand_sweep(const ExperimentSpec& spec) {
    const auto& a = spec.sweep;
    std::vector<SweepPoint> points{base_point(spec)};
    auto expand = [&](std::size_t count, auto apply) {
        if (count == 0) return;
        std::vector<SweepPoint> next;
        for (const auto& p : points)
            for (std::size_t i = 0; i < count; ++i) {
                SweepPoint q = p;
                apply(q, i);
                next.push_back(q);
            }
        points = std::move(next);
    };
    expand(a.backend.size(), [&](SweepPoint& p, std::size_t i) { p.backend = a.backend[i]; });
    expand(a.xbar_size.size(), [&](SweepPoint& p, std::size_t i) {
        p.arch.xbar_size = a.xbar_size[i];
        p.crossbar.n_rows = p.crossbar.n_cols = a.xbar_size[i];
    });
    expand(a.r_on.size(), [&](SweepPoint& p, std::size_t i) {
        const double ratio = p.crossbar.on_off_ratio();
        p.crossbar.r_on = a.r_on[i];
        p.crossbar.set_on_off_ratio(ratio);
    });
    expand(a.on_off.size(), [&](SweepPoint& p, std::size_t i) { p.crossbar.set_on_off_ratio(a.on_off[i]); });
    expand(a.v_supply.size(), [&](SweepPoint& p, std::size_t i) { p.crossbar.v_supply = a.v_supply[i]; });
    expand(a.precision.size(), [&](SweepPoint& p, std::size_t i) {
        p.precision = a.precision[i];
        p.arch.scheme.weight_bits = p.precision.weight_bits;
        p.arch.scheme.input_bits = p.precision.act_bits;
    });
    expand(a.slice_stream.size(), [&](SweepPoint& p, std::size_t i) {
        p.arch.scheme.slice_width = a.slice_stream[i];
        p.arch.scheme.stream_width = a.slice_stream[i];
    });
    return points;
}

std::string surrogate_file_name(const CrossbarConfig& cfg) {
    return "surrogate_" + to_hex(cfg.fingerprint()).substr(0, 16) + ".xbnn";
}

std::string surrogate_path(const ExperimentSpec& spec, const CrossbarConfig& cfg) {
    return (std::filesystem::path(spec.surrogate_dir) / surrogate_file_name(cfg)).string();
}

std::size_t SweepReport::failures() const {
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const PointResult& r) { return r.status != "ok"; }));
}

const std::vector<std::string>& sweep_csv_columns() {
    static const std::vector<std::string> columns = {
        "id", "fingerprint", "backend", "xbar_size", "r_source", "r_sink", "r_wire", "r_access", "r_on", "on_off",
        "v_supply", "weight_bits", "weight_frac", "act_bits", "act_frac", "slice_width", "stream_width", "adc_bits",
        "samples", "correct", "accuracy", "baseline_accuracy", "degradation", "precision_baseline_accuracy",
        "adc_clipped", "saturated", "surrogate_clamped", "surrogate_fallbacks", "status"};
    return columns;
}

namespace {

std::vector<std::string> csv_row(const PointResult& r) {
    const auto& x = r.point.crossbar;
    const auto& a = r.point.arch;
    const auto& p = r.point.precision;
    return {r.id,
            r.fingerprint,
            r.backend_label,
            std::to_string(a.xbar_size),
            fmt_double(x.r_source),
            fmt_double(x.r_sink),
            fmt_double(x.r_wire),
            fmt_double(x.r_access),
            fmt_double(x.r_on),
            fmt_double(x.on_off_ratio()),
            fmt_double(x.v_supply),
            std::to_string(p.weight_bits),
            std::to_string(p.weight_frac),
            std::to_string(p.act_bits),
            std::to_string(p.act_frac),
            std::to_string(a.scheme.slice_width),
            std::to_string(a.scheme.stream_width),
            std::to_string(a.adc_bits),
            std::to_string(r.samples),
            std::to_string(r.correct),
            fmt_fixed(r.accuracy, 6),
            fmt_fixed(r.baseline_accuracy, 6),
            fmt_fixed(r.degradation, 6),
            fmt_fixed(r.precision_baseline, 6),
            std::to_string(r.totals.adc_clipped),
            std::to_string(r.totals.saturated),
            std::to_string(r.totals.surrogate_clamped),
            std::to_string(r.totals.surrogate_fallbacks),
            csv_safe(r.status)};
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

PointResult result_from_row(const std::vector<std::string>& row, const SweepPoint& point) {
    const auto& cols = sweep_csv_columns();
    auto field = [&](const std::string& name) {
        return row[static_cast<std::size_t>(std::find(cols.begin(), cols.end(), name) - cols.begin())];
    };
    PointResult r;
    r.point = point;
    r.id = field("id");
    r.fingerprint = field("fingerprint");
    r.backend_label = field("backend");
    r.samples = std::stoull(field("samples"));
    r.correct = std::stoull(field("correct"));
    r.accuracy = std::stod(field("accuracy"));
    r.baseline_accuracy = std::stod(field("baseline_accuracy"));
    r.degradation = std::stod(field("degradation"));
    r.precision_baseline = std::stod(field("precision_baseline_accuracy"));
    r.totals.adc_clipped = std::stoull(field("adc_clipped"));
    r.totals.saturated = std::stoull(field("saturated"));
    r.totals.surrogate_clamped = std::stoull(field("surrogate_clamped"));
    r.totals.surrogate_fallbacks = std::stoull(field("surrogate_fallbacks"));
    r.status = field("status");
    return r;
}

struct Workload {
    QuantizedNetwork base;
    ImageSet images;  // the evaluated subset, in evaluation order
    std::string identity;
    ModelBundle bundle;
};

Workload load_workload(const ExperimentSpec& spec) {
    Workload w;
    try {
        w.bundle = import_model(spec.model_path);
    } catch (const FormatError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    ImageSet all;
    try {
        all = load_images(spec.dataset_path);
    } catch (const FormatError& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
    // Seeded subset of the test images.
    std::vector<int> order(static_cast<std::size_t>(all.count));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n = std::min<std::size_t>(spec.samples, order.size());
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
    w.images.count = static_cast<int>(n);
    w.images.channels = all.channels;
    w.images.height = all.height;
    w.images.width = all.width;
    const std::size_t per = static_cast<std::size_t>(all.channels) * all.height * all.width;
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = static_cast<std::size_t>(order[i]);
        w.images.pixels.insert(w.images.pixels.end(), all.pixels.begin() + static_cast<std::ptrdiff_t>(src * per),
                               all.pixels.begin() + static_cast<std::ptrdiff_t>((src + 1) * per));
        w.images.labels.push_back(all.labels[src]);
    }

    const auto model_bytes = file_bytes(spec.model_path);
    const auto data_bytes = file_bytes(spec.dataset_path);
    std::ostringstream id;
    id << to_hex(sha256(model_bytes.data(), model_bytes.size())) << '/'
       << to_hex(sha256(data_bytes.data(), data_bytes.size())) << "/samples=" << n << "/seed=" << spec.seed
       << "/base=" << precision_label(spec.precision) << "/acc=" << spec.arch.accumulator.to_string();
    w.identity = id.str();
    return w;
}

std::size_t count_correct(const std::vector<int>& predictions, const ImageSet& images) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) c += predictions[i] == images.labels[i];
    return c;
}

}  // namespace

SweepReport run_sweep(const ExperimentSpec& spec, const std::vector<SweepPoint>& points,
                      const std::map<std::string, std::vector<std::string>>* previous, std::ostream* log) {
    spec.validate();
    const Workload w = load_workload(spec);
    const double total = static_cast<double>(w.images.count);
    std::mutex log_mutex;
    auto note = [&](const std::string& msg) {
        if (!log) return;
        std::lock_guard lock(log_mutex);
        *log << msg << std::endl;
    };

    // Exact fixed-point references, one per precision.
    std::vector<Precision> precisions{spec.precision};
    for (const auto& p : points)
        if (std::find(precisions.begin(), precisions.end(), p.precision) == precisions.end())
            precisions.push_back(p.precision);
    std::vector<double> reference(precisions.size());
    for (std::size_t i = 0; i < precisions.size(); ++i) {
        const auto net = QuantizedNetwork::build(w.bundle, precisions[i], spec.arch.accumulator);
        const auto res = run_network(net, w.images, static_cast<std::size_t>(w.images.count), nullptr, nullptr);
        reference[i] = 100.0 * static_cast<double>(count_correct(res.predictions, w.images)) / total;
    }
    auto reference_for = [&](const Precision& p) {
        return reference[static_cast<std::size_t>(std::find(precisions.begin(), precisions.end(), p) -
                                                  precisions.begin())];
    };

    SweepReport report;
    {
        auto& b = report.baseline;
        b.id = "baseline";
        b.point = base_point(spec);
        b.point.backend = BackendKind::ideal;
        b.backend_label = "fxp_reference";
        b.fingerprint = to_hex(sha256("baseline\n" + w.identity));
        const auto net = QuantizedNetwork::build(w.bundle, spec.precision, spec.arch.accumulator);
        const auto res = run_network(net, w.images, static_cast<std::size_t>(w.images.count), nullptr, nullptr);
        b.samples = res.predictions.size();
        b.correct = count_correct(res.predictions, w.images);
        b.accuracy = 100.0 * static_cast<double>(b.correct) / total;
        b.baseline_accuracy = b.accuracy;
        b.precision_baseline = b.accuracy;
        b.layers = res.layers;
        for (const auto& l : res.layers) b.totals += l.counters;
    }

    report.points.resize(points.size());
    unsigned threads = spec.threads ? spec.threads : default_thread_count();
    const unsigned outer = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(points.size())));
    const unsigned inner = std::max(1u, threads / outer);
    parallel_for(points.size(), outer, [&](unsigned, std::size_t k) {
        const auto& point = points[k];
        const std::string fp = point.fingerprint(w.identity);
        if (previous) {
            const auto it = previous->find(fp);
            if (it != previous->end() && it->second.size() == sweep_csv_columns().size() && it->second.back() == "ok") {
                report.points[k] = result_from_row(it->second, point);
                report.points[k].id = "p" + std::to_string(k);
                note("point " + std::to_string(k) + ": resumed");
                return;
            }
        }
        PointResult r;
        r.id = "p" + std::to_string(k);
        r.fingerprint = fp;
        r.point = point;
        r.backend_label = to_string(point.backend);
        r.baseline_accuracy = report.baseline.accuracy;
        r.precision_baseline = reference_for(point.precision);
        try {
            SurrogateModel model;
            const SurrogateModel* model_ptr = nullptr;
            if (point.backend == BackendKind::surrogate) {
                const auto path = surrogate_path(spec, point.crossbar);
                if (!std::filesystem::exists(path))
                    throw FuncsimError("no surrogate for crossbar " + to_hex(point.crossbar.fingerprint()).substr(0, 16) +
                                       " (expected " + path + "); train it with `xbemu train-surrogate --config <file> "
                                       "--out " + spec.surrogate_dir + "` using this point's xbar.* settings");
                model = load_model(path);
                model_ptr = &model;
            }
            const auto backend = make_backend(point.backend, point.crossbar, model_ptr);
            const auto net = QuantizedNetwork::build(w.bundle, point.precision, point.arch.accumulator);
            const auto res = run_network(net, w.images, static_cast<std::size_t>(w.images.count), &point.arch, backend.get(), inner);
            r.samples = res.predictions.size();
            r.correct = count_correct(res.predictions, w.images);
            r.accuracy = 100.0 * static_cast<double>(r.correct) / total;
            r.degradation = r.baseline_accuracy - r.accuracy;
            r.layers = res.layers;
            for (const auto& l : res.layers) r.totals += l.counters;
            note("point " + std::to_string(k) + " (" + r.backend_label + ", " + std::to_string(point.arch.xbar_size) +
                 "x" + std::to_string(point.arch.xbar_size) + "): accuracy " + fmt_fixed(r.accuracy, 2) + "%");
        } catch (const std::exception& e) {
            r.status = std::string("error: ") + e.what();
            note("point " + std::to_string(k) + " failed: " + e.what());
        }
        report.points[k] = std::move(r);
    });
    return report;
}

SweepReport evaluate_accuracy(const ExperimentSpec& spec, std::ostream* log) {
    return run_sweep(spec, {base_point(spec)}, nullptr, log);
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
    const auto& cols = sweep_csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    auto emit = [&](const PointResult& r) {
        const auto row = csv_row(r);
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    };
    emit(report.baseline);
    for (const auto& r : report.points) emit(r);
}

void write_summary(std::ostream& out, const SweepReport& report) {
    const auto& b = report.baseline;
    out << "ideal fixed-point baseline: " << fmt_fixed(b.accuracy, 2) << "% (" << b.correct << "/" << b.samples
        << ")\n";
    out << "points: " << report.points.size() << ", failures: " << report.failures() << "\n\n";
    for (const auto& r : report.points) {
        const auto& a = r.point.arch;
        out << r.id << "  " << r.backend_label << "  " << a.xbar_size << "x" << a.xbar_size << "  r_on="
            << fmt_double(r.point.crossbar.r_on) << "  on/off=" << fmt_double(r.point.crossbar.on_off_ratio())
            << "  v=" << fmt_double(r.point.crossbar.v_supply) << "  precision=" << precision_label(r.point.precision)
            << "  slice/stream=" << a.scheme.slice_width << "/" << a.scheme.stream_width << "\n";
        if (r.status != "ok") {
            out << "    " << r.status << "\n";
            continue;
        }
        out << "    accuracy " << fmt_fixed(r.accuracy, 2) << "%  degradation " << fmt_fixed(r.degradation, 2)
            << " pts  (precision baseline " << fmt_fixed(r.precision_baseline, 2) << "%)\n";
        if (r.layers.empty()) out << "    counters resumed from a previous run\n";
        for (const auto& l : r.layers)
            out << "    " << l.name << ": evaluations " << l.counters.crossbar_evaluations << ", adc clipped "
                << l.counters.adc_clipped << ", saturated " << l.counters.saturated << ", surrogate clamped "
                << l.counters.surrogate_clamped << ", fallbacks " << l.counters.surrogate_fallbacks << "\n";
    }
}

std::map<std::string, std::vector<std::string>> read_sweep_csv(const std::string& path) {
    std::map<std::string, std::vector<std::string>> rows;
    std::ifstream in(path);
    if (!in) return rows;
    std::string line;
    if (!std::getline(in, line) || split_csv(line) != sweep_csv_columns()) return rows;
    while (std::getline(in, line)) {
        auto fields = split_csv(line);
        if (fields.size() != sweep_csv_columns().size()) continue;
        rows[fields[1]] = std::move(fields);
    }
    return rows;
}

}  // namespace xbemu
