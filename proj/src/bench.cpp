#include "quantot/bench.hpp"

#include "quantot/errors.hpp"
#include "quantot/exact_ot.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace quantot::bench {
namespace {

constexpr std::uint64_t kFamilyPlugin = 1;
constexpr std::uint64_t kFamilyQuantized = 2;
constexpr std::uint64_t kFamilyQerr = 3;
constexpr std::uint64_t kFamilyEps = 4;
constexpr std::uint64_t kFamilyCloud = 5;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class F>
void parallel_for(std::size_t count, std::size_t jobs, const F& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct Fnv {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= c[i];
            h *= 0x100000001b3ULL;
        }
    }
    void str(const std::string& s) {
        bytes(s.data(), s.size());
        bytes("\0", 1);
    }
    template <class T>
    void pod(const T& v) {
        bytes(&v, sizeof v);
    }
};

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// --- dataset spec ---------------------------------------------------------

struct SpecArgs {
    std::string name;
    std::map<std::string, std::string> kv;
    std::string spec;

    std::optional<std::string> take(const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    }
    double number(const std::string& key, std::optional<double> fallback) {
        auto v = take(key);
        if (!v) {
            if (!fallback) throw ConfigError("dataset '" + spec + "' needs " + key + "=");
            return *fallback;
        }
        try {
            std::size_t used = 0;
            const double x = std::stod(*v, &used);
            if (used != v->size()) throw std::invalid_argument(*v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("dataset '" + spec + "': " + key + "=" + *v + " is not a number");
        }
    }
    std::size_t count(const std::string& key, std::optional<double> fallback) {
        const double x = number(key, fallback);
        if (!(x >= 1.0) || x != std::floor(x) || x > 1e9)
            throw ConfigError("dataset '" + spec + "': " + key + " must be a positive integer");
        return static_cast<std::size_t>(x);
    }
    std::string text(const std::string& key) {
        auto v = take(key);
        if (!v || v->empty()) throw ConfigError("dataset '" + spec + "' needs " + key + "=");
        return *v;
    }
    void done() const {
        if (!kv.empty()) throw ConfigError("dataset '" + spec + "': unknown parameter '" + kv.begin()->first + "'");
    }
};

SpecArgs parse_spec(const std::string& spec) {
    SpecArgs a;
    a.spec = spec;
    const auto colon = spec.find(':');
    a.name = spec.substr(0, colon);
    if (colon == std::string::npos) return a;
    std::string rest = spec.substr(colon + 1);
    std::size_t start = 0;
    while (start <= rest.size()) {
        auto comma = rest.find(',', start);
        if (comma == std::string::npos) comma = rest.size();
        const std::string item = rest.substr(start, comma - start);
        if (!item.empty()) {
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("dataset '" + spec + "': expected key=value, got '" + item + "'");
            a.kv[item.substr(0, eq)] = item.substr(eq + 1);
        }
        start = comma + 1;
    }
    return a;
}

Dataset from_clouds(std::string descriptor, DiscreteMeasure mu, DiscreteMeasure nu) {
    if (mu.dim() != nu.dim()) throw InputError(descriptor + ": the two clouds have different dimensions");
    Dataset ds;
    ds.descriptor = std::move(descriptor);
    ds.samplers = SamplerPair{empirical_sampler(mu, ds.descriptor + "/mu"), empirical_sampler(nu, ds.descriptor + "/nu"),
                              std::nullopt, ds.descriptor};
    ds.mu_cloud = std::move(mu);
    ds.nu_cloud = std::move(nu);
    return ds;
}

std::uint64_t measure_hash(std::uint64_t h0, const DiscreteMeasure& m) {
    Fnv f;
    f.h = h0;
    f.pod(m.size());
    f.pod(m.dim());
    f.bytes(m.support().data(), m.support().size() * sizeof(double));
    f.bytes(m.weights().data(), m.weights().size() * sizeof(double));
    return f.h;
}

// --- estimator cells ---------------------------------------------------------

struct Series {
    std::string estimator;
    double kappa = 0.0;
    bool quantized() const { return estimator == "quantized"; }
};

std::vector<Series> all_series(const ExperimentConfig& c) {
    std::vector<Series> s{{"plugin", 0.0}};
    for (double kappa : c.kappas) s.push_back({"quantized", kappa});
    return s;
}

std::uint64_t cell_seed(const ExperimentConfig& c, const Series& s, std::size_t k, std::size_t rep) {
    return derive_seed(c.seed, {s.quantized() ? kFamilyQuantized : kFamilyPlugin, k, rep});
}

QuantizedOptions quantized_options(const ExperimentConfig& c, double kappa, std::size_t lloyd_iters) {
    QuantizedOptions o;
    o.kappa = kappa;
    o.seeding = c.seeding;
    o.chain_length = c.chain_length;
    o.lloyd_iters = lloyd_iters;
    return o;
}

double run_series(const Dataset& ds, const ExperimentConfig& c, const Series& s, std::size_t k, std::size_t rep) {
    Rng rng(cell_seed(c, s, k, rep));
    if (!s.quantized()) return plugin_estimate(ds.samplers.mu, ds.samplers.nu, k, rng);
    return quantized_estimate(ds.samplers.mu, ds.samplers.nu, k, quantized_options(c, s.kappa, c.lloyd_iters), rng);
}

std::size_t series_n(const Series& s, std::size_t k) { return s.quantized() ? oversample_budget(k, s.kappa) : k; }

double relative_reference(const Dataset& ds, const ExperimentConfig& c) {
    const double ref = reference_distance(ds, c.cache_dir);
    if (!(ref > 0.0)) throw ConfigError("reference distance of '" + ds.descriptor + "' is 0; relative error undefined");
    return ref;
}

// Differences within a few ulps of the reference are rounding in the solver's
// cost sum, not estimation error; report them as exact so deterministic
// datasets give 0 (and a NaN slope) instead of 1e-16 noise.
constexpr double kRelErrFloor = 1e-14;

double relative_error(double estimate, double reference) {
    const double e = std::abs(estimate - reference) / reference;
    return e <= kRelErrFloor ? 0.0 : e;
}

std::vector<double> as_doubles(const std::vector<std::size_t>& v) { return {v.begin(), v.end()}; }

const std::vector<std::size_t>& grid_of(const ExperimentConfig& c, std::vector<std::size_t>& storage) {
    if (!c.k_grid.empty()) return c.k_grid;
    storage = default_k_grid();
    return storage;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '\\';
        out += ch;
    }
    return out + "\"";
}

std::string metadata(const ExperimentConfig& c, const std::string& extra) {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, config_hash(c));
    std::ostringstream o;
    o << "# qot-bench version=" << kVersion << " experiment=" << experiment_name(c.kind)
      << " dataset=" << quote(c.dataset) << " config_hash=" << hash << " seed=" << c.seed << extra << '\n';
    return o.str();
}

void write_slopes(std::ostringstream& o, const std::vector<Slope>& slopes) {
    for (const auto& s : slopes)
        o << "# slope series=" << s.series << " value=" << fmt(s.value) << " stderr=" << fmt(s.stderr_)
          << " points=" << s.points << '\n';
}

std::string series_label(const Series& s) {
    return s.quantized() ? "quantized:kappa=" + fmt(s.kappa) : std::string("plugin");
}

} // namespace

const char* experiment_name(Experiment e) {
    switch (e) {
    case Experiment::error_vs_k: return "error-vs-k";
    case Experiment::cpu_time: return "cpu-time";
    case Experiment::eps_sweep: return "eps-sweep";
    case Experiment::qerr: return "qerr";
    case Experiment::variance: return "variance";
    case Experiment::lloyd: return "lloyd";
    }
    return "?";
}

Experiment parse_experiment(std::string_view name) {
    for (Experiment e : {Experiment::error_vs_k, Experiment::cpu_time, Experiment::eps_sweep, Experiment::qerr,
                         Experiment::variance, Experiment::lloyd})
        if (name == experiment_name(e)) return e;
    throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

std::vector<std::size_t> default_k_grid() {
    std::vector<std::size_t> g;
    for (int i = 0; i <= 8; ++i) g.push_back(static_cast<std::size_t>(std::lround(8.0 * std::pow(16.0, i / 8.0))));
    return g;
}

void validate(const ExperimentConfig& c) {
    if (c.reps < 1) throw ConfigError("reps must be >= 1");
    if (c.kind == Experiment::variance && c.reps < 2) throw ConfigError("variance needs reps >= 2");
    if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
    if (c.chain_length < 1) throw ConfigError("chain length must be >= 1");
    for (std::size_t i = 0; i < c.k_grid.size(); ++i) {
        if (c.k_grid[i] < 1) throw ConfigError("k grid values must be >= 1");
        if (i > 0 && c.k_grid[i] <= c.k_grid[i - 1]) throw ConfigError("k grid must be strictly increasing");
    }
    for (std::size_t i = 0; i < c.eps_grid.size(); ++i) {
        if (!(c.eps_grid[i] > 0.0) || !std::isfinite(c.eps_grid[i])) throw ConfigError("eps values must be positive");
        if (i > 0 && c.eps_grid[i] <= c.eps_grid[i - 1]) throw ConfigError("eps grid must be strictly increasing");
    }
    if (c.kind == Experiment::eps_sweep && c.eps_grid.empty()) throw ConfigError("eps-sweep needs an eps grid");
    if (c.kappas.empty()) throw ConfigError("at least one kappa is required");
    for (double k : c.kappas)
        if (!(k > 0.0 && k <= 1.0)) throw ConfigError("kappa must lie in (0, 1]");
    if (c.dataset.empty()) throw ConfigError("dataset spec is empty");
}

std::uint64_t config_hash(const ExperimentConfig& c) {
    Fnv f;
    f.str(experiment_name(c.kind));
    f.str(c.dataset);
    f.pod(c.k_grid.size());
    for (auto k : c.k_grid) f.pod(static_cast<std::uint64_t>(k));
    f.pod(c.eps_grid.size());
    for (double e : c.eps_grid) f.pod(e);
    f.pod(c.kappas.size());
    for (double k : c.kappas) f.pod(k);
    f.str(seeding_name(c.seeding));
    f.pod(static_cast<std::uint64_t>(c.chain_length));
    f.pod(static_cast<std::uint64_t>(c.lloyd_iters));
    f.pod(static_cast<std::uint64_t>(c.reps));
    f.pod(c.seed);
    return f.h;
}

Dataset load_dataset(const std::string& spec, std::uint64_t seed) {
    SpecArgs a = parse_spec(spec);
    Dataset ds;
    try {
        if (a.name == "gaussian") {
            const std::size_t d = a.count("d", 5);
            const double tau = a.number("tau", 1e-4);
            const auto n = a.take("n");
            ds.samplers = gaussian_pair(d, tau);
            if (n) {
                a.kv["n"] = *n;
                const std::size_t count = a.count("n", std::nullopt);
                Rng rng(derive_seed(seed, {kFamilyCloud}));
                DiscreteMeasure mu = DiscreteMeasure::uniform(ds.samplers.mu.sample(count, rng));
                DiscreteMeasure nu = DiscreteMeasure::uniform(ds.samplers.nu.sample(count, rng));
                a.done();
                return from_clouds(spec, std::move(mu), std::move(nu));
            }
        } else if (a.name == "hypercube") {
            ds.samplers = fragmented_hypercube(a.count("d", 2));
        } else if (a.name == "dirac") {
            ds.samplers = dirac_pair(a.count("d", 1));
        } else if (a.name == "mixtures") {
            const std::size_t m = a.count("m", 4);
            const std::size_t d = a.count("d", 2);
            const double tau = a.number("tau", 1e-6);
            const std::size_t n = a.count("n", 1000);
            const auto s = a.take("seed");
            std::uint64_t mseed = derive_seed(seed, {kFamilyCloud});
            if (s) {
                try {
                    mseed = std::stoull(*s);
                } catch (const std::exception&) {
                    throw ConfigError("dataset '" + spec + "': bad seed");
                }
            }
            a.done();
            Rng rng(mseed);
            auto [mu, nu] = sampled_mixtures(m, d, tau, n, rng);
            return from_clouds(spec, std::move(mu), std::move(nu));
        } else if (a.name == "grid") {
            const std::size_t side = a.count("side", 32);
            a.done();
            return from_clouds(spec, uniform_grid(side), uniform_grid(side));
        } else if (a.name == "csv" || a.name == "pgm") {
            const std::string mu_path = a.text("mu");
            const std::string nu_path = a.text("nu");
            if (a.name == "pgm") {
                a.done();
                return from_clouds(spec, load_grid_image(mu_path), load_grid_image(nu_path));
            }
            CsvOptions opt;
            if (auto st = a.take("standardize")) opt.standardize = *st == "1" || *st == "true";
            if (auto w = a.take("weight")) opt.weight_column = *w;
            a.done();
            return from_clouds(spec, load_csv_pointcloud(mu_path, opt), load_csv_pointcloud(nu_path, opt));
        } else {
            throw ConfigError("unknown dataset '" + a.name + "'");
        }
    } catch (const InputError& e) {
        // bad synthetic parameters are configuration mistakes; loader failures are data errors
        if (a.name == "csv" || a.name == "pgm") throw;
        throw ConfigError(std::string("dataset '") + spec + "': " + e.what());
    }
    a.done();
    ds.descriptor = spec;
    ds.samplers.descriptor = spec;
    return ds;
}

double reference_distance(const Dataset& ds, const std::string& cache_dir) {
    if (ds.samplers.reference) return *ds.samplers.reference;
    if (!ds.discrete()) throw ConfigError("dataset '" + ds.descriptor + "' has no reference distance");
    const DiscreteMeasure& mu = *ds.mu_cloud;
    const DiscreteMeasure& nu = *ds.nu_cloud;
    const double entries = static_cast<double>(mu.size()) * static_cast<double>(nu.size());
    if (entries > kMaxReferenceEntries)
        throw ConfigError("the exact reference for '" + ds.descriptor + "' needs " + fmt(entries) +
                          " cost entries; subsample the clouds below " + fmt(kMaxReferenceEntries));

    std::filesystem::path sidecar;
    if (!cache_dir.empty()) {
        char name[40];
        std::snprintf(name, sizeof name, "ref-%016" PRIx64 ".txt", measure_hash(measure_hash(0, mu), nu));
        sidecar = std::filesystem::path(cache_dir) / name;
        std::ifstream in(sidecar);
        double cached = 0.0;
        if (in >> cached && std::isfinite(cached)) return cached;
    }
    const double ref = w2_distance(mu, nu);
    if (!sidecar.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(sidecar.parent_path(), ec);
        std::ofstream out(sidecar);
        if (out) out << fmt(ref) << '\n';
    }
    return ref;
}

Slope fit_loglog(std::string series, const std::vector<double>& k, const std::vector<double>& err) {
    Slope s;
    s.series = std::move(series);
    s.value = s.stderr_ = kNaN;
    if (k.size() != err.size()) throw InputError("slope fit needs matching k and error vectors");
    std::vector<double> x, y;
    for (std::size_t i = k.size() / 2; i < k.size(); ++i) {
        if (!(err[i] > 0.0) || !(k[i] > 0.0)) return s;
        x.push_back(std::log(k[i]));
        y.push_back(std::log(err[i]));
    }
    s.points = x.size();
    if (x.size() < 2) return s;
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) return s;
    s.value = sxy / sxx;
    if (x.size() >= 3) {
        double ssr = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - my - s.value * (x[i] - mx);
            ssr += r * r;
        }
        s.stderr_ = std::sqrt(ssr / (n - 2.0) / sxx);
    }
    return s;
}

Summary summarize(const std::vector<double>& v) {
    Summary s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

ErrorVsK run_error_vs_k(const ExperimentConfig& c) {
    validate(c);
    const Dataset ds = load_dataset(c.dataset, c.seed);
    ErrorVsK out;
    out.reference = relative_reference(ds, c);
    std::vector<std::size_t> storage;
    const auto& grid = grid_of(c, storage);
    const auto series = all_series(c);
    const std::size_t per_series = grid.size() * c.reps;
    std::vector<double> err(series.size() * per_series);
    parallel_for(err.size(), c.jobs, [&](std::size_t cell) {
        const auto& s = series[cell / per_series];
        const std::size_t k = grid[(cell % per_series) / c.reps];
        const std::size_t rep = cell % c.reps;
        err[cell] = relative_error(run_series(ds, c, s, k, rep), out.reference);
    });
    for (std::size_t si = 0; si < series.size(); ++si) {
        std::vector<double> means;
        for (std::size_t ki = 0; ki < grid.size(); ++ki) {
            const auto first = err.begin() + static_cast<std::ptrdiff_t>(si * per_series + ki * c.reps);
            const Summary sum = summarize(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(c.reps)));
            const auto& s = series[si];
            out.rows.push_back({s.estimator, s.quantized() ? seeding_name(c.seeding) : "-", s.kappa, grid[ki],
                                series_n(s, grid[ki]), sum.mean, sum.std, c.reps});
            means.push_back(sum.mean);
        }
        out.slopes.push_back(fit_loglog(series_label(series[si]), as_doubles(grid), means));
    }
    return out;
}

CpuTime run_cpu_time(const ExperimentConfig& c) {
    validate(c);
    const Dataset ds = load_dataset(c.dataset, c.seed);
    CpuTime out;
    out.reference = relative_reference(ds, c);
    std::vector<std::size_t> storage;
    const auto& grid = grid_of(c, storage);
    const auto series = all_series(c);
    out.rows.resize(series.size() * grid.size());
    parallel_for(out.rows.size(), c.pin_timing ? 1 : c.jobs, [&](std::size_t cell) {
        const auto& s = series[cell / grid.size()];
        const std::size_t k = grid[cell % grid.size()];
        run_series(ds, c, s, k, 0); // warm-up, discarded
        std::vector<double> errs;
        double time = 0.0;
        for (std::size_t rep = 0; rep < c.reps; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            const double est = run_series(ds, c, s, k, rep);
            time += seconds_since(start);
            errs.push_back(relative_error(est, out.reference));
        }
        out.rows[cell] = {s.estimator, s.quantized() ? seeding_name(c.seeding) : "-", s.kappa, k, series_n(s, k),
                          summarize(errs).mean, time / static_cast<double>(c.reps), c.reps};
    });
    return out;
}

EpsSweep run_eps_sweep(const ExperimentConfig& c) {
    validate(c);
    const Dataset ds = load_dataset(c.dataset, c.seed);
    if (!ds.discrete())
        throw ConfigError("eps-sweep needs a discrete dataset (e.g. gaussian:...,n=2000 or mixtures:...)");
    EpsSweep out;
    out.reference = reference_distance(ds, c.cache_dir);
    out.n_mu = ds.mu_cloud->size();
    out.n_nu = ds.nu_cloud->size();
    const std::vector<std::string> methods{"quantized", "approx"};
    const std::size_t cells = methods.size() * c.eps_grid.size();
    out.rows.resize(cells * c.reps);
    parallel_for(cells, c.pin_timing ? 1 : c.jobs, [&](std::size_t cell) {
        const bool quantized = cell / c.eps_grid.size() == 0;
        const std::size_t ei = cell % c.eps_grid.size();
        const double eps = c.eps_grid[ei];
        auto once = [&](std::size_t rep) {
            if (quantized) {
                Rng rng(derive_seed(c.seed, {kFamilyEps, ei, rep}));
                return quantized_eps_estimate(*ds.mu_cloud, *ds.nu_cloud, eps, rng);
            }
            return approx_distance(*ds.mu_cloud, *ds.nu_cloud, 3.0 * eps);
        };
        once(0); // warm-up, discarded
        for (std::size_t rep = 0; rep < c.reps; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            const EpsEstimate e = once(rep);
            const double t = seconds_since(start);
            out.rows[cell * c.reps + rep] = {methods[quantized ? 0 : 1],
                                             eps,
                                             rep,
                                             e.k_mu,
                                             e.k_nu,
                                             e.estimate,
                                             std::abs(e.estimate - out.reference),
                                             3.0 * eps,
                                             e.solve.iterations,
                                             e.solve.converged,
                                             t};
        }
    });
    return out;
}

Qerr run_qerr_vs_k(const ExperimentConfig& c) {
    validate(c);
    const Dataset ds = load_dataset(c.dataset, c.seed);
    std::vector<std::size_t> storage;
    const auto& grid = grid_of(c, storage);
    if (ds.discrete() && grid.back() > ds.mu_cloud->size())
        throw ConfigError("k = " + std::to_string(grid.back()) + " exceeds the cloud size " +
                          std::to_string(ds.mu_cloud->size()));
    const QuantizedOptions opt = quantized_options(c, c.kappas.front(), c.lloyd_iters);
    std::vector<double> phi(grid.size() * c.reps);
    std::vector<std::size_t> sizes(grid.size());
    parallel_for(phi.size(), c.jobs, [&](std::size_t cell) {
        const std::size_t ki = cell / c.reps;
        const std::size_t k = grid[ki];
        Rng rng(derive_seed(c.seed, {kFamilyQerr, k, cell % c.reps}));
        std::optional<DiscreteMeasure> drawn;
        if (!ds.discrete())
            drawn.emplace(DiscreteMeasure::uniform(ds.samplers.mu.sample(oversample_budget(k, opt.kappa), rng)));
        const DiscreteMeasure& m = ds.discrete() ? *ds.mu_cloud : *drawn;
        sizes[ki] = m.size();
        QuantizationResult q = opt.seeding == Seeding::kmeanspp ? kmeanspp_seed(m, k, rng)
                                                                : afk_mc2_seed(m, k, opt.chain_length, rng);
        phi[cell] = lloyd_refine(m, std::move(q), opt.lloyd_iters).error;
    });
    Qerr out;
    std::vector<double> means;
    for (std::size_t ki = 0; ki < grid.size(); ++ki) {
        const auto first = phi.begin() + static_cast<std::ptrdiff_t>(ki * c.reps);
        const Summary s = summarize(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(c.reps)));
        out.rows.push_back({grid[ki], sizes[ki], s.mean, s.std, c.reps});
        means.push_back(s.mean);
    }
    out.slopes.push_back(fit_loglog("phi", as_doubles(grid), means));
    return out;
}

Variance run_variance(const ExperimentConfig& c) {
    validate(c);
    const Dataset ds = load_dataset(c.dataset, c.seed);
    std::vector<std::size_t> storage;
    const auto& grid = grid_of(c, storage);
    const auto series = all_series(c);
    const std::size_t per_series = grid.size() * c.reps;
    std::vector<double> est(series.size() * per_series);
    parallel_for(est.size(), c.jobs, [&](std::size_t cell) {
        const auto& s = series[cell / per_series];
        est[cell] = run_series(ds, c, s, grid[(cell % per_series) / c.reps], cell % c.reps);
    });
    Variance out;
    for (std::size_t si = 0; si < series.size(); ++si)
        for (std::size_t ki = 0; ki < grid.size(); ++ki) {
            const auto first = est.begin() + static_cast<std::ptrdiff_t>(si * per_series + ki * c.reps);
            const Summary sum = summarize(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(c.reps)));
            out.rows.push_back({series_label(series[si]), grid[ki], series_n(series[si], grid[ki]), sum.mean, sum.std,
                                c.reps});
        }
    return out;
}

Lloyd run_lloyd(const ExperimentConfig& c) {
    validate(c);
    const Dataset ds = load_dataset(c.dataset, c.seed);
    Lloyd out;
    out.reference = relative_reference(ds, c);
    std::vector<std::size_t> storage;
    const auto& grid = grid_of(c, storage);
    const Series s{"quantized", c.kappas.front()};
    std::vector<std::size_t> settings{0};
    if (c.lloyd_iters > 0) settings.push_back(c.lloyd_iters);

    struct Run {
        double err[2];
        double phi[2];
        bool increased;
    };
    std::vector<Run> runs(grid.size() * c.reps);
    parallel_for(runs.size(), c.jobs, [&](std::size_t cell) {
        const std::size_t k = grid[cell / c.reps];
        const std::size_t rep = cell % c.reps;
        Run r{};
        QuantizedEstimate base;
        for (std::size_t si = 0; si < settings.size(); ++si) {
            Rng rng(cell_seed(c, s, k, rep));
            const QuantizedEstimate q =
                quantized_estimate_detail(ds.samplers.mu, ds.samplers.nu, k, quantized_options(c, s.kappa, settings[si]), rng);
            r.err[si] = relative_error(q.estimate, out.reference);
            r.phi[si] = 0.5 * (q.phi_mu + q.phi_nu);
            if (si == 0) base = q;
            else r.increased = q.phi_mu > base.phi_mu || q.phi_nu > base.phi_nu;
        }
        runs[cell] = r;
    });
    for (std::size_t si = 0; si < settings.size(); ++si) {
        std::vector<double> means;
        for (std::size_t ki = 0; ki < grid.size(); ++ki) {
            std::vector<double> e, p;
            std::size_t increases = 0;
            for (std::size_t rep = 0; rep < c.reps; ++rep) {
                const Run& r = runs[ki * c.reps + rep];
                e.push_back(r.err[si]);
                p.push_back(r.phi[si]);
                if (si > 0 && r.increased) ++increases;
            }
            const Summary se = summarize(e);
            out.rows.push_back({settings[si], grid[ki], oversample_budget(grid[ki], s.kappa), se.mean, se.std,
                                summarize(p).mean, increases, c.reps});
            means.push_back(se.mean);
        }
        out.slopes.push_back(fit_loglog("lloyd=" + std::to_string(settings[si]), as_doubles(grid), means));
    }
    return out;
}

std::string to_csv(const ExperimentConfig& c, const ErrorVsK& r) {
    std::ostringstream o;
    o << metadata(c, " reference=" + fmt(r.reference));
    o << "estimator,seeding,kappa,k,n,mean_rel_err,std,runs\n";
    for (const auto& x : r.rows)
        o << x.estimator << ',' << x.seeding << ',' << (x.kappa > 0 ? fmt(x.kappa) : "") << ',' << x.k << ',' << x.n
          << ',' << fmt(x.mean_rel_err) << ',' << fmt(x.std_rel_err) << ',' << x.runs << '\n';
    write_slopes(o, r.slopes);
    return o.str();
}

std::string to_csv(const ExperimentConfig& c, const CpuTime& r) {
    std::ostringstream o;
    o << metadata(c, " reference=" + fmt(r.reference));
    o << "estimator,seeding,kappa,k,n,mean_rel_err,mean_wall_time_s,runs\n";
    for (const auto& x : r.rows)
        o << x.estimator << ',' << x.seeding << ',' << (x.kappa > 0 ? fmt(x.kappa) : "") << ',' << x.k << ',' << x.n
          << ',' << fmt(x.mean_rel_err) << ',' << fmt(x.mean_wall_time_s) << ',' << x.runs << '\n';
    return o.str();
}

std::string to_csv(const ExperimentConfig& c, const EpsSweep& r) {
    std::ostringstream o;
    o << metadata(c, " reference=" + fmt(r.reference) + " n_mu=" + std::to_string(r.n_mu) +
                         " n_nu=" + std::to_string(r.n_nu));
    o << "method,eps,rep,k_mu,k_nu,estimate,abs_error,bound,iterations,converged,wall_time_s\n";
    for (const auto& x : r.rows)
        o << x.method << ',' << fmt(x.eps) << ',' << x.rep << ',' << x.k_mu << ',' << x.k_nu << ',' << fmt(x.estimate)
          << ',' << fmt(x.abs_error) << ',' << fmt(x.bound) << ',' << x.iterations << ',' << (x.converged ? 1 : 0)
          << ',' << fmt(x.wall_time_s) << '\n';
    return o.str();
}

std::string to_csv(const ExperimentConfig& c, const Qerr& r) {
    std::ostringstream o;
    o << metadata(c, "");
    o << "k,n,mean_phi,std,runs\n";
    for (const auto& x : r.rows)
        o << x.k << ',' << x.n << ',' << fmt(x.mean_phi) << ',' << fmt(x.std_phi) << ',' << x.runs << '\n';
    write_slopes(o, r.slopes);
    return o.str();
}

std::string to_csv(const ExperimentConfig& c, const Variance& r) {
    std::ostringstream o;
    o << metadata(c, "");
    o << "estimator,k,n,mean_estimate,std,runs\n";
    for (const auto& x : r.rows)
        o << x.estimator << ',' << x.k << ',' << x.n << ',' << fmt(x.mean_estimate) << ',' << fmt(x.std_estimate)
          << ',' << x.runs << '\n';
    return o.str();
}

std::string to_csv(const ExperimentConfig& c, const Lloyd& r) {
    std::ostringstream o;
    o << metadata(c, " reference=" + fmt(r.reference));
    o << "lloyd_iters,k,n,mean_rel_err,std,mean_phi,phi_increases,runs\n";
    for (const auto& x : r.rows)
        o << x.lloyd_iters << ',' << x.k << ',' << x.n << ',' << fmt(x.mean_rel_err) << ',' << fmt(x.std_rel_err)
          << ',' << fmt(x.mean_phi) << ',' << x.phi_increases << ',' << x.runs << '\n';
    write_slopes(o, r.slopes);
    return o.str();
}

std::string run_to_csv(const ExperimentConfig& c) {
    switch (c.kind) {
    case Experiment::error_vs_k: return to_csv(c, run_error_vs_k(c));
    case Experiment::cpu_time: return to_csv(c, run_cpu_time(c));
    case Experiment::eps_sweep: return to_csv(c, run_eps_sweep(c));
    case Experiment::qerr: return to_csv(c, run_qerr_vs_k(c));
    case Experiment::variance: return to_csv(c, run_variance(c));
    case Experiment::lloyd: return to_csv(c, run_lloyd(c));
    }
    throw ConfigError("unknown experiment");
}

std::string strip_timing_columns(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    std::vector<bool> keep;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            out << line << '\n';
            continue;
        }
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (!header_seen) {
            header_seen = true;
            for (const auto& f : fields) keep.push_back(!(f.size() >= 2 && f.ends_with("_s")));
        }
        bool first = true;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i < keep.size() && !keep[i]) continue;
            if (!first) out << ',';
            out << fields[i];
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace quantot::bench
