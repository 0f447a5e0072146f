#pragma once

// Experiment runners behind the qot-bench CLI. Each runner returns typed rows;
// to_csv renders them with a metadata comment line, a header row and trailing
// "# slope" comments where a log-log fit applies.

#include "quantot/datasets.hpp"
#include "quantot/estimators.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace quantot::bench {

inline constexpr const char* kVersion = "0.1.0";

// Above this many cost entries the full-cloud exact reference is refused.
inline constexpr double kMaxReferenceEntries = 2.5e7;

enum class Experiment { error_vs_k, cpu_time, eps_sweep, qerr, variance, lloyd };

const char* experiment_name(Experiment e);
Experiment parse_experiment(std::string_view name);

struct ExperimentConfig {
    Experiment kind = Experiment::error_vs_k;
    std::string dataset = "gaussian:d=5,tau=1e-4";
    std::vector<std::size_t> k_grid; // empty: 9 log-spaced values from 8 to 128
    std::vector<double> eps_grid;
    std::vector<double> kappas{1.0};
    Seeding seeding = Seeding::kmeanspp;
    std::size_t chain_length = kDefaultChainLength;
    std::size_t lloyd_iters = 0;
    std::size_t reps = 10;
    std::uint64_t seed = 0;
    std::string out;       // empty or "-": stdout
    std::size_t jobs = 1;
    bool pin_timing = false; // run timing experiments on one worker
    std::string cache_dir;   // where full-cloud references are cached; empty disables
};

std::vector<std::size_t> default_k_grid();

// Throws ConfigError on an unusable configuration.
void validate(const ExperimentConfig& config);

// FNV-1a over every field that influences the error columns.
std::uint64_t config_hash(const ExperimentConfig& config);

// Parsed dataset spec "name:key=value,...". Names:
//   gaussian  d, tau, [n]          N(0, tau I) vs N(1, tau I); with n: frozen clouds of n points
//   hypercube d                    fragmented hypercube
//   dirac     d
//   mixtures  m, d, tau, n, [seed] frozen mixture clouds
//   grid      side                 the uniform grid against itself
//   csv       mu, nu, [standardize], [weight]
//   pgm       mu, nu
// Frozen clouds are drawn from `seed`; samplers then draw their atoms.
struct Dataset {
    std::string descriptor;
    SamplerPair samplers;
    std::optional<DiscreteMeasure> mu_cloud;
    std::optional<DiscreteMeasure> nu_cloud;

    bool discrete() const noexcept { return mu_cloud.has_value(); }
};

Dataset load_dataset(const std::string& spec, std::uint64_t seed);

// Closed-form reference when the samplers carry one, otherwise the exact W2
// between the frozen clouds (cached in cache_dir when set).
double reference_distance(const Dataset& dataset, const std::string& cache_dir);

struct Slope {
    std::string series;
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t points = 0;
};

// OLS of ln(err) on ln(k) over grid indices >= size/2. NaN when any error in
// that range is not positive or fewer than two points remain; the standard
// error is NaN below three points.
Slope fit_loglog(std::string series, const std::vector<double>& k, const std::vector<double>& err);

struct Summary {
    double mean = 0.0;
    double std = 0.0; // sample convention (n - 1); 0 for a single run
};
Summary summarize(const std::vector<double>& values);

struct ErrorRow {
    std::string estimator; // plugin | quantized
    std::string seeding;   // "-" for plugin
    double kappa = 0.0;    // 0 for plugin
    std::size_t k = 0;
    std::size_t n = 0;
    double mean_rel_err = 0.0;
    double std_rel_err = 0.0;
    std::size_t runs = 0;
};

struct ErrorVsK {
    double reference = 0.0;
    std::vector<ErrorRow> rows;
    std::vector<Slope> slopes;
};

struct TimeRow {
    std::string estimator;
    std::string seeding;
    double kappa = 0.0;
    std::size_t k = 0;
    std::size_t n = 0;
    double mean_rel_err = 0.0;
    double mean_wall_time_s = 0.0;
    std::size_t runs = 0;
};

struct CpuTime {
    double reference = 0.0;
    std::vector<TimeRow> rows;
};

struct EpsRow {
    std::string method; // quantized | approx
    double eps = 0.0;
    std::size_t rep = 0;
    std::size_t k_mu = 0;
    std::size_t k_nu = 0;
    double estimate = 0.0;
    double abs_error = 0.0;
    double bound = 0.0; // 3 eps
    std::size_t iterations = 0;
    bool converged = false;
    double wall_time_s = 0.0;
};

struct EpsSweep {
    double reference = 0.0;
    std::size_t n_mu = 0;
    std::size_t n_nu = 0;
    std::vector<EpsRow> rows;
};

struct QerrRow {
    std::size_t k = 0;
    std::size_t n = 0;
    double mean_phi = 0.0;
    double std_phi = 0.0;
    std::size_t runs = 0;
};

struct Qerr {
    std::vector<QerrRow> rows;
    std::vector<Slope> slopes;
};

struct VarianceRow {
    std::string estimator;
    std::size_t k = 0;
    std::size_t n = 0;
    double mean_estimate = 0.0;
    double std_estimate = 0.0;
    std::size_t runs = 0;
};

struct Variance {
    std::vector<VarianceRow> rows;
};

struct LloydRow {
    std::size_t lloyd_iters = 0;
    std::size_t k = 0;
    std::size_t n = 0;
    double mean_rel_err = 0.0;
    double std_rel_err = 0.0;
    double mean_phi = 0.0;     // average of both sides' quantization error
    std::size_t phi_increases = 0; // runs where refinement raised phi on either side
    std::size_t runs = 0;
};

struct Lloyd {
    double reference = 0.0;
    std::vector<LloydRow> rows;
    std::vector<Slope> slopes;
};

ErrorVsK run_error_vs_k(const ExperimentConfig& config);
CpuTime run_cpu_time(const ExperimentConfig& config);
EpsSweep run_eps_sweep(const ExperimentConfig& config);
Qerr run_qerr_vs_k(const ExperimentConfig& config);
Variance run_variance(const ExperimentConfig& config);
Lloyd run_lloyd(const ExperimentConfig& config);

std::string to_csv(const ExperimentConfig& config, const ErrorVsK& r);
std::string to_csv(const ExperimentConfig& config, const CpuTime& r);
std::string to_csv(const ExperimentConfig& config, const EpsSweep& r);
std::string to_csv(const ExperimentConfig& config, const Qerr& r);
std::string to_csv(const ExperimentConfig& config, const Variance& r);
std::string to_csv(const ExperimentConfig& config, const Lloyd& r);

// Validate, dispatch on config.kind and render.
std::string run_to_csv(const ExperimentConfig& config);

// Drops every column whose header ends in "_s" (wall times) so two CSVs can be
// compared on their deterministic content.
std::string strip_timing_columns(const std::string& csv);

} // namespace quantot::bench
