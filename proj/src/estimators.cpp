#include "quantot/estimators.hpp"

#include "quantot/errors.hpp"
#include "quantot/exact_ot.hpp"

#include <algorithm>
#include <cmath>

namespace quantot {

Matrix Sampler::sample(std::size_t count, Rng& rng) const {
    if (!draw) throw InputError("sampler '" + descriptor + "' has no draw function");
    Matrix m = draw(count, rng);
    if (m.rows() != count || m.cols() != dim)
        throw InputError("sampler '" + descriptor + "' returned a cloud of the wrong shape");
    return m;
}

std::size_t oversample_budget(std::size_t k, double kappa) {
    if (k == 0) throw InputError("k must be >= 1");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw InputError("kappa must lie in (0, 1]");
    const double kd = static_cast<double>(k);
    const double n = std::ceil(kappa * kd * kd * std::log(kd));
    return std::max(k, static_cast<std::size_t>(n));
}

double plugin_estimate(const Sampler& mu, const Sampler& nu, std::size_t k, Rng& rng) {
    if (k == 0) throw InputError("k must be >= 1");
    if (mu.dim != nu.dim) throw InputError("samplers disagree on dimension");
    Matrix X = mu.sample(k, rng);
    Matrix Y = nu.sample(k, rng);
    return w2_distance(DiscreteMeasure::uniform(std::move(X)), DiscreteMeasure::uniform(std::move(Y)));
}

const char* seeding_name(Seeding s) { return s == Seeding::kmeanspp ? "kmeanspp" : "afkmc2"; }

Seeding parse_seeding(const std::string& name) {
    if (name == "kmeanspp" || name == "kmeans++") return Seeding::kmeanspp;
    if (name == "afkmc2" || name == "afk-mc2") return Seeding::afkmc2;
    throw InputError("unknown seeding '" + name + "' (expected kmeanspp or afkmc2)");
}

namespace {

QuantizationResult seed(const DiscreteMeasure& m, std::size_t k, const QuantizedOptions& o, Rng& rng) {
    QuantizationResult r = o.seeding == Seeding::kmeanspp ? kmeanspp_seed(m, k, rng)
                                                          : afk_mc2_seed(m, k, o.chain_length, rng);
    return lloyd_refine(m, std::move(r), o.lloyd_iters);
}

} // namespace

QuantizedEstimate quantized_estimate_detail(const Sampler& mu, const Sampler& nu, std::size_t k,
                                            const QuantizedOptions& options, Rng& rng) {
    if (mu.dim != nu.dim) throw InputError("samplers disagree on dimension");
    QuantizedEstimate out;
    out.n = oversample_budget(k, options.kappa);
    if (out.n == k) {
        out.estimate = plugin_estimate(mu, nu, k, rng);
        out.k_mu = out.k_nu = k;
        return out;
    }
    const DiscreteMeasure X = DiscreteMeasure::uniform(mu.sample(out.n, rng));
    const DiscreteMeasure Y = DiscreteMeasure::uniform(nu.sample(out.n, rng));
    const QuantizationResult qx = seed(X, k, options, rng);
    const QuantizationResult qy = seed(Y, k, options, rng);
    const DiscreteMeasure px = qx.measure();
    const DiscreteMeasure py = qy.measure();
    out.k_mu = px.size();
    out.k_nu = py.size();
    out.phi_mu = qx.error;
    out.phi_nu = qy.error;
    out.estimate = w2_distance(px, py);
    return out;
}

double quantized_estimate(const Sampler& mu, const Sampler& nu, std::size_t k, const QuantizedOptions& options,
                          Rng& rng) {
    return quantized_estimate_detail(mu, nu, k, options, rng).estimate;
}

double cost_precision_for_distance(double eps, double gap) {
    if (!(eps > 0.0)) throw InputError("eps must be positive");
    gap = std::max(gap, 0.0);
    // sqrt(L) - sqrt(L - delta) <= eps holds for every L >= gap^2 exactly when
    // delta <= eps (2 gap - eps), and for every L >= 0 when delta <= eps^2.
    return gap <= eps ? eps * eps : eps * (2.0 * gap - eps);
}

namespace {

EpsEstimate solve_between(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps, std::size_t max_iter,
                          EpsEstimate out) {
    out.cost_precision = cost_precision_for_distance(eps, mean_gap(mu, nu));
    const CostMatrix C = squared_euclidean_cost(mu.support(), nu.support());
    out.solve = approx_solve(mu.weights(), nu.weights(), C, out.cost_precision, max_iter);
    out.estimate = std::sqrt(std::max(out.solve.cost, 0.0));
    return out;
}

} // namespace

EpsEstimate quantized_eps_estimate(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps, Rng& rng,
                                   std::size_t max_iter) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("eps must be positive");
    if (mu.dim() != nu.dim()) throw InputError("measures disagree on dimension");
    const QuantizationResult s = quantize_to_precision(mu, eps, rng);
    const QuantizationResult t = quantize_to_precision(nu, eps, rng);
    const DiscreteMeasure ps = s.measure();
    const DiscreteMeasure pt = t.measure();
    EpsEstimate out;
    out.k_mu = ps.size();
    out.k_nu = pt.size();
    out.qerr_mu = s.error;
    out.qerr_nu = t.error;
    return solve_between(ps, pt, eps, max_iter, std::move(out));
}

EpsEstimate approx_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double eps, std::size_t max_iter) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("eps must be positive");
    if (mu.dim() != nu.dim()) throw InputError("measures disagree on dimension");
    EpsEstimate out;
    out.k_mu = mu.size();
    out.k_nu = nu.size();
    return solve_between(mu, nu, eps, max_iter, std::move(out));
}

} // namespace quantot
