#include "quantot/quantize.hpp"

#include "quantot/errors.hpp"
#include "quantot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace quantot {
namespace {

void check_k(const DiscreteMeasure& measure, std::size_t k) {
    if (k == 0) throw InputError("quantization needs k >= 1");
    if (k > measure.size())
        throw InputError("k = " + std::to_string(k) + " exceeds the number of atoms " + std::to_string(measure.size()));
}

// Index drawn with probability mass[i] / total. Falls back to the last index
// with positive mass when rounding pushes the draw past the end.
std::size_t draw_proportional(std::span<const double> mass, double total, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0.0;
    std::size_t last_positive = mass.size();
    for (std::size_t i = 0; i < mass.size(); ++i) {
        if (mass[i] <= 0.0) continue;
        acc += mass[i];
        last_positive = i;
        if (acc > u) return i;
    }
    return last_positive;
}

std::size_t draw_by_weight(const DiscreteMeasure& measure, Rng& rng) {
    const auto w = measure.weights();
    return draw_proportional(w, std::accumulate(w.begin(), w.end(), 0.0), rng);
}

// Uniform draw among atoms that no center covers yet; n when all are covered.
std::size_t draw_uncovered(std::span<const double> dist, Rng& rng) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < dist.size(); ++i)
        if (dist[i] > 0.0) open.push_back(i);
    if (open.empty()) return dist.size();
    return open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
}

// Incremental D^2 bookkeeping shared by the seeders.
struct SeedState {
    const DiscreteMeasure& measure;
    Matrix centers;
    std::vector<double> dist;
    std::vector<std::uint32_t> label;

    explicit SeedState(const DiscreteMeasure& m)
        : measure(m), centers(0, m.dim()), dist(m.size(), std::numeric_limits<double>::infinity()),
          label(m.size(), 0) {}

    void add(std::size_t atom) {
        const auto id = static_cast<std::uint32_t>(centers.rows());
        centers.append_row(measure.point(atom));
        kernels::active().min_update(measure.support().data(), measure.size(), measure.dim(),
                                     centers.row(id).data(), id, dist.data(), label.data());
    }

    double weighted_mass(std::vector<double>& mass) const {
        const auto w = measure.weights();
        mass.resize(w.size());
        double total = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            mass[i] = w[i] * dist[i];
            total += mass[i];
        }
        return total;
    }

    QuantizationResult finish() && {
        QuantizationResult r;
        r.aggregated_weights = aggregate_weights(measure.weights(), label, centers.rows());
        r.error = 0.0;
        const auto w = measure.weights();
        for (std::size_t i = 0; i < w.size(); ++i) r.error += w[i] * dist[i];
        r.centers = std::move(centers);
        r.assignments = std::move(label);
        return r;
    }
};

double distance_to_centers(const Matrix& centers, std::span<const double> x, std::vector<double>& scratch) {
    scratch.resize(centers.rows());
    kernels::active().sq_dist_batch(x.data(), centers.data(), centers.rows(), centers.cols(), scratch.data());
    return *std::min_element(scratch.begin(), scratch.end());
}

double cluster_sse(const DiscreteMeasure& measure, std::span<const std::size_t> members) {
    const std::size_t d = measure.dim();
    double wsum = 0.0;
    std::vector<double> centroid(d, 0.0);
    for (std::size_t i : members) {
        const double w = measure.weights()[i];
        wsum += w;
        for (std::size_t t = 0; t < d; ++t) centroid[t] += w * measure.point(i)[t];
    }
    if (wsum <= 0.0) return 0.0;
    for (double& c : centroid) c /= wsum;
    double sse = 0.0;
    for (std::size_t i : members) {
        double s = 0.0;
        for (std::size_t t = 0; t < d; ++t) {
            const double diff = measure.point(i)[t] - centroid[t];
            s += diff * diff;
        }
        sse += measure.weights()[i] * s;
    }
    return sse;
}

} // namespace

DiscreteMeasure QuantizationResult::measure() const {
    Matrix support(0, centers.cols());
    std::vector<double> weights;
    for (std::size_t l = 0; l < centers.rows(); ++l) {
        if (aggregated_weights[l] > 0.0) {
            support.append_row(centers.row(l));
            weights.push_back(aggregated_weights[l]);
        }
    }
    return DiscreteMeasure(std::move(support), std::move(weights));
}

QuantizationResult kmeanspp_seed(const DiscreteMeasure& measure, std::size_t k, Rng& rng) {
    check_k(measure, k);
    SeedState state(measure);
    state.add(draw_by_weight(measure, rng));
    std::vector<double> mass;
    while (state.centers.rows() < k) {
        const double total = state.weighted_mass(mass);
        std::size_t next;
        if (total > 0.0) {
            next = draw_proportional(mass, total, rng);
        } else {
            next = draw_uncovered(state.dist, rng);
            if (next == measure.size()) break;
        }
        state.add(next);
    }
    return std::move(state).finish();
}

QuantizationResult afk_mc2_seed(const DiscreteMeasure& measure, std::size_t k, std::size_t chain_length, Rng& rng) {
    check_k(measure, k);
    if (chain_length == 0) throw InputError("AFK-MC2 chain length must be >= 1");
    const auto w = measure.weights();
    const std::size_t n = measure.size();

    Matrix centers(0, measure.dim());
    centers.append_row(measure.point(draw_by_weight(measure, rng)));

    // Proposal built once from the distances to the first center.
    std::vector<double> first_dist(n);
    kernels::active().sq_dist_batch(centers.row(0).data(), measure.support().data(), n, measure.dim(),
                                    first_dist.data());
    double phi1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) phi1 += w[i] * first_dist[i];
    std::vector<double> q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = phi1 > 0.0 ? 0.5 * w[i] + 0.5 * w[i] * first_dist[i] / phi1 : w[i];
    std::discrete_distribution<std::size_t> proposal(q.begin(), q.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> scratch;
    while (centers.rows() < k) {
        std::size_t x = proposal(rng);
        double px = w[x] * distance_to_centers(centers, measure.point(x), scratch);
        for (std::size_t step = 1; step < chain_length; ++step) {
            const std::size_t y = proposal(rng);
            const double py = w[y] * distance_to_centers(centers, measure.point(y), scratch);
            if (py <= 0.0) continue;
            if (px <= 0.0 || py * q[x] > unit(rng) * px * q[y]) {
                x = y;
                px = py;
            }
        }
        if (px <= 0.0) {
            // The chain never left covered atoms: resolve with one exact pass.
            const Assignment a = nearest_neighbor_assign(measure.support(), centers);
            std::vector<double> mass(n);
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += (mass[i] = w[i] * a.sq_distance[i]);
            if (total > 0.0) {
                x = draw_proportional(mass, total, rng);
            } else {
                x = draw_uncovered(a.sq_distance, rng);
                if (x == n) break;
            }
        }
        centers.append_row(measure.point(x));
    }

    Assignment a = nearest_neighbor_assign(measure.support(), centers);
    QuantizationResult r;
    r.aggregated_weights = aggregate_weights(w, a.index, centers.rows());
    for (std::size_t i = 0; i < n; ++i) r.error += w[i] * a.sq_distance[i];
    r.centers = std::move(centers);
    r.assignments = std::move(a.index);
    return r;
}

QuantizationResult lloyd_refine(const DiscreteMeasure& measure, QuantizationResult result, std::size_t max_iter) {
    if (max_iter == 0) return result;
    if (result.assignments.size() != measure.size() || result.centers.cols() != measure.dim())
        throw InputError("quantization result does not belong to this measure");
    const auto w = measure.weights();
    const std::size_t d = measure.dim();
    for (std::size_t it = 0; it < max_iter; ++it) {
        Matrix centers(result.centers.rows(), d, 0.0);
        std::vector<double> mass(result.centers.rows(), 0.0);
        for (std::size_t i = 0; i < measure.size(); ++i) {
            const auto l = result.assignments[i];
            mass[l] += w[i];
            for (std::size_t t = 0; t < d; ++t) centers(l, t) += w[i] * measure.point(i)[t];
        }
        for (std::size_t l = 0; l < centers.rows(); ++l) {
            if (mass[l] > 0.0) {
                for (std::size_t t = 0; t < d; ++t) centers(l, t) /= mass[l];
            } else {
                std::copy_n(result.centers.row(l).begin(), d, centers.row(l).begin());
            }
        }
        Assignment a = nearest_neighbor_assign(measure.support(), centers);
        double error = 0.0;
        for (std::size_t i = 0; i < measure.size(); ++i) error += w[i] * a.sq_distance[i];
        if (error > result.error) break; // only rounding can get here
        const bool changed = a.index != result.assignments;
        result.aggregated_weights = aggregate_weights(w, a.index, centers.rows());
        result.centers = std::move(centers);
        result.assignments = std::move(a.index);
        result.error = error;
        if (!changed) break;
    }
    return result;
}

double quantization_error(const DiscreteMeasure& measure, const Matrix& centers) {
    const Assignment a = nearest_neighbor_assign(measure.support(), centers);
    double e = 0.0;
    for (std::size_t i = 0; i < measure.size(); ++i) e += measure.weights()[i] * a.sq_distance[i];
    return e;
}

QuantizationResult quantize_to_precision(const DiscreteMeasure& measure, double eps, Rng& rng, double exponent) {
    if (!(eps > 0.0)) throw InputError("target precision must be positive");
    if (!(exponent > 0.0)) throw InputError("cost exponent must be positive");
    const double threshold = std::pow(eps, exponent);
    const double half = exponent / 2.0;
    const auto w = measure.weights();

    SeedState state(measure);
    state.add(draw_by_weight(measure, rng));
    std::vector<double> D(measure.size());
    double total = 0.0;
    for (;;) {
        total = 0.0;
        for (std::size_t i = 0; i < D.size(); ++i) {
            D[i] = w[i] * (exponent == 2.0 ? state.dist[i] : std::pow(state.dist[i], half));
            total += D[i];
        }
        if (total <= threshold) break;
        const auto far = static_cast<std::size_t>(std::max_element(D.begin(), D.end()) - D.begin());
        if (D[far] <= 0.0) break;
        state.add(far);
    }
    QuantizationResult r = std::move(state).finish();
    r.error = total;
    return r;
}

double optimal_quantization_1d(const DiscreteMeasure& measure, std::size_t k) {
    check_k(measure, k);
    if (measure.dim() != 1) throw InputError("the interval dynamic program needs d = 1");
    const std::size_t n = measure.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return measure.point(a)[0] < measure.point(b)[0]; });

    // sse[i][j]: atoms order[i..j) in one cluster.
    std::vector<std::vector<double>> sse(n + 1, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j <= n; ++j)
            sse[i][j] = cluster_sse(measure, std::span<const std::size_t>(order.data() + i, j - i));

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(n + 1, inf), cur(n + 1, inf);
    for (std::size_t j = 1; j <= n; ++j) prev[j] = sse[0][j];
    for (std::size_t c = 2; c <= k; ++c) {
        std::fill(cur.begin(), cur.end(), inf);
        for (std::size_t j = c; j <= n; ++j)
            for (std::size_t i = c - 1; i < j; ++i) cur[j] = std::min(cur[j], prev[i] + sse[i][j]);
        std::swap(prev, cur);
    }
    return prev[n];
}

double optimal_quantization_partitions(const DiscreteMeasure& measure, std::size_t k) {
    check_k(measure, k);
    const std::size_t n = measure.size();
    double combos = std::pow(static_cast<double>(k), static_cast<double>(n));
    if (combos > 2e7) throw InputError("too many partitions to enumerate (k^n > 2e7)");
    std::vector<std::uint32_t> label(n, 0);
    std::vector<std::vector<std::size_t>> members(k);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        for (auto& m : members) m.clear();
        for (std::size_t i = 0; i < n; ++i) members[label[i]].push_back(i);
        double total = 0.0;
        for (const auto& m : members) total += cluster_sse(measure, m);
        best = std::min(best, total);
        // odometer; the first atom is pinned to label 0 by symmetry
        std::size_t pos = 1;
        while (pos < n && ++label[pos] == k) label[pos++] = 0;
        if (pos >= n) break;
    }
    return best;
}

double optimal_quantization_subsets(const DiscreteMeasure& measure, std::size_t k) {
    check_k(measure, k);
    const std::size_t n = measure.size();
    if (n > 15) throw InputError("subset enumeration is limited to n <= 15");
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
    double best = std::numeric_limits<double>::infinity();
    do {
        Matrix centers(0, measure.dim());
        for (std::size_t i = 0; i < n; ++i)
            if (pick[i]) centers.append_row(measure.point(i));
        best = std::min(best, quantization_error(measure, centers));
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

double optimal_quantization_bruteforce(const DiscreteMeasure& measure, std::size_t k) {
    check_k(measure, k);
    if (k == measure.size()) return 0.0;
    if (measure.dim() == 1) return optimal_quantization_1d(measure, k);
    if (std::pow(static_cast<double>(k), static_cast<double>(measure.size())) <= 2e7)
        return optimal_quantization_partitions(measure, k);
    if (measure.size() <= 15) return optimal_quantization_subsets(measure, k);
    throw InputError("instance too large for the brute-force quantization oracle");
}

} // namespace quantot
