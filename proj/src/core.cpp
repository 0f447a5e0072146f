#include "quantot/core.hpp"

#include "quantot/errors.hpp"
#include "quantot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace quantot {

DiscreteMeasure::DiscreteMeasure(Matrix support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
    if (support_.rows() == 0) throw InputError("discrete measure needs at least one atom");
    if (support_.cols() == 0) throw InputError("discrete measure needs dimension >= 1");
    if (weights_.size() != support_.rows())
        throw InputError("weight count " + std::to_string(weights_.size()) + " does not match support size " +
                         std::to_string(support_.rows()));
    for (double v : support_.values())
        if (!std::isfinite(v)) throw InputError("support coordinates must be finite");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("weights must be finite and nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance)
        throw InputError("weights sum to " + std::to_string(total) + ", expected 1");
}

DiscreteMeasure DiscreteMeasure::uniform(Matrix support) {
    const std::size_t n = support.rows();
    if (n == 0) throw InputError("discrete measure needs at least one atom");
    return DiscreteMeasure(std::move(support), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

std::vector<double> DiscreteMeasure::mean() const {
    std::vector<double> m(dim(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
        const auto x = point(i);
        for (std::size_t t = 0; t < dim(); ++t) m[t] += weights_[i] * x[t];
    }
    return m;
}

CostMatrix::CostMatrix(Matrix entries) : entries_(std::move(entries)) {
    for (double c : entries_.values()) {
        if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("cost entries must be finite and nonnegative");
        max_entry_ = std::max(max_entry_, c);
    }
}

TransportPlan::TransportPlan(Matrix matrix, std::vector<double> row_marginal, std::vector<double> col_marginal,
                             double tolerance)
    : matrix_(std::move(matrix)), row_marginal_(std::move(row_marginal)), col_marginal_(std::move(col_marginal)) {
    if (matrix_.rows() != row_marginal_.size() || matrix_.cols() != col_marginal_.size())
        throw InputError("plan shape does not match its marginals");
    std::vector<double> cols(matrix_.cols(), 0.0);
    for (std::size_t i = 0; i < matrix_.rows(); ++i) {
        double r = 0.0;
        const auto row = matrix_.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (!(row[j] >= 0.0)) throw InputError("plan entries must be nonnegative");
            r += row[j];
            cols[j] += row[j];
        }
        if (std::abs(r - row_marginal_[i]) > tolerance)
            throw InputError("plan row " + std::to_string(i) + " violates its marginal");
    }
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (std::abs(cols[j] - col_marginal_[j]) > tolerance)
            throw InputError("plan column " + std::to_string(j) + " violates its marginal");
}

CostMatrix pairwise_cost(const Matrix& X, const Matrix& Y, double exponent) {
    if (X.cols() != Y.cols())
        throw InputError("cost: dimension mismatch (" + std::to_string(X.cols()) + " vs " +
                         std::to_string(Y.cols()) + ")");
    if (!(exponent > 0.0)) throw InputError("cost exponent must be positive");
    Matrix C(X.rows(), Y.rows());
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < X.rows(); ++i) k.sq_dist_batch(X.row(i).data(), Y.data(), Y.rows(), X.cols(), C.row(i).data());
    if (exponent != 2.0) {
        const double half = exponent / 2.0;
        for (double& c : C.values()) c = std::pow(c, half);
    }
    return CostMatrix(std::move(C));
}

CostMatrix squared_euclidean_cost(const Matrix& X, const Matrix& Y) { return pairwise_cost(X, Y, 2.0); }

Assignment nearest_neighbor_assign(const Matrix& points, const Matrix& centers) {
    if (centers.rows() == 0) throw InputError("nearest-neighbor assignment needs at least one center");
    if (points.cols() != centers.cols()) throw InputError("points and centers differ in dimension");
    const std::size_t n = points.rows();
    Assignment out{std::vector<std::uint32_t>(n, 0), std::vector<double>(n, std::numeric_limits<double>::infinity())};
    const auto& k = kernels::active();
    for (std::size_t l = 0; l < centers.rows(); ++l)
        k.min_update(points.data(), n, points.cols(), centers.row(l).data(), static_cast<std::uint32_t>(l),
                     out.sq_distance.data(), out.index.data());
    return out;
}

std::vector<double> aggregate_weights(std::span<const double> weights, std::span<const std::uint32_t> assignment,
                                      std::size_t num_centers) {
    if (weights.size() != assignment.size()) throw InputError("assignment length does not match weight count");
    std::vector<double> agg(num_centers, 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (assignment[i] >= num_centers) throw InputError("assignment refers to a missing center");
        agg[assignment[i]] += weights[i];
    }
    return agg;
}

DiscreteMeasure pushforward(const DiscreteMeasure& measure, const Matrix& centers) {
    const Assignment a = nearest_neighbor_assign(measure.support(), centers);
    return pushforward(measure, centers, a.index);
}

DiscreteMeasure pushforward(const DiscreteMeasure& measure, const Matrix& centers,
                            std::span<const std::uint32_t> assignment) {
    if (centers.cols() != measure.dim()) throw InputError("centers and measure differ in dimension");
    const std::vector<double> agg = aggregate_weights(measure.weights(), assignment, centers.rows());
    Matrix support;
    std::vector<double> weights;
    for (std::size_t l = 0; l < centers.rows(); ++l) {
        if (agg[l] > 0.0) {
            support.append_row(centers.row(l));
            weights.push_back(agg[l]);
        }
    }
    return DiscreteMeasure(std::move(support), std::move(weights));
}

double transport_cost(const TransportPlan& plan, const CostMatrix& cost) {
    if (plan.rows() != cost.rows() || plan.cols() != cost.cols())
        throw InputError("plan and cost matrix shapes differ");
    double total = 0.0;
    for (std::size_t i = 0; i < plan.rows(); ++i) {
        const auto p = plan.matrix().row(i);
        const auto c = cost.row(i);
        for (std::size_t j = 0; j < p.size(); ++j) total += p[j] * c[j];
    }
    return total;
}

double mean_gap(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim()) throw InputError("measures differ in dimension");
    const auto a = mu.mean();
    const auto b = nu.mean();
    double s = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t) s += (a[t] - b[t]) * (a[t] - b[t]);
    return std::sqrt(s);
}

} // namespace quantot
