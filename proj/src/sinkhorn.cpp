#include "quantot/sinkhorn.hpp"

#include "quantot/errors.hpp"
#include "quantot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>

namespace quantot {
namespace {

void check_shapes(std::span<const double> a, std::span<const double> b, const CostMatrix& cost) {
    if (a.empty() || b.empty()) throw InputError("empty marginal");
    if (cost.rows() != a.size() || cost.cols() != b.size())
        throw InputError("cost matrix shape does not match the marginals");
}

double sum_of(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

ScaledCoupling sinkhorn_scale(std::span<const double> a, std::span<const double> b, const CostMatrix& cost,
                              const SinkhornOptions& options) {
    check_shapes(a, b, cost);
    if (!(options.eta > 0.0) || !std::isfinite(options.eta)) throw InputError("eta must be positive");
    if (!(options.stop_tolerance >= 0.0)) throw InputError("stop tolerance must be nonnegative");
    for (double x : a)
        if (!(x > 0.0)) throw InputError("sinkhorn needs strictly positive row weights");
    for (double x : b)
        if (!(x > 0.0)) throw InputError("sinkhorn needs strictly positive column weights");

    const auto& K = kernels::active();
    const std::size_t n1 = a.size();
    const std::size_t n2 = b.size();
    const double eta = options.eta;
    const double inv_eta = 1.0 / eta;
    const Matrix costT = cost.entries().transposed();

    std::vector<double> log_a(n1), log_b(n2);
    for (std::size_t i = 0; i < n1; ++i) log_a[i] = std::log(a[i]);
    for (std::size_t j = 0; j < n2; ++j) log_b[j] = std::log(b[j]);

    ScaledCoupling out;
    out.f.assign(n1, 0.0);
    out.g.assign(n2, 0.0);
    std::vector<double> f_next(n1);
    if (options.dual_trace) options.dual_trace->clear();

    std::size_t iter = 0;
    double violation = std::numeric_limits<double>::infinity();
    for (;;) {
        // Row pass. Since the columns are exact after the previous column pass,
        // the current row sums are a_i * exp((f_i - f_next_i) / eta).
        violation = 0.0;
        for (std::size_t i = 0; i < n1; ++i) {
            const double lse = K.log_sum_exp(cost.row(i).data(), out.g.data(), inv_eta, n2);
            f_next[i] = eta * (log_a[i] - lse);
            violation += std::abs(a[i] * std::exp((out.f[i] - f_next[i]) * inv_eta) - a[i]);
        }
        if (iter > 0 && violation <= options.stop_tolerance) {
            out.converged = true;
            break;
        }
        if (iter == options.max_iter) break;
        out.f.swap(f_next);
        for (std::size_t j = 0; j < n2; ++j) {
            const double lse = K.log_sum_exp(costT.row(j).data(), out.f.data(), inv_eta, n1);
            out.g[j] = eta * (log_b[j] - lse);
        }
        ++iter;
        if (options.dual_trace) {
            double dual = -eta;
            for (std::size_t i = 0; i < n1; ++i) dual += a[i] * out.f[i];
            for (std::size_t j = 0; j < n2; ++j) dual += b[j] * out.g[j];
            options.dual_trace->push_back(dual);
        }
    }

    for (double x : out.f)
        if (!std::isfinite(x)) throw NumericalError("sinkhorn produced a non-finite potential");
    for (double x : out.g)
        if (!std::isfinite(x)) throw NumericalError("sinkhorn produced a non-finite potential");

    out.iterations = iter;
    out.marginal_violation = violation;
    out.coupling = Matrix(n1, n2);
    for (std::size_t i = 0; i < n1; ++i)
        K.gibbs_row(cost.row(i).data(), out.g.data(), out.f[i], inv_eta, n2, out.coupling.row(i).data());
    return out;
}

Matrix round_to_feasible(const Matrix& coupling, std::span<const double> a, std::span<const double> b) {
    const std::size_t n1 = a.size();
    const std::size_t n2 = b.size();
    if (coupling.rows() != n1 || coupling.cols() != n2) throw InputError("coupling shape does not match marginals");
    for (double x : coupling.values())
        if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("coupling must be nonnegative and finite");

    Matrix P = coupling;
    for (std::size_t i = 0; i < n1; ++i) {
        auto r = P.row(i);
        const double s = std::accumulate(r.begin(), r.end(), 0.0);
        if (s > a[i]) {
            const double scale = a[i] / s;
            for (double& x : r) x *= scale;
        }
    }
    std::vector<double> col(n2, 0.0);
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) col[j] += P(i, j);
    std::vector<double> col_scale(n2, 1.0);
    for (std::size_t j = 0; j < n2; ++j)
        if (col[j] > b[j]) col_scale[j] = b[j] / col[j];
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) P(i, j) *= col_scale[j];

    std::vector<double> err_r(n1), err_c(n2);
    for (std::size_t i = 0; i < n1; ++i) {
        auto r = P.row(i);
        err_r[i] = std::max(a[i] - std::accumulate(r.begin(), r.end(), 0.0), 0.0);
    }
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j) col[j] += P(i, j);
    for (std::size_t j = 0; j < n2; ++j) err_c[j] = std::max(b[j] - col[j], 0.0);

    const double mass = sum_of(err_r);
    if (mass > 0.0) {
        for (std::size_t i = 0; i < n1; ++i) {
            if (err_r[i] == 0.0) continue;
            const double s = err_r[i] / mass;
            for (std::size_t j = 0; j < n2; ++j) P(i, j) += s * err_c[j];
        }
    }
    return P;
}

ApproxSolveReport approx_solve(std::span<const double> a, std::span<const double> b, const CostMatrix& cost,
                               double eps, std::size_t max_iter) {
    check_shapes(a, b, cost);
    if (!(eps > 0.0) || !std::isfinite(eps)) throw InputError("approx_solve needs eps > 0");
    for (std::span<const double> w : {a, b}) {
        for (double x : w)
            if (!(x >= 0.0)) throw InputError("negative weight");
        if (std::abs(sum_of(w) - 1.0) > kWeightSumTolerance) throw InputError("weights must sum to 1");
    }

    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > 0.0) rows.push_back(i);
    for (std::size_t j = 0; j < b.size(); ++j)
        if (b[j] > 0.0) cols.push_back(j);
    std::vector<double> sa(rows.size()), sb(cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) sa[i] = a[rows[i]];
    for (std::size_t j = 0; j < cols.size(); ++j) sb[j] = b[cols[j]];
    const bool pruned = rows.size() != a.size() || cols.size() != b.size();
    Matrix sub;
    if (pruned) {
        sub = Matrix(rows.size(), cols.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) sub(i, j) = cost(rows[i], cols[j]);
    }
    std::optional<CostMatrix> pruned_cost;
    if (pruned) pruned_cost.emplace(std::move(sub));
    const CostMatrix& C = pruned ? *pruned_cost : cost;

    ApproxSolveReport report;
    report.epsilon = eps;
    const std::size_t n = std::max<std::size_t>({sa.size(), sb.size(), 2});
    report.eta = std::max(eps / (4.0 * std::log(static_cast<double>(n))), kMinEta);
    report.stop_tolerance = C.max_entry() > 0.0 ? eps / (8.0 * C.max_entry()) : std::numeric_limits<double>::infinity();

    Matrix rounded;
    if (C.max_entry() == 0.0) {
        // every coupling is optimal
        rounded = Matrix(sa.size(), sb.size());
        for (std::size_t i = 0; i < sa.size(); ++i)
            for (std::size_t j = 0; j < sb.size(); ++j) rounded(i, j) = sa[i] * sb[j];
        report.converged = true;
    } else {
        SinkhornOptions opt;
        opt.eta = report.eta;
        opt.stop_tolerance = report.stop_tolerance;
        opt.max_iter = max_iter;
        ScaledCoupling sc = sinkhorn_scale(sa, sb, C, opt);
        report.iterations = sc.iterations;
        report.converged = sc.converged;
        report.marginal_violation = sc.marginal_violation;
        rounded = round_to_feasible(sc.coupling, sa, sb);
    }

    double total = 0.0;
    for (std::size_t i = 0; i < rounded.rows(); ++i)
        for (std::size_t j = 0; j < rounded.cols(); ++j) total += rounded(i, j) * C(i, j);
    report.cost = total;

    if (pruned) {
        report.plan = Matrix(a.size(), b.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) report.plan(rows[i], cols[j]) = rounded(i, j);
    } else {
        report.plan = std::move(rounded);
    }
    return report;
}

} // namespace quantot
