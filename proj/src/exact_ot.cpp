#include "quantot/exact_ot.hpp"

#include "quantot/errors.hpp"
#include "quantot/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

namespace quantot {
namespace {

using Node = std::int32_t;
using Arc = std::int64_t;

constexpr std::int8_t kStateTree = 0;
constexpr std::int8_t kStateLower = 1;

// Primal network simplex specialised to the uncapacitated transportation
// problem. Real arcs i -> j are implicit: arc e = i * n2 + j, so the cost of
// arc e is entry e of the row-major cost matrix. Each node also owns an
// artificial arc to/from the root that seeds the initial spanning tree.
//
// Tree bookkeeping (parent/pred/thread/rev_thread/succ_num/last_succ) and the
// leaving-arc rule follow the classic LEMON formulation; ties on the leaving
// arc are broken so the tree stays strongly feasible, which rules out cycling.
class TransportSimplex {
public:
    TransportSimplex(std::span<const double> a, std::span<const double> b, const CostMatrix& cost)
        : n1_(static_cast<Node>(a.size())), n2_(static_cast<Node>(b.size())), cost_(cost),
          arc_num_(static_cast<Arc>(a.size()) * static_cast<Arc>(b.size())), node_num_(n1_ + n2_),
          root_(node_num_), kernels_(kernels::active()) {
        const std::size_t all_nodes = static_cast<std::size_t>(node_num_) + 1;
        supply_.assign(all_nodes, 0.0);
        pi_.assign(all_nodes, 0.0);
        parent_.assign(all_nodes, -1);
        pred_.assign(all_nodes, -1);
        thread_.assign(all_nodes, 0);
        rev_thread_.assign(all_nodes, 0);
        succ_num_.assign(all_nodes, 0);
        last_succ_.assign(all_nodes, 0);
        forward_.assign(all_nodes, 0);
        flow_.assign(static_cast<std::size_t>(arc_num_ + node_num_), 0.0);
        state_.assign(static_cast<std::size_t>(arc_num_ + node_num_), kStateLower);
        art_source_.assign(static_cast<std::size_t>(node_num_), 0);
        art_target_.assign(static_cast<std::size_t>(node_num_), 0);
        art_cost_.assign(static_cast<std::size_t>(node_num_), 0.0);
        for (Node i = 0; i < n1_; ++i) supply_[i] = a[i];
        for (Node j = 0; j < n2_; ++j) supply_[n1_ + j] = -b[j];
    }

    std::size_t run() {
        init_tree();
        initial_pivots();
        std::size_t pivots = 0;
        while (find_entering_arc()) {
            pivot();
            ++pivots;
        }
        for (Node u = 0; u < node_num_; ++u) {
            const double f = flow_[static_cast<std::size_t>(arc_num_ + u)];
            if (std::abs(f) > 1e-9)
                throw NumericalError("network simplex left " + std::to_string(f) + " units on an artificial arc");
        }
        return pivots;
    }

    double flow(Node i, Node j) const { return flow_[static_cast<std::size_t>(Arc(i) * n2_ + j)]; }
    double potential(Node u) const { return pi_[u]; }

private:
    Node source(Arc e) const { return e < arc_num_ ? static_cast<Node>(e / n2_) : art_source_[e - arc_num_]; }
    Node target(Arc e) const {
        return e < arc_num_ ? static_cast<Node>(n1_ + e % n2_) : art_target_[e - arc_num_];
    }
    double cost(Arc e) const { return e < arc_num_ ? cost_.entries().data()[e] : art_cost_[e - arc_num_]; }

    void init_tree() {
        double art = 0.0;
        for (double c : cost_.entries().values()) art = std::max(art, c);
        art = (art + 1.0) * static_cast<double>(node_num_);

        parent_[root_] = -1;
        pred_[root_] = -1;
        thread_[root_] = 0;
        rev_thread_[0] = root_;
        succ_num_[root_] = node_num_ + 1;
        last_succ_[root_] = root_ - 1;
        supply_[root_] = 0.0;
        pi_[root_] = 0.0;

        for (Node u = 0; u < node_num_; ++u) {
            const Arc e = arc_num_ + u;
            parent_[u] = root_;
            pred_[u] = e;
            thread_[u] = u + 1;
            rev_thread_[u + 1] = u;
            succ_num_[u] = 1;
            last_succ_[u] = u;
            state_[e] = kStateTree;
            if (supply_[u] >= 0.0) {
                forward_[u] = 1;
                pi_[u] = 0.0;
                art_source_[u] = u;
                art_target_[u] = root_;
                flow_[e] = supply_[u];
                art_cost_[u] = 0.0;
            } else {
                forward_[u] = 0;
                pi_[u] = art;
                art_source_[u] = root_;
                art_target_[u] = u;
                flow_[e] = -supply_[u];
                art_cost_[u] = art;
            }
        }
        block_size_ = std::max<Arc>(static_cast<Arc>(std::sqrt(static_cast<double>(arc_num_))), 10);
        next_arc_ = 0;
    }

    double reduced_cost(Arc e) const { return state_[e] * (cost(e) + pi_[source(e)] - pi_[target(e)]); }

    // Cheapest incoming arc of every demand node, pivoted in up front.
    void initial_pivots() {
        for (Node j = 0; j < n2_; ++j) {
            Arc best = -1;
            double best_cost = std::numeric_limits<double>::infinity();
            for (Node i = 0; i < n1_; ++i) {
                const double c = cost_(i, j);
                if (c < best_cost) {
                    best_cost = c;
                    best = Arc(i) * n2_ + j;
                }
            }
            if (best < 0) continue;
            if (reduced_cost(best) >= 0.0) continue;
            in_arc_ = best;
            pivot();
        }
    }

    bool find_entering_arc() {
        double best = -kPricingTolerance;
        Arc best_arc = -1;
        Arc e = next_arc_;
        Arc remaining = arc_num_;
        Arc block_left = block_size_;
        const double* costs = cost_.entries().data();
        while (remaining > 0) {
            const Node i = static_cast<Node>(e / n2_);
            const Node j = static_cast<Node>(e % n2_);
            const Arc len = std::min({Arc(n2_ - j), remaining, block_left});
            const auto r = kernels_.min_reduced_cost(costs + e, state_.data() + e, pi_[i], pi_.data() + n1_ + j,
                                                     static_cast<std::size_t>(len));
            if (r.value < best) {
                best = r.value;
                best_arc = e + static_cast<Arc>(r.index);
            }
            e += len;
            if (e == arc_num_) e = 0;
            remaining -= len;
            block_left -= len;
            if (block_left == 0) {
                if (best_arc >= 0) break;
                block_left = block_size_;
            }
        }
        if (best_arc < 0) return false;
        in_arc_ = best_arc;
        next_arc_ = e;
        return true;
    }

    void pivot() {
        find_join_node();
        const bool change = find_leaving_arc();
        if (delta_ == std::numeric_limits<double>::infinity())
            throw NumericalError("network simplex found an unbounded direction");
        change_flow(change);
        if (change) {
            update_tree_structure();
            update_potential();
        }
    }

    void find_join_node() {
        Node u = source(in_arc_);
        Node v = target(in_arc_);
        while (u != v) {
            if (succ_num_[u] < succ_num_[v])
                u = parent_[u];
            else
                v = parent_[v];
        }
        join_ = u;
    }

    bool find_leaving_arc() {
        if (state_[in_arc_] == kStateLower) {
            first_ = source(in_arc_);
            second_ = target(in_arc_);
        } else {
            first_ = target(in_arc_);
            second_ = source(in_arc_);
        }
        const double inf = std::numeric_limits<double>::infinity();
        delta_ = inf;
        int result = 0;
        for (Node u = first_; u != join_; u = parent_[u]) {
            const double d = forward_[u] ? flow_[pred_[u]] : inf;
            if (d < delta_) {
                delta_ = d;
                u_out_ = u;
                result = 1;
            }
        }
        for (Node u = second_; u != join_; u = parent_[u]) {
            const double d = forward_[u] ? inf : flow_[pred_[u]];
            if (d <= delta_) {
                delta_ = d;
                u_out_ = u;
                result = 2;
            }
        }
        if (result == 1) {
            u_in_ = first_;
            v_in_ = second_;
        } else {
            u_in_ = second_;
            v_in_ = first_;
        }
        return result != 0;
    }

    void change_flow(bool change) {
        if (delta_ > 0.0) {
            const double val = state_[in_arc_] * delta_;
            flow_[in_arc_] += val;
            for (Node u = source(in_arc_); u != join_; u = parent_[u]) flow_[pred_[u]] += forward_[u] ? -val : val;
            for (Node u = target(in_arc_); u != join_; u = parent_[u]) flow_[pred_[u]] += forward_[u] ? val : -val;
        }
        if (change) {
            state_[in_arc_] = kStateTree;
            state_[pred_[u_out_]] = kStateLower;
            flow_[pred_[u_out_]] = 0.0;
        } else {
            state_[in_arc_] = static_cast<std::int8_t>(-state_[in_arc_]);
        }
    }

    void update_tree_structure() {
        Node u = last_succ_[u_in_];
        const Node old_rev_thread = rev_thread_[u_out_];
        const Node old_succ_num = succ_num_[u_out_];
        const Node old_last_succ = last_succ_[u_out_];
        v_out_ = parent_[u_out_];
        Node right = thread_[u];
        Node last;

        if (old_rev_thread == v_in_)
            last = thread_[last_succ_[u_out_]];
        else
            last = thread_[v_in_];

        // Re-hang the stem (u_in .. u_out) under v_in, fixing the thread order.
        Node stem = u_in_;
        thread_[v_in_] = stem;
        dirty_revs_.clear();
        dirty_revs_.push_back(v_in_);
        Node par_stem = v_in_;
        while (stem != u_out_) {
            const Node new_stem = parent_[stem];
            thread_[u] = new_stem;
            dirty_revs_.push_back(u);

            const Node w = rev_thread_[stem];
            thread_[w] = right;
            rev_thread_[right] = w;

            parent_[stem] = par_stem;
            par_stem = stem;
            stem = new_stem;

            u = last_succ_[stem] == last_succ_[par_stem] ? rev_thread_[par_stem] : last_succ_[stem];
            right = thread_[u];
        }
        parent_[u_out_] = par_stem;
        thread_[u] = last;
        rev_thread_[last] = u;
        last_succ_[u_out_] = u;

        if (old_rev_thread != v_in_) {
            thread_[old_rev_thread] = right;
            rev_thread_[right] = old_rev_thread;
        }
        for (Node d : dirty_revs_) rev_thread_[thread_[d]] = d;

        // pred/forward/succ_num/last_succ along the reversed stem
        Node tmp_sc = 0;
        const Node tmp_ls = last_succ_[u_out_];
        for (u = u_out_; u != u_in_;) {
            const Node w = parent_[u];
            pred_[u] = pred_[w];
            forward_[u] = !forward_[w];
            tmp_sc += succ_num_[u] - succ_num_[w];
            succ_num_[u] = tmp_sc;
            last_succ_[w] = tmp_ls;
            u = w;
        }
        pred_[u_in_] = in_arc_;
        forward_[u_in_] = (u_in_ == source(in_arc_));
        succ_num_[u_in_] = old_succ_num;

        Node up_limit_in = -1;
        Node up_limit_out = -1;
        if (last_succ_[join_] == v_in_)
            up_limit_out = join_;
        else
            up_limit_in = join_;

        for (u = v_in_; u != up_limit_in && last_succ_[u] == v_in_; u = parent_[u]) last_succ_[u] = last_succ_[u_out_];

        if (join_ != old_rev_thread && v_in_ != old_rev_thread) {
            for (u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
                last_succ_[u] = old_rev_thread;
        } else {
            for (u = v_out_; u != up_limit_out && last_succ_[u] == old_last_succ; u = parent_[u])
                last_succ_[u] = last_succ_[u_out_];
        }

        for (u = v_in_; u != join_; u = parent_[u]) succ_num_[u] += old_succ_num;
        for (u = v_out_; u != join_; u = parent_[u]) succ_num_[u] -= old_succ_num;
    }

    void update_potential() {
        const double sigma = forward_[u_in_] ? pi_[v_in_] - pi_[u_in_] - cost(pred_[u_in_])
                                             : pi_[v_in_] - pi_[u_in_] + cost(pred_[u_in_]);
        const Node end = thread_[last_succ_[u_in_]];
        for (Node u = u_in_; u != end; u = thread_[u]) pi_[u] += sigma;
    }

    Node n1_, n2_;
    const CostMatrix& cost_;
    Arc arc_num_;
    Node node_num_;
    Node root_;
    const kernels::KernelSet& kernels_;

    std::vector<double> supply_, pi_;
    std::vector<Node> parent_, thread_, rev_thread_, succ_num_, last_succ_;
    std::vector<Arc> pred_;
    std::vector<char> forward_;
    std::vector<double> flow_;
    std::vector<std::int8_t> state_;
    std::vector<Node> art_source_, art_target_;
    std::vector<double> art_cost_;
    std::vector<Node> dirty_revs_;

    Arc block_size_ = 10;
    Arc next_arc_ = 0;
    Arc in_arc_ = 0;
    Node join_ = 0, u_in_ = 0, v_in_ = 0, u_out_ = 0, v_out_ = 0, first_ = 0, second_ = 0;
    double delta_ = 0.0;
};

void check_marginal(std::span<const double> w, const char* name) {
    if (w.empty()) throw InputError(std::string(name) + " marginal is empty");
    double total = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw InputError(std::string(name) + " marginal has a negative entry");
        total += x;
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance)
        throw InputError(std::string(name) + " marginal sums to " + std::to_string(total) + ", expected 1");
}

} // namespace

ExactSolution solve_exact(std::span<const double> a, std::span<const double> b, const CostMatrix& cost) {
    check_marginal(a, "row");
    check_marginal(b, "column");
    if (cost.rows() != a.size() || cost.cols() != b.size())
        throw InputError("cost matrix is " + std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()) +
                         " but marginals have sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    if (a.size() + b.size() >= static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
        throw InputError("transport problem too large");

    TransportSimplex simplex(a, b, cost);
    ExactSolution out{TransportPlan(Matrix(0, 0), {}, {}), 0.0, {}, {}, 0.0, 0};
    out.pivots = simplex.run();

    const auto n1 = static_cast<Node>(a.size());
    const auto n2 = static_cast<Node>(b.size());
    Matrix flows(a.size(), b.size());
    double total = 0.0;
    for (Node i = 0; i < n1; ++i) {
        for (Node j = 0; j < n2; ++j) {
            const double f = std::max(simplex.flow(i, j), 0.0);
            flows(i, j) = f;
            total += f * cost(i, j);
        }
    }
    out.cost = total;
    out.row_potential.resize(a.size());
    out.col_potential.resize(b.size());
    double dual = 0.0;
    for (Node i = 0; i < n1; ++i) {
        out.row_potential[i] = -simplex.potential(i);
        dual += a[i] * out.row_potential[i];
    }
    for (Node j = 0; j < n2; ++j) {
        out.col_potential[j] = simplex.potential(n1 + j);
        dual += b[j] * out.col_potential[j];
    }
    out.dual_value = dual;
    out.plan = TransportPlan(std::move(flows), std::vector<double>(a.begin(), a.end()),
                             std::vector<double>(b.begin(), b.end()));
    return out;
}

double w2_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim()) throw InputError("W2 needs measures of the same dimension");
    const CostMatrix C = squared_euclidean_cost(mu.support(), nu.support());
    const ExactSolution s = solve_exact(mu.weights(), nu.weights(), C);
    return std::sqrt(std::max(s.cost, 0.0));
}

double brute_force_assignment(const Matrix& X, const Matrix& Y) {
    if (X.rows() != Y.rows()) throw InputError("brute-force assignment needs equal-size clouds");
    if (X.rows() == 0 || X.rows() > 8) throw InputError("brute-force assignment is limited to 1 <= n <= 8");
    const CostMatrix C = squared_euclidean_cost(X, Y);
    std::vector<std::size_t> perm(X.rows());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) s += C(i, perm[i]);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(X.rows());
}

} // namespace quantot
