#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <limits>
#include <vector>

#include "hierplan/common.hpp"

namespace hierplan {

/// UCT score: mean utility plus c * sqrt(ln(parent visits) / child visits).
/// An unvisited child scores +inf so it is tried first.
inline double ucb_score(double mean_utility, long child_visits, long parent_visits, double c)
{
    if (child_visits <= 0)
        return std::numeric_limits<double>::infinity();
    return mean_utility + c * std::sqrt(std::log(static_cast<double>(parent_visits)) / static_cast<double>(child_visits));
}

/// A deterministic, cost-minimising sequential decision problem.
///   actions(s)  - choices at a decision node; empty marks a terminal node
///   step(s, a)  - applies a, advances s to the next decision node, returns the cost accrued
///   rollout(s)  - cost of finishing from s under the default policy
template <class Env>
concept SearchEnvironment = requires(const Env& env, typename Env::State& s, const typename Env::Action& a) {
    { env.actions(s) } -> std::same_as<std::vector<typename Env::Action>>;
    { env.step(s, a) } -> std::convertible_to<double>;
    { env.rollout(s) } -> std::convertible_to<double>;
};

struct SearchOptions {
    long iterations = 1000;
    double exploration = 1.44;
    std::uint64_t seed = 0;
};

/// One line of the optional search trace.
struct TraceEntry {
    long iteration = 0;
    int root_child = -1;  // index into root children, -1 if the root is terminal
    double cost = 0;
};

/// UCT search over costs. Child utilities are min-max normalised among siblings before the
/// UCB comparison, so the exploration constant is independent of the cost scale.
template <SearchEnvironment Env>
class UctSearch {
public:
    using State = typename Env::State;
    using Action = typename Env::Action;

    struct Node {
        State state;
        Action action{};          // action leading here (unused at the root)
        int parent = -1;
        long visits = 0;
        long stops = 0;           // iterations that ended here because the node is terminal
        double cost_sum = 0;      // accumulated cost-to-go measured from the parent
        double edge_cost = 0;
        bool terminal = false;
        std::vector<Action> untried;
        std::vector<int> children;

        double mean_cost() const { return visits > 0 ? cost_sum / static_cast<double>(visits) : 0.0; }
    };

    struct RootScore {
        Action action;
        double mean_cost = 0;
        long visits = 0;
    };

    UctSearch(const Env& env, State root, const SearchOptions& options)
        : env_(env), options_(options), rng_(options.seed)
    {
        nodes_.reserve(static_cast<std::size_t>(options.iterations) + 1);
        add_node(std::move(root), Action{}, -1, 0.0);
    }

    /// Runs the configured number of iterations; appends to `trace` when non-null.
    void run(std::vector<TraceEntry>* trace = nullptr)
    {
        for (long it = 0; it < options_.iterations; ++it) {
            const auto [cost, root_child] = iterate();
            if (trace)
                trace->push_back(TraceEntry{it, root_child, cost});
        }
    }

    std::vector<RootScore> root_scores() const
    {
        std::vector<RootScore> out;
        for (int c : nodes_[0].children) {
            const auto& n = nodes_[static_cast<std::size_t>(c)];
            out.push_back(RootScore{n.action, n.mean_cost(), n.visits});
        }
        return out;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    const Node& root() const { return nodes_[0]; }

    /// Every node's visits equal its children's visits plus terminal stops, plus one
    /// expansion visit for non-root nodes.
    bool visits_conserved() const
    {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            long sum = n.stops + (i == 0 ? 0 : 1);
            for (int c : n.children)
                sum += nodes_[static_cast<std::size_t>(c)].visits;
            if (sum != n.visits)
                return false;
        }
        return nodes_[0].visits == iterations_done_;
    }

    /// Follows lowest-mean-cost children from `from` while `keep_going(node)` holds.
    template <class Pred>
    int descend_best(int from, Pred&& keep_going) const
    {
        int cur = from;
        while (keep_going(nodes_[static_cast<std::size_t>(cur)]) && !nodes_[static_cast<std::size_t>(cur)].children.empty()) {
            int best = -1;
            for (int c : nodes_[static_cast<std::size_t>(cur)].children)
                if (best < 0 || nodes_[static_cast<std::size_t>(c)].mean_cost() < nodes_[static_cast<std::size_t>(best)].mean_cost())
                    best = c;
            cur = best;
        }
        return cur;
    }

private:
    int add_node(State state, Action action, int parent, double edge_cost)
    {
        Node n;
        n.state = std::move(state);
        n.action = std::move(action);
        n.parent = parent;
        n.edge_cost = edge_cost;
        n.untried = env_.actions(n.state);
        n.terminal = n.untried.empty();
        // Expansion order is a seeded shuffle; pop_back takes from the end.
        for (std::size_t i = n.untried.size(); i > 1; --i)
            std::swap(n.untried[i - 1], n.untried[rng_.below(i)]);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    int select_child(const Node& n) const
    {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int c : n.children) {
            const double m = nodes_[static_cast<std::size_t>(c)].mean_cost();
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        int best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int c : n.children) {
            const auto& child = nodes_[static_cast<std::size_t>(c)];
            const double utility = hi > lo ? (hi - child.mean_cost()) / (hi - lo) : 0.5;
            const double score = ucb_score(utility, child.visits, n.visits, options_.exploration);
            if (best < 0 || score > best_score) {
                best = c;
                best_score = score;
            }
        }
        return best;
    }

    std::pair<double, int> iterate()
    {
        path_.clear();
        int cur = 0;
        path_.push_back(cur);
        double leaf_cost = 0;
        bool stopped = false;
        while (true) {
            auto& node = nodes_[static_cast<std::size_t>(cur)];
            if (node.terminal) {
                State tail = node.state;
                leaf_cost = env_.rollout(tail);
                stopped = true;
                break;
            }
            if (!node.untried.empty()) {
                Action a = std::move(node.untried.back());
                node.untried.pop_back();
                State next = node.state;
                const double edge = env_.step(next, a);
                const int child = add_node(std::move(next), std::move(a), cur, edge);
                nodes_[static_cast<std::size_t>(cur)].children.push_back(child);
                State tail = nodes_[static_cast<std::size_t>(child)].state;
                leaf_cost = env_.rollout(tail);
                path_.push_back(child);
                break;
            }
            cur = select_child(node);
            path_.push_back(cur);
        }

        // Cost-to-go below each path node, then accumulate on the way up.
        double below = leaf_cost;
        for (std::size_t i = path_.size(); i-- > 0;) {
            auto& n = nodes_[static_cast<std::size_t>(path_[i])];
            const double from_parent = below + (i == 0 ? 0.0 : n.edge_cost);
            n.visits += 1;
            n.cost_sum += from_parent;
            below = from_parent;
        }
        if (stopped)
            nodes_[static_cast<std::size_t>(path_.back())].stops += 1;
        ++iterations_done_;

        int root_child = -1;
        if (path_.size() > 1) {
            const auto& kids = nodes_[0].children;
            root_child = static_cast<int>(std::find(kids.begin(), kids.end(), path_[1]) - kids.begin());
        }
        return {below, root_child};
    }

    const Env& env_;
    SearchOptions options_;
    Rng rng_;
    std::vector<Node> nodes_;
    std::vector<int> path_;
    long iterations_done_ = 0;
};

} // namespace hierplan
