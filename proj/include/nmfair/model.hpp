#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "nmfair/rng.hpp"

namespace nmfair {

/// Index into a model's state table.
struct StateId {
    std::size_t index = 0;
    friend auto operator<=>(const StateId&, const StateId&) = default;
};

/// Index into a model's action table.
struct ActionId {
    std::size_t index = 0;
    friend auto operator<=>(const ActionId&, const ActionId&) = default;
};

/// Probability-sum tolerance for stored distributions.
inline constexpr double kProbTolerance = 1e-9;

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Finite MDP with one reward table per stakeholder.
///
/// Transitions are stored as per-(state, action) successor lists (only the
/// positive-probability entries); rewards are dense tables of |S|*|A|*|S|
/// entries per stakeholder. Instances are immutable once built and safe to
/// share across concurrent workers.
class MultiStakeholderMdp {
public:
    std::vector<std::string> state_labels;
    std::vector<std::string> action_labels;
    std::vector<std::string> stakeholder_labels;
    StateId init{};
    double gamma = 1.0;

    using SuccessorList = std::vector<std::pair<StateId, double>>;

    MultiStakeholderMdp() = default;

    MultiStakeholderMdp(std::vector<std::string> states,
                        std::vector<std::string> actions,
                        std::vector<std::string> stakeholders,
                        StateId initial, double discount)
        : state_labels(std::move(states)),
          action_labels(std::move(actions)),
          stakeholder_labels(std::move(stakeholders)),
          init(initial),
          gamma(discount) {
        transitions_.assign(num_states() * num_actions(), {});
        rewards_.assign(num_stakeholders(),
                        std::vector<double>(num_states() * num_actions() * num_states(), 0.0));
    }

    std::size_t num_states() const { return state_labels.size(); }
    std::size_t num_actions() const { return action_labels.size(); }
    std::size_t num_stakeholders() const { return stakeholder_labels.size(); }

    void set_transition(StateId s, ActionId a, SuccessorList successors) {
        transitions_.at(row(s, a)) = std::move(successors);
    }

    const SuccessorList& successors(StateId s, ActionId a) const {
        return transitions_.at(row(s, a));
    }

    double transition_prob(StateId s, ActionId a, StateId next) const {
        for (const auto& [succ, p] : successors(s, a))
            if (succ == next) return p;
        return 0.0;
    }

    void set_reward(std::size_t stakeholder, StateId s, ActionId a, StateId next, double r) {
        rewards_.at(stakeholder).at(reward_index(s, a, next)) = r;
    }

    double reward(std::size_t stakeholder, StateId s, ActionId a, StateId next) const {
        return rewards_.at(stakeholder)[reward_index(s, a, next)];
    }

    const std::vector<std::vector<double>>& reward_tables() const { return rewards_; }
    std::vector<std::vector<double>>& reward_tables() { return rewards_; }

    std::size_t reward_index(StateId s, ActionId a, StateId next) const {
        return (s.index * num_actions() + a.index) * num_states() + next.index;
    }

private:
    std::size_t row(StateId s, ActionId a) const {
        if (s.index >= num_states() || a.index >= num_actions())
            throw std::out_of_range("MultiStakeholderMdp: state/action id out of range");
        return s.index * num_actions() + a.index;
    }

    std::vector<SuccessorList> transitions_;       // [s*|A|+a] -> successor list
    std::vector<std::vector<double>> rewards_;     // [i][(s*|A|+a)*|S|+s']
};

/// Reports every invariant violation with the offending indices.
/// Violations are data, not failures: an invalid model is still a value.
inline ValidationReport validate_mdp(const MultiStakeholderMdp& m) {
    ValidationReport report;
    auto add = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

    if (m.num_states() == 0) add("model has no states");
    if (m.num_actions() == 0) add("model has no actions");
    if (m.num_stakeholders() == 0) add("model has no stakeholders (n >= 1 required)");
    if (!(m.gamma > 0.0 && m.gamma <= 1.0)) {
        std::ostringstream os;
        os << "gamma out of (0,1]: " << m.gamma;
        add(os.str());
    }
    if (m.init.index >= m.num_states()) add("init state id out of range");

    for (std::size_t s = 0; s < m.num_states(); ++s) {
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            const auto& row = m.successors(StateId{s}, ActionId{a});
            double sum = 0.0;
            for (const auto& [succ, p] : row) {
                if (succ.index >= m.num_states()) {
                    std::ostringstream os;
                    os << "successor id out of range at (s=" << s << ",a=" << a << ")";
                    add(os.str());
                }
                if (p < 0.0) {
                    std::ostringstream os;
                    os << "negative probability at (s=" << s << ",a=" << a << ")";
                    add(os.str());
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > kProbTolerance) {
                std::ostringstream os;
                os << "distribution sums to " << sum << " at (s=" << s << ",a=" << a << ")";
                add(os.str());
            }
        }
    }
    return report;
}

/// One sampled environment step: successor state and the per-stakeholder
/// reward vector for the realized transition.
struct StepResult {
    StateId next;
    std::vector<double> rewards;
};

inline StepResult step(const MultiStakeholderMdp& m, StateId s, ActionId a, Rng& rng) {
    const auto& row = m.successors(s, a);
    std::vector<double> probs(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) probs[i] = row[i].second;
    const StateId next = row[sample_categorical(rng, probs)].first;
    std::vector<double> rewards(m.num_stakeholders());
    for (std::size_t i = 0; i < rewards.size(); ++i)
        rewards[i] = m.reward(i, s, a, next);
    return {next, std::move(rewards)};
}

/// Finite alternating state/action sequence tau_{x,y}.
///
/// Time positions are 1-based to match tau_{1,y}; storage is 0-based:
/// states[t-1] is s_t and actions[t-1] is a_t for t = 1..length().
struct BoundedTrace {
    std::size_t start_time = 1;       // x >= 1
    std::vector<StateId> states;      // length = actions.size() + 1
    std::vector<ActionId> actions;

    std::size_t length() const { return actions.size(); }

    StateId state_at(std::size_t t) const { return states.at(t - 1); }       // s_t
    ActionId action_at(std::size_t t) const { return actions.at(t - 1); }    // a_t
    StateId result_state(std::size_t t) const { return states.at(t); }       // s_{t+1}
};

/// First t actions plus the resulting state; t in [1, length()].
inline BoundedTrace prefix(const BoundedTrace& tau, std::size_t t) {
    if (t < 1 || t > tau.length())
        throw std::out_of_range("prefix: t must be in [1, number of actions]");
    BoundedTrace out;
    out.start_time = tau.start_time;
    out.states.assign(tau.states.begin(), tau.states.begin() + static_cast<std::ptrdiff_t>(t + 1));
    out.actions.assign(tau.actions.begin(), tau.actions.begin() + static_cast<std::ptrdiff_t>(t));
    return out;
}

/// Structural checks; positive transition probability under P is optional
/// because the source definition leaves it open whether traces must be
/// realizable.
inline ValidationReport validate_trace(const MultiStakeholderMdp& m, const BoundedTrace& tau,
                                       bool require_positive_probability = false) {
    ValidationReport report;
    auto add = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

    if (tau.states.empty()) add("trace has no states");
    if (!tau.states.empty() && tau.states.size() != tau.actions.size() + 1)
        add("trace must satisfy |states| = |actions| + 1");
    if (tau.start_time < 1) add("start_time must be >= 1");
    for (std::size_t i = 0; i < tau.states.size(); ++i) {
        if (tau.states[i].index >= m.num_states()) {
            add("state id out of range at position " + std::to_string(i));
            return report;
        }
    }
    for (std::size_t i = 0; i < tau.actions.size(); ++i) {
        if (tau.actions[i].index >= m.num_actions()) {
            add("action id out of range at position " + std::to_string(i));
            return report;
        }
    }
    if (tau.start_time == 1 && !tau.states.empty() && tau.states[0] != m.init)
        add("trace starting at time 1 must begin in the initial state");
    if (require_positive_probability && tau.states.size() == tau.actions.size() + 1) {
        for (std::size_t t = 1; t <= tau.length(); ++t) {
            if (m.transition_prob(tau.state_at(t), tau.action_at(t), tau.result_state(t)) <= 0.0) {
                std::ostringstream os;
                os << "zero-probability transition at step " << t;
                add(os.str());
            }
        }
    }
    return report;
}

/// Discounted return of one stakeholder over the trace: sum over positions
/// k = 1..length() of gamma^{k-1} * R_i(s_k, a_k, s_{k+1}). Discounting is
/// relative to the trace's own first position.
inline double discounted_return(const BoundedTrace& tau, std::size_t stakeholder,
                                const MultiStakeholderMdp& m) {
    if (stakeholder >= m.num_stakeholders())
        throw std::out_of_range("discounted_return: stakeholder index out of range");
    double total = 0.0;
    double pw = 1.0;
    for (std::size_t t = 1; t <= tau.length(); ++t) {
        total += pw * m.reward(stakeholder, tau.state_at(t), tau.action_at(t), tau.result_state(t));
        pw *= m.gamma;
    }
    return total;
}

class Policy;

/// History policy: maps the trace prefix so far (states s_1..s_t, actions
/// a_1..a_{t-1}) to a distribution over actions.
using HistoryPolicyFn = std::function<std::vector<double>(const BoundedTrace&)>;

/// Raised when a history policy emits an invalid distribution; carries the
/// offending time step.
class PolicyEvaluationError : public std::runtime_error {
public:
    PolicyEvaluationError(std::string msg, std::size_t time_step)
        : std::runtime_error(std::move(msg)), time_step_(time_step) {}
    std::size_t time_step() const { return time_step_; }

private:
    std::size_t time_step_;
};

/// Non-Markovian policy value. Three variants:
///  - markovian: table pi[s] -> action distribution over the model's states;
///  - product:   same table shape, but over a compiled product's states
///               (the tag records which space the indices refer to);
///  - history:   opaque callable from the trace prefix to a distribution.
class Policy {
public:
    enum class Kind { markovian, product, history };

    static Policy markovian(std::vector<std::vector<double>> table) {
        return Policy(Kind::markovian, std::move(table), {}, "markovian", true);
    }

    static Policy product(std::vector<std::vector<double>> table) {
        return Policy(Kind::product, std::move(table), {}, "product", true);
    }

    static Policy history(HistoryPolicyFn fn, std::string name, bool concurrent_safe = true) {
        Policy p(Kind::history, {}, std::move(fn), std::move(name), concurrent_safe);
        return p;
    }

    Kind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    bool concurrent_safe() const { return concurrent_safe_; }
    const std::vector<std::vector<double>>& table() const { return table_; }

    /// Action distribution for the current history. Tabular variants index by
    /// the last state of the prefix; the history variant sees the whole prefix.
    std::vector<double> action_distribution(const BoundedTrace& prefix_so_far) const {
        if (kind_ == Kind::history) return fn_(prefix_so_far);
        const StateId s = prefix_so_far.states.back();
        return table_.at(s.index);
    }

private:
    Policy(Kind kind, std::vector<std::vector<double>> table, HistoryPolicyFn fn,
           std::string name, bool concurrent_safe)
        : kind_(kind), table_(std::move(table)), fn_(std::move(fn)),
          name_(std::move(name)), concurrent_safe_(concurrent_safe) {
        for (std::size_t s = 0; s < table_.size(); ++s) {
            double sum = 0.0;
            for (double p : table_[s]) {
                if (p < 0.0) throw std::invalid_argument("Policy: negative probability in row " + std::to_string(s));
                sum += p;
            }
            if (std::abs(sum - 1.0) > kProbTolerance)
                throw std::invalid_argument("Policy: row " + std::to_string(s) + " sums to " + std::to_string(sum));
        }
    }

    Kind kind_;
    std::vector<std::vector<double>> table_;
    HistoryPolicyFn fn_;
    std::string name_;
    bool concurrent_safe_ = true;
};

/// Samples tau_{1,T}: states[0] = init, each action drawn from the policy
/// given the prefix, each successor drawn from P. Deterministic given the
/// rng state.
inline BoundedTrace rollout(const MultiStakeholderMdp& m, const Policy& pi,
                            std::size_t horizon, Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1 (T >= 1)");
    BoundedTrace tau;
    tau.start_time = 1;
    tau.states.reserve(horizon + 1);
    tau.actions.reserve(horizon);
    tau.states.push_back(m.init);
    for (std::size_t t = 1; t <= horizon; ++t) {
        std::vector<double> dist = pi.action_distribution(tau);
        if (dist.size() != m.num_actions())
            throw PolicyEvaluationError(
                "policy distribution has wrong arity at time step " + std::to_string(t), t);
        double sum = 0.0;
        for (double p : dist) {
            if (p < 0.0 || !std::isfinite(p))
                throw PolicyEvaluationError(
                    "policy distribution has invalid entries at time step " + std::to_string(t), t);
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbTolerance)
            throw PolicyEvaluationError(
                "policy distribution sums to " + std::to_string(sum) +
                " at time step " + std::to_string(t), t);
        const ActionId a{sample_categorical(rng, dist)};
        StepResult sr = step(m, tau.states.back(), a, rng);
        tau.actions.push_back(a);
        tau.states.push_back(sr.next);
    }
    return tau;
}

} // namespace nmfair
