#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nmfair/model.hpp"

namespace nmfair {

/// Declared output range of a fairness function. Unit-range is required by
/// the fair-policy notions; the raw welfare functions are not unit-ranged
/// and must be wrapped by a normalization map first.
enum class ValueRange { any, nonneg, unit };

/// Tolerance for "returns are tied" when forming the first-place set. With
/// gamma = 1 and integer rewards ties are exact; otherwise two returns within
/// this distance count as tied.
inline constexpr double kTieTolerance = 1e-12;

/// Maps a raw fairness score into [0,1].
struct NormalizationMap {
    enum class Kind { reciprocal, clamp, identity };
    Kind kind = Kind::identity;
    double lo = 0.0;   // clamp only
    double hi = 1.0;   // clamp only

    static NormalizationMap reciprocal() { return {Kind::reciprocal, 0.0, 1.0}; }
    static NormalizationMap clamp(double lo, double hi) {
        if (!(lo < hi)) throw std::invalid_argument("NormalizationMap::clamp: lo < hi required");
        return {Kind::clamp, lo, hi};
    }
    static NormalizationMap identity() { return {Kind::identity, 0.0, 1.0}; }

    double apply(double x) const {
        switch (kind) {
        case Kind::reciprocal: return 1.0 / (1.0 + x);
        case Kind::clamp: {
            const double c = std::min(std::max(x, lo), hi);
            return (c - lo) / (hi - lo);
        }
        case Kind::identity: return x;
        }
        return x;
    }
};

/// Partition of the action set into per-stakeholder (or per-class) groups.
/// Must cover every action exactly once.
class ActionPartition {
public:
    static ActionPartition of(std::size_t num_actions, std::vector<std::vector<ActionId>> classes) {
        ActionPartition p;
        p.classes_ = std::move(classes);
        p.class_of_.assign(num_actions, num_actions);
        for (std::size_t c = 0; c < p.classes_.size(); ++c) {
            for (ActionId a : p.classes_[c]) {
                if (a.index >= num_actions)
                    throw std::invalid_argument("ActionPartition: action id out of range");
                if (p.class_of_[a.index] != num_actions)
                    throw std::invalid_argument("ActionPartition: classes are not disjoint (action " +
                                                std::to_string(a.index) + ")");
                p.class_of_[a.index] = c;
            }
        }
        for (std::size_t a = 0; a < num_actions; ++a)
            if (p.class_of_[a] == num_actions)
                throw std::invalid_argument("ActionPartition: action " + std::to_string(a) +
                                            " not covered by any class");
        return p;
    }

    std::size_t num_classes() const { return classes_.size(); }
    std::size_t num_actions() const { return class_of_.size(); }
    std::size_t class_of(ActionId a) const {
        if (a.index >= class_of_.size())
            throw std::out_of_range("ActionPartition: action not covered by partition");
        return class_of_[a.index];
    }
    const std::vector<std::vector<ActionId>>& classes() const { return classes_; }

    /// True when this is the n>2 generalization (max-minus-min of class
    /// counts), which is an extension beyond the two-stakeholder form.
    bool is_generalized() const { return classes_.size() > 2; }

private:
    std::vector<std::vector<ActionId>> classes_;
    std::vector<std::size_t> class_of_;
};

/// Per-step fairness values f_1..f_T for an evaluated trace.
struct FairnessSignal {
    std::vector<double> values;
    std::vector<std::string> warnings;

    std::size_t size() const { return values.size(); }
    double back() const { return values.back(); }
};

// --- whole-trace fairness functions -----------------------------------------

/// Product of stakeholder returns. Negative factors are reported as-is; the
/// caller decides whether that needs a warning (see FairnessSignal).
inline double nash_welfare(const BoundedTrace& tau, const MultiStakeholderMdp& m) {
    double product = 1.0;
    for (std::size_t i = 0; i < m.num_stakeholders(); ++i)
        product *= discounted_return(tau, i, m);
    return product;
}

/// Return of the worst-off stakeholder.
inline double rawlsian_welfare(const BoundedTrace& tau, const MultiStakeholderMdp& m) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.num_stakeholders(); ++i)
        worst = std::min(worst, discounted_return(tau, i, m));
    return worst;
}

namespace detail {

/// Indices of stakeholders whose return is within kTieTolerance of the max.
inline void first_place_set(const std::vector<double>& returns, std::vector<bool>& out) {
    const double best = *std::max_element(returns.begin(), returns.end());
    out.assign(returns.size(), false);
    for (std::size_t i = 0; i < returns.size(); ++i)
        out[i] = returns[i] >= best - kTieTolerance;
}

} // namespace detail

/// Fraction of time the worst-off stakeholder spends in first place:
/// min_i (#{t : i is in the argmax set of returns after t actions} / T).
/// Ties put every tied stakeholder in the set.
inline double time_in_first_place(const BoundedTrace& tau, const MultiStakeholderMdp& m) {
    const std::size_t horizon = tau.length();
    if (horizon < 1) throw std::invalid_argument("time_in_first_place: trace must have T >= 1 actions");
    const std::size_t n = m.num_stakeholders();
    std::vector<double> returns(n, 0.0);
    std::vector<std::size_t> counts(n, 0);
    std::vector<bool> in_first;
    double pw = 1.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
        for (std::size_t i = 0; i < n; ++i)
            returns[i] += pw * m.reward(i, tau.state_at(t), tau.action_at(t), tau.result_state(t));
        pw *= m.gamma;
        detail::first_place_set(returns, in_first);
        for (std::size_t i = 0; i < n; ++i)
            if (in_first[i]) ++counts[i];
    }
    const std::size_t min_count = *std::min_element(counts.begin(), counts.end());
    return static_cast<double>(min_count) / static_cast<double>(horizon);
}

/// Absolute difference of per-class action counts (two classes), or the
/// max-minus-min generalization for more classes.
inline double allocation_imbalance(const BoundedTrace& tau, const ActionPartition& partition) {
    std::vector<std::size_t> counts(partition.num_classes(), 0);
    for (ActionId a : tau.actions) ++counts[partition.class_of(a)];
    if (partition.num_classes() == 2) {
        const auto hi = std::max(counts[0], counts[1]);
        const auto lo = std::min(counts[0], counts[1]);
        return static_cast<double>(hi - lo);
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    return static_cast<double>(*hi - *lo);
}

// --- trace fairness values ---------------------------------------------------

/// Whole-history fairness function over bounded traces. Variants cover the
/// built-in welfare functions, the action-count imbalance, a normalization
/// wrapper, and opaque custom callables.
///
/// `evaluate` applies the defining formula to the whole trace; `signal`
/// computes f_t for every prefix with constant work per step for the
/// built-ins. The two must agree exactly; the test suite holds the
/// incremental path to naive per-prefix recomputation.
class TraceFairness {
public:
    enum class Kind { nash, rawlsian, first_place, imbalance, normalized, custom };

    using CustomFn = std::function<double(const BoundedTrace&, const MultiStakeholderMdp&)>;

    static TraceFairness nash() { return TraceFairness(Kind::nash, ValueRange::any); }
    static TraceFairness rawlsian() { return TraceFairness(Kind::rawlsian, ValueRange::any); }
    static TraceFairness first_place() { return TraceFairness(Kind::first_place, ValueRange::unit); }

    static TraceFairness imbalance(ActionPartition partition) {
        TraceFairness f(Kind::imbalance, ValueRange::nonneg);
        f.partition_ = std::make_shared<ActionPartition>(std::move(partition));
        return f;
    }

    /// Wraps `inner` so outputs lie in [0,1]. The map's domain must match the
    /// inner function's declared range: reciprocal needs nonnegative scores,
    /// identity needs an already unit-ranged function.
    static TraceFairness normalized(TraceFairness inner, NormalizationMap map) {
        switch (map.kind) {
        case NormalizationMap::Kind::reciprocal:
            if (inner.range() == ValueRange::any)
                throw std::invalid_argument(
                    "normalize: reciprocal map requires a nonnegative inner function");
            break;
        case NormalizationMap::Kind::identity:
            if (inner.range() != ValueRange::unit)
                throw std::invalid_argument(
                    "normalize: identity map requires a unit-range inner function");
            break;
        case NormalizationMap::Kind::clamp:
            break;
        }
        TraceFairness f(Kind::normalized, ValueRange::unit);
        f.inner_ = std::make_shared<TraceFairness>(std::move(inner));
        f.map_ = map;
        return f;
    }

    static TraceFairness custom(CustomFn fn, ValueRange range, std::string name,
                                bool concurrent_safe = true) {
        TraceFairness f(Kind::custom, range);
        f.custom_ = std::move(fn);
        f.name_ = std::move(name);
        f.concurrent_safe_ = concurrent_safe;
        return f;
    }

    Kind kind() const { return kind_; }
    ValueRange range() const { return range_; }
    bool unit_range() const { return range_ == ValueRange::unit; }
    bool concurrent_safe() const { return concurrent_safe_; }
    const ActionPartition& partition() const {
        if (!partition_) throw std::logic_error("TraceFairness: no partition");
        return *partition_;
    }
    const std::string& name() const { return name_; }

    /// F(tau): the defining formula applied to the whole trace.
    double evaluate(const BoundedTrace& tau, const MultiStakeholderMdp& m) const {
        switch (kind_) {
        case Kind::nash: return nash_welfare(tau, m);
        case Kind::rawlsian: return rawlsian_welfare(tau, m);
        case Kind::first_place: return time_in_first_place(tau, m);
        case Kind::imbalance: return allocation_imbalance(tau, *partition_);
        case Kind::normalized: return map_.apply(inner_->evaluate(tau, m));
        case Kind::custom: return custom_(tau, m);
        }
        throw std::logic_error("TraceFairness: unknown kind");
    }

    /// f_t = F(tau_{1,t}) for t = 1..T. Incremental for the built-ins; custom
    /// functions are re-evaluated per prefix.
    FairnessSignal signal(const BoundedTrace& tau, const MultiStakeholderMdp& m) const;

private:
    TraceFairness(Kind kind, ValueRange range) : kind_(kind), range_(range) {}

    Kind kind_;
    ValueRange range_;
    std::shared_ptr<ActionPartition> partition_;   // imbalance
    std::shared_ptr<TraceFairness> inner_;         // normalized
    NormalizationMap map_;                         // normalized
    CustomFn custom_;                              // custom
    std::string name_ = "";
    bool concurrent_safe_ = true;
};

/// Alias matching the operation vocabulary.
inline TraceFairness normalize(TraceFairness f, NormalizationMap map) {
    return TraceFairness::normalized(std::move(f), map);
}

namespace detail {

/// Incremental per-step evaluation state for the built-in fairness functions.
class FairnessStepper {
public:
    FairnessStepper(const TraceFairness& f, const MultiStakeholderMdp& m)
        : f_(f), m_(m) {
        switch (f.kind()) {
        case TraceFairness::Kind::nash:
        case TraceFairness::Kind::rawlsian:
            returns_.assign(m.num_stakeholders(), 0.0);
            break;
        case TraceFairness::Kind::first_place:
            returns_.assign(m.num_stakeholders(), 0.0);
            counts_.assign(m.num_stakeholders(), 0);
            break;
        case TraceFairness::Kind::imbalance:
            counts_.assign(f.partition().num_classes(), 0);
            break;
        default:
            // normalized and custom are handled before stepping begins
            throw std::logic_error("FairnessStepper: unsupported kind");
        }
    }

    /// Consumes step t (transition s_t, a_t, s_{t+1}) and returns f_t.
    double on_step(std::size_t t, StateId s, ActionId a, StateId next,
                   std::vector<std::string>& warnings) {
        switch (f_.kind()) {
        case TraceFairness::Kind::nash: {
            accumulate_returns(s, a, next);
            double product = 1.0;
            bool negative = false;
            for (double g : returns_) {
                product *= g;
                negative = negative || g < 0.0;
            }
            if (negative && !nash_warned_) {
                warnings.push_back("nash welfare saw a negative stakeholder return at t=" +
                                   std::to_string(t) + "; value reported as-is");
                nash_warned_ = true;
            }
            return product;
        }
        case TraceFairness::Kind::rawlsian: {
            accumulate_returns(s, a, next);
            return *std::min_element(returns_.begin(), returns_.end());
        }
        case TraceFairness::Kind::first_place: {
            accumulate_returns(s, a, next);
            first_place_set(returns_, in_first_);
            for (std::size_t i = 0; i < counts_.size(); ++i)
                if (in_first_[i]) ++counts_[i];
            const std::size_t min_count = *std::min_element(counts_.begin(), counts_.end());
            return static_cast<double>(min_count) / static_cast<double>(t);
        }
        case TraceFairness::Kind::imbalance: {
            ++counts_[f_.partition().class_of(a)];
            if (counts_.size() == 2) {
                const auto hi = std::max(counts_[0], counts_[1]);
                const auto lo = std::min(counts_[0], counts_[1]);
                return static_cast<double>(hi - lo);
            }
            const auto [lo, hi] = std::minmax_element(counts_.begin(), counts_.end());
            return static_cast<double>(*hi - *lo);
        }
        default:
            throw std::logic_error("FairnessStepper: unsupported kind");
        }
    }

private:
    void accumulate_returns(StateId s, ActionId a, StateId next) {
        for (std::size_t i = 0; i < returns_.size(); ++i)
            returns_[i] += pw_ * m_.reward(i, s, a, next);
        pw_ *= m_.gamma;
    }

    const TraceFairness& f_;
    const MultiStakeholderMdp& m_;
    std::vector<double> returns_;
    std::vector<std::size_t> counts_;
    std::vector<bool> in_first_;
    double pw_ = 1.0;
    bool nash_warned_ = false;
};

} // namespace detail

inline FairnessSignal TraceFairness::signal(const BoundedTrace& tau,
                                            const MultiStakeholderMdp& m) const {
    FairnessSignal out;
    const std::size_t horizon = tau.length();
    out.values.reserve(horizon);
    if (horizon == 0) return out;

    if (kind_ == Kind::custom) {
        for (std::size_t t = 1; t <= horizon; ++t)
            out.values.push_back(custom_(prefix(tau, t), m));
        return out;
    }
    if (kind_ == Kind::normalized) {
        out = inner_->signal(tau, m);
        for (double& v : out.values) v = map_.apply(v);
        return out;
    }
    detail::FairnessStepper stepper(*this, m);
    for (std::size_t t = 1; t <= horizon; ++t)
        out.values.push_back(
            stepper.on_step(t, tau.state_at(t), tau.action_at(t), tau.result_state(t), out.warnings));
    return out;
}

/// Operation-style entry point: the per-prefix fairness signal of `f` on `tau`.
inline FairnessSignal fairness_signal(const TraceFairness& f, const BoundedTrace& tau,
                                      const MultiStakeholderMdp& m) {
    if (tau.length() < 1)
        throw std::invalid_argument("fairness_signal: trace must have T >= 1 actions");
    return f.signal(tau, m);
}

} // namespace nmfair
