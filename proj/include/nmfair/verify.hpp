#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nmfair/fairness.hpp"
#include "nmfair/model.hpp"
#include "nmfair/rng.hpp"

namespace nmfair {

/// Tolerance for the "fairness equals 1" tests used by the periodic and
/// bounded notions. Fairness built from integer bookkeeping at gamma = 1
/// hits 1 exactly; the tolerance covers float-valued signals.
inline constexpr double kFairOneTolerance = 1e-12;

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

/// One of the fair-policy notions, with its parameters.
class FairnessNotion {
public:
    enum class Kind { limit, anytime, periodic, exact_periodic, bounded };

    using Checkpoint = std::function<bool(StateId)>;

    /// f_t >= 1 - epsilon at every step of the interval (hi absent = unbounded).
    static FairnessNotion anytime(double epsilon, std::size_t interval_lo = 1,
                                  std::optional<std::size_t> interval_hi = std::nullopt) {
        if (!(epsilon >= 0.0 && epsilon < 1.0))
            throw std::invalid_argument("anytime: epsilon must be in [0,1)");
        if (interval_lo < 1 || (interval_hi && *interval_hi < interval_lo))
            throw std::invalid_argument("anytime: interval is empty");
        FairnessNotion n(Kind::anytime);
        n.epsilon_ = epsilon;
        n.interval_lo_ = interval_lo;
        n.interval_hi_ = interval_hi;
        return n;
    }

    /// Every window of k consecutive steps contains a step with f = 1.
    static FairnessNotion periodic(std::size_t k) {
        if (k < 1) throw std::invalid_argument("periodic: k >= 1 required");
        FairnessNotion n(Kind::periodic);
        n.period_ = k;
        return n;
    }

    /// f = 1 at every multiple of k.
    static FairnessNotion exact_periodic(std::size_t k) {
        if (k < 1) throw std::invalid_argument("exact_periodic: k >= 1 required");
        FairnessNotion n(Kind::exact_periodic);
        n.period_ = k;
        return n;
    }

    /// f = 1 at every step whose resulting state satisfies the checkpoint.
    static FairnessNotion bounded(Checkpoint checkpoint, std::string description) {
        if (!checkpoint) throw std::invalid_argument("bounded: checkpoint predicate required");
        FairnessNotion n(Kind::bounded);
        n.checkpoint_ = std::move(checkpoint);
        n.checkpoint_desc_ = std::move(description);
        return n;
    }

    /// Trace-level surrogate for convergence: f_t >= 1 - delta for all
    /// t >= t_check. t_check = 0 means "default to 10% of the horizon".
    static FairnessNotion limit(double delta, std::size_t t_check = 0) {
        if (!(delta >= 0.0 && delta < 1.0))
            throw std::invalid_argument("limit: delta must be in [0,1)");
        FairnessNotion n(Kind::limit);
        n.delta_ = delta;
        n.t_check_ = t_check;
        return n;
    }

    Kind kind() const { return kind_; }
    double epsilon() const { return epsilon_; }
    double delta() const { return delta_; }
    std::size_t period() const { return period_; }
    std::size_t interval_lo() const { return interval_lo_; }
    std::optional<std::size_t> interval_hi() const { return interval_hi_; }
    std::size_t t_check() const { return t_check_; }
    const Checkpoint& checkpoint() const { return checkpoint_; }
    const std::string& checkpoint_description() const { return checkpoint_desc_; }

    std::string describe() const {
        std::ostringstream os;
        switch (kind_) {
        case Kind::anytime:
            os << "anytime(epsilon=" << epsilon_ << ", interval=[" << interval_lo_ << ","
               << (interval_hi_ ? std::to_string(*interval_hi_) : "inf") << "])";
            break;
        case Kind::periodic: os << "periodic(k=" << period_ << ")"; break;
        case Kind::exact_periodic: os << "exact-periodic(k=" << period_ << ")"; break;
        case Kind::bounded: os << "bounded(checkpoint=" << checkpoint_desc_ << ")"; break;
        case Kind::limit: os << "limit(delta=" << delta_ << ", t_check=" << t_check_ << ")"; break;
        }
        return os.str();
    }

private:
    explicit FairnessNotion(Kind kind) : kind_(kind) {}

    Kind kind_;
    double epsilon_ = 0.0;
    double delta_ = 0.0;
    std::size_t period_ = 1;
    std::size_t interval_lo_ = 1;
    std::optional<std::size_t> interval_hi_;
    std::size_t t_check_ = 0;
    Checkpoint checkpoint_;
    std::string checkpoint_desc_;
};

struct TraceCheckResult {
    Verdict verdict = Verdict::inconclusive;
    std::optional<std::size_t> time_step;   // first violation (fail) or relevant step
    std::string detail;
};

struct Counterexample {
    BoundedTrace trace;
    std::size_t time_step = 0;
};

struct VerificationReport {
    enum class Method { exhaustive, monte_carlo };

    Verdict verdict = Verdict::inconclusive;
    Method method = Method::monte_carlo;
    std::optional<Counterexample> counterexample;
    std::size_t rollouts_used = 0;
    std::size_t traces_enumerated = 0;
    double pass_fraction = 0.0;
    double confidence = 0.95;
    double ci_low = 0.0;              // two-sided interval on the per-trace pass probability
    double ci_high = 1.0;
    std::vector<double> segment_minima;   // estimate_limit schedule diagnostics
    std::string detail;

    double failure_upper_bound() const { return 1.0 - ci_low; }
};

namespace detail {

/// Checks a notion against a precomputed signal. `tau` is consulted only for
/// resulting states (bounded notion).
inline TraceCheckResult check_signal(const FairnessNotion& notion,
                                     const std::vector<double>& f,
                                     const BoundedTrace& tau) {
    const std::size_t horizon = f.size();
    auto fail_at = [&](std::size_t t, std::string detail) {
        return TraceCheckResult{Verdict::fail, t, std::move(detail)};
    };
    auto is_one = [&](double v) { return std::abs(v - 1.0) <= kFairOneTolerance; };

    switch (notion.kind()) {
    case FairnessNotion::Kind::anytime: {
        const double threshold = 1.0 - notion.epsilon();
        const std::size_t lo = std::max<std::size_t>(1, notion.interval_lo());
        const std::size_t hi = notion.interval_hi() ? std::min(*notion.interval_hi(), horizon)
                                                    : horizon;
        for (std::size_t t = lo; t <= hi && t <= horizon; ++t) {
            if (f[t - 1] < threshold) {
                std::ostringstream os;
                os << "f_" << t << " = " << f[t - 1] << " < " << threshold;
                return fail_at(t, os.str());
            }
        }
        return {Verdict::pass, std::nullopt, ""};
    }
    case FairnessNotion::Kind::periodic: {
        const std::size_t k = notion.period();
        if (horizon < k)
            return {Verdict::inconclusive, std::nullopt,
                    "trace shorter than one period (T < k)"};
        // Windows fully inside [1, T]; a partially observed window cannot fail.
        std::size_t last_one = 0;   // largest t <= current with f_t = 1
        for (std::size_t t = 1; t <= horizon; ++t) {
            if (is_one(f[t - 1])) last_one = t;
            if (t >= k && last_one < t - k + 1) {
                std::ostringstream os;
                os << "no step with f = 1 in window [" << t - k + 1 << "," << t << "]";
                return fail_at(t - k + 1, os.str());
            }
        }
        return {Verdict::pass, std::nullopt, ""};
    }
    case FairnessNotion::Kind::exact_periodic: {
        const std::size_t k = notion.period();
        if (horizon < k)
            return {Verdict::inconclusive, std::nullopt,
                    "trace shorter than one period (T < k)"};
        for (std::size_t t = k; t <= horizon; t += k) {
            if (!is_one(f[t - 1])) {
                std::ostringstream os;
                os << "f_" << t << " = " << f[t - 1] << " != 1 at a multiple of k";
                return fail_at(t, os.str());
            }
        }
        return {Verdict::pass, std::nullopt, ""};
    }
    case FairnessNotion::Kind::bounded: {
        for (std::size_t t = 1; t <= horizon; ++t) {
            if (notion.checkpoint()(tau.result_state(t)) && !is_one(f[t - 1])) {
                std::ostringstream os;
                os << "f_" << t << " = " << f[t - 1] << " != 1 at checkpoint state";
                return fail_at(t, os.str());
            }
        }
        return {Verdict::pass, std::nullopt, ""};
    }
    case FairnessNotion::Kind::limit: {
        const std::size_t t_check =
            notion.t_check() > 0 ? notion.t_check() : std::max<std::size_t>(1, horizon / 10);
        if (t_check > horizon)
            return {Verdict::inconclusive, std::nullopt, "burn-in exceeds the trace length"};
        const double threshold = 1.0 - notion.delta();
        for (std::size_t t = t_check; t <= horizon; ++t) {
            if (f[t - 1] < threshold) {
                std::ostringstream os;
                os << "f_" << t << " = " << f[t - 1] << " < " << threshold
                   << " after burn-in t_check=" << t_check;
                return fail_at(t, os.str());
            }
        }
        return {Verdict::pass, std::nullopt, ""};
    }
    }
    throw std::logic_error("check_signal: unknown notion");
}

/// Runs fn(0..n-1); parallel when allowed. Results must be written to
/// preallocated per-index slots so aggregation order never matters.
template <typename Fn>
inline void for_each_index(std::size_t n, bool parallel, Fn&& fn) {
    const unsigned hw = std::thread::hardware_concurrency();
    if (!parallel || n < 4 || hw < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(hw, n);
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        futures.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        }));
    }
    for (auto& f : futures) f.get();
}

// Regularized incomplete beta via Lentz's continued fraction.
inline double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-14, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

inline double beta_inc(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
    return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

inline double beta_inc_inverse(double a, double b, double target) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (beta_inc(a, b, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Interval {
    double lo = 0.0, hi = 1.0;
};

/// Clopper-Pearson interval for `successes` out of `n`. Degenerate tails
/// (0 or n successes) spend all of alpha on the informative side, so the
/// zero-failure upper bound reproduces the rule of three (about 3/n).
inline Interval clopper_pearson(std::size_t successes, std::size_t n, double confidence) {
    if (n == 0) return {0.0, 1.0};
    const double alpha = 1.0 - confidence;
    const double x = static_cast<double>(successes);
    const double nn = static_cast<double>(n);
    if (successes == 0) return {0.0, 1.0 - std::pow(alpha, 1.0 / nn)};
    if (successes == n) return {std::pow(alpha, 1.0 / nn), 1.0};
    Interval iv;
    iv.lo = beta_inc_inverse(x, nn - x + 1.0, alpha / 2.0);
    iv.hi = beta_inc_inverse(x + 1.0, nn - x, 1.0 - alpha / 2.0);
    return iv;
}

inline void require_unit_range(const TraceFairness& f, const char* where) {
    if (!f.unit_range())
        throw std::invalid_argument(std::string(where) +
                                    ": fairness function must be normalized to [0,1]");
}

} // namespace detail

/// Decides a notion on one trace. The fairness function must be unit-ranged.
inline TraceCheckResult check_trace(const FairnessNotion& notion, const TraceFairness& f,
                                    const BoundedTrace& tau, const MultiStakeholderMdp& m) {
    detail::require_unit_range(f, "check_trace");
    if (tau.length() < 1)
        throw std::invalid_argument("check_trace: trace must have T >= 1 actions");
    const FairnessSignal signal = f.signal(tau, m);
    return detail::check_signal(notion, signal.values, tau);
}

/// Empirical surrogate for convergence of the fairness signal: over sampled
/// rollouts, the per-segment running minima of f_t must end above 1 - delta
/// and be nondecreasing across the horizon schedule (within sampling noise).
/// This never decides the true limit; a non-monotone trend with a passing
/// final segment is reported as inconclusive.
inline VerificationReport estimate_limit(const MultiStakeholderMdp& m, const Policy& pi,
                                         const TraceFairness& f,
                                         std::vector<std::size_t> schedule, double delta,
                                         std::size_t rollouts, std::uint64_t seed) {
    detail::require_unit_range(f, "estimate_limit");
    if (schedule.empty()) throw std::invalid_argument("estimate_limit: empty horizon schedule");
    if (!std::is_sorted(schedule.begin(), schedule.end()) || schedule.front() < 1)
        throw std::invalid_argument("estimate_limit: schedule must be increasing and >= 1");
    if (rollouts < 1) throw std::invalid_argument("estimate_limit: rollouts >= 1 required");

    const std::size_t horizon = schedule.back();
    const std::size_t segments = schedule.size();
    const Rng root(seed);

    std::vector<std::vector<double>> seg_min(rollouts, std::vector<double>(segments));
    const bool parallel = pi.concurrent_safe() && f.concurrent_safe();
    detail::for_each_index(rollouts, parallel, [&](std::size_t i) {
        Rng rng = root.split(i);
        const BoundedTrace tau = rollout(m, pi, horizon, rng);
        const FairnessSignal signal = f.signal(tau, m);
        std::size_t seg = 0;
        double running = std::numeric_limits<double>::infinity();
        for (std::size_t t = 1; t <= horizon; ++t) {
            running = std::min(running, signal.values[t - 1]);
            if (t == schedule[seg]) {
                seg_min[i][seg] = running;
                ++seg;
                running = std::numeric_limits<double>::infinity();
            }
        }
    });

    VerificationReport report;
    report.method = VerificationReport::Method::monte_carlo;
    report.rollouts_used = rollouts;
    report.segment_minima.assign(segments, 0.0);
    std::vector<double> mean(segments, 0.0), se(segments, 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
        double worst = std::numeric_limits<double>::infinity();
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t i = 0; i < rollouts; ++i) {
            worst = std::min(worst, seg_min[i][s]);
            sum += seg_min[i][s];
            sum_sq += seg_min[i][s] * seg_min[i][s];
        }
        report.segment_minima[s] = worst;
        mean[s] = sum / static_cast<double>(rollouts);
        if (rollouts > 1) {
            const double var =
                std::max(0.0, (sum_sq - sum * sum / static_cast<double>(rollouts)) /
                                  static_cast<double>(rollouts - 1));
            se[s] = std::sqrt(var / static_cast<double>(rollouts));
        }
    }

    const bool final_ok = report.segment_minima.back() >= 1.0 - delta;
    bool trend_ok = true;
    for (std::size_t s = 1; s < segments; ++s) {
        const double slack = 2.0 * std::sqrt(se[s] * se[s] + se[s - 1] * se[s - 1]) + 1e-12;
        if (mean[s] + slack < mean[s - 1]) trend_ok = false;
    }

    std::ostringstream os;
    os << "statistical surrogate over schedule {";
    for (std::size_t s = 0; s < segments; ++s) os << (s ? "," : "") << schedule[s];
    os << "}; segment minima {";
    for (std::size_t s = 0; s < segments; ++s)
        os << (s ? "," : "") << report.segment_minima[s];
    os << "}; does not decide the true limit";
    report.detail = os.str();

    if (!final_ok) {
        report.verdict = Verdict::fail;
        // Reproduce the worst rollout for the counterexample.
        std::size_t worst_i = 0;
        for (std::size_t i = 0; i < rollouts; ++i)
            if (seg_min[i].back() < seg_min[worst_i].back()) worst_i = i;
        Rng rng = root.split(worst_i);
        BoundedTrace tau = rollout(m, pi, horizon, rng);
        const FairnessSignal signal = f.signal(tau, m);
        std::size_t worst_t = schedule[segments - 1];
        const std::size_t lo = segments >= 2 ? schedule[segments - 2] + 1 : 1;
        for (std::size_t t = lo; t <= horizon; ++t)
            if (signal.values[t - 1] == seg_min[worst_i].back()) {
                worst_t = t;
                break;
            }
        report.counterexample = Counterexample{std::move(tau), worst_t};
    } else if (!trend_ok) {
        report.verdict = Verdict::inconclusive;
        report.detail += "; non-monotone trend across the schedule";
    } else {
        report.verdict = Verdict::pass;
    }
    report.pass_fraction = report.verdict == Verdict::pass ? 1.0 : 0.0;
    return report;
}

/// Smallest t1 <= max_horizon such that every sampled rollout satisfies
/// f_t >= 1 - epsilon for all t in [t1, max_horizon]; absent if none.
inline std::optional<std::size_t> find_t1(const MultiStakeholderMdp& m, const Policy& pi,
                                          const TraceFairness& f, double epsilon,
                                          std::size_t max_horizon, std::size_t rollouts,
                                          std::uint64_t seed) {
    detail::require_unit_range(f, "find_t1");
    if (max_horizon < 1 || rollouts < 1)
        throw std::invalid_argument("find_t1: max_horizon and rollouts must be >= 1");
    const Rng root(seed);
    std::vector<double> pointwise_min(max_horizon, std::numeric_limits<double>::infinity());
    std::vector<std::vector<double>> per_rollout(rollouts);
    const bool parallel = pi.concurrent_safe() && f.concurrent_safe();
    detail::for_each_index(rollouts, parallel, [&](std::size_t i) {
        Rng rng = root.split(i);
        const BoundedTrace tau = rollout(m, pi, max_horizon, rng);
        per_rollout[i] = f.signal(tau, m).values;
    });
    for (const auto& values : per_rollout)
        for (std::size_t t = 0; t < max_horizon; ++t)
            pointwise_min[t] = std::min(pointwise_min[t], values[t]);

    const double threshold = 1.0 - epsilon;
    std::optional<std::size_t> t1;
    for (std::size_t t = max_horizon; t >= 1; --t) {
        if (pointwise_min[t - 1] < threshold) break;
        t1 = t;
    }
    return t1;
}

/// Enumerates every positive-probability trace under the policy up to the
/// horizon and checks the notion on each. The first counterexample in
/// lexicographic trace order is returned. Exceeding the trace budget yields
/// an inconclusive verdict with the partial count.
inline VerificationReport verify_policy_exhaustive(const MultiStakeholderMdp& m, const Policy& pi,
                                                   const FairnessNotion& notion,
                                                   const TraceFairness& f, std::size_t horizon,
                                                   std::size_t budget = 1'000'000) {
    detail::require_unit_range(f, "verify_policy_exhaustive");
    if (horizon < 1) throw std::invalid_argument("verify_policy_exhaustive: horizon >= 1");

    // Successor lists sorted by state index so enumeration is lexicographic.
    std::vector<std::vector<std::pair<StateId, double>>> sorted_succ(
        m.num_states() * m.num_actions());
    for (std::size_t s = 0; s < m.num_states(); ++s)
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            auto row = m.successors(StateId{s}, ActionId{a});
            std::sort(row.begin(), row.end(),
                      [](const auto& x, const auto& y) { return x.first < y.first; });
            sorted_succ[s * m.num_actions() + a] = std::move(row);
        }

    VerificationReport report;
    report.method = VerificationReport::Method::exhaustive;
    report.confidence = 1.0;

    BoundedTrace tau;
    tau.start_time = 1;
    tau.states.push_back(m.init);
    bool budget_exceeded = false;
    bool any_inconclusive = false;

    // Returns true to stop the search (fail found or budget exhausted).
    std::function<bool()> dfs = [&]() -> bool {
        if (tau.length() == horizon) {
            if (report.traces_enumerated == budget) {
                budget_exceeded = true;
                return true;
            }
            ++report.traces_enumerated;
            const FairnessSignal signal = f.signal(tau, m);
            const TraceCheckResult r = detail::check_signal(notion, signal.values, tau);
            if (r.verdict == Verdict::fail) {
                report.counterexample = Counterexample{tau, r.time_step.value_or(1)};
                report.detail = r.detail;
                return true;
            }
            if (r.verdict == Verdict::inconclusive) {
                any_inconclusive = true;
                if (report.detail.empty()) report.detail = r.detail;
            }
            return false;
        }
        const std::vector<double> dist = pi.action_distribution(tau);
        if (dist.size() != m.num_actions())
            throw PolicyEvaluationError("policy distribution has wrong arity", tau.length() + 1);
        for (std::size_t a = 0; a < dist.size(); ++a) {
            if (dist[a] <= 0.0) continue;
            const auto& succ = sorted_succ[tau.states.back().index * m.num_actions() + a];
            for (const auto& [s2, p] : succ) {
                if (p <= 0.0) continue;
                tau.actions.push_back(ActionId{a});
                tau.states.push_back(s2);
                const bool stop = dfs();
                tau.actions.pop_back();
                tau.states.pop_back();
                if (stop) return true;
            }
        }
        return false;
    };
    dfs();

    if (report.counterexample) {
        report.verdict = Verdict::fail;
        report.pass_fraction = 0.0;
    } else if (budget_exceeded) {
        report.verdict = Verdict::inconclusive;
        report.detail = "trace budget exceeded after " +
                        std::to_string(report.traces_enumerated) + " traces";
    } else if (any_inconclusive) {
        report.verdict = Verdict::inconclusive;
    } else {
        report.verdict = Verdict::pass;
        report.pass_fraction = 1.0;
        report.ci_low = 1.0;
        report.ci_high = 1.0;
    }
    return report;
}

/// Statistical surrogate for the universal trace quantifier: samples rollouts
/// and checks each. Pass requires every sampled trace to pass; the report
/// always carries the binomial confidence interval on the pass probability.
/// Per-rollout substreams make the result independent of scheduling.
inline VerificationReport verify_policy_monte_carlo(const MultiStakeholderMdp& m, const Policy& pi,
                                                    const FairnessNotion& notion,
                                                    const TraceFairness& f, std::size_t horizon,
                                                    std::size_t rollouts, double confidence,
                                                    std::uint64_t seed) {
    detail::require_unit_range(f, "verify_policy_monte_carlo");
    if (rollouts < 1) throw std::invalid_argument("verify_policy_monte_carlo: rollouts >= 1");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("verify_policy_monte_carlo: confidence in (0,1)");

    const Rng root(seed);
    std::vector<Verdict> verdicts(rollouts, Verdict::inconclusive);
    std::vector<std::size_t> fail_steps(rollouts, 0);
    const bool parallel = pi.concurrent_safe() && f.concurrent_safe();
    detail::for_each_index(rollouts, parallel, [&](std::size_t i) {
        Rng rng = root.split(i);
        const BoundedTrace tau = rollout(m, pi, horizon, rng);
        const FairnessSignal signal = f.signal(tau, m);
        const TraceCheckResult r = detail::check_signal(notion, signal.values, tau);
        verdicts[i] = r.verdict;
        fail_steps[i] = r.time_step.value_or(1);
    });

    VerificationReport report;
    report.method = VerificationReport::Method::monte_carlo;
    report.rollouts_used = rollouts;
    report.confidence = confidence;

    std::size_t passes = 0;
    std::optional<std::size_t> first_fail, first_inconclusive;
    for (std::size_t i = 0; i < rollouts; ++i) {
        if (verdicts[i] == Verdict::pass) ++passes;
        else if (verdicts[i] == Verdict::fail && !first_fail) first_fail = i;
        else if (verdicts[i] == Verdict::inconclusive && !first_inconclusive)
            first_inconclusive = i;
    }
    report.pass_fraction = static_cast<double>(passes) / static_cast<double>(rollouts);
    const detail::Interval iv = detail::clopper_pearson(passes, rollouts, confidence);
    report.ci_low = iv.lo;
    report.ci_high = iv.hi;
    report.detail = "statistical verdict; the universal quantifier is not proven";

    if (first_fail) {
        report.verdict = Verdict::fail;
        Rng rng = root.split(*first_fail);
        BoundedTrace tau = rollout(m, pi, horizon, rng);
        report.counterexample = Counterexample{std::move(tau), fail_steps[*first_fail]};
    } else if (first_inconclusive) {
        report.verdict = Verdict::inconclusive;
    } else {
        report.verdict = Verdict::pass;
    }
    return report;
}

} // namespace nmfair
