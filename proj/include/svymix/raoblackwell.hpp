#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "svymix/designs.hpp"
#include "svymix/errors.hpp"
#include "svymix/estimators.hpp"
#include "svymix/population.hpp"

namespace svymix {

/// A sampling design paired with its estimator and a selection prior.
struct Strategy {
    DesignSpec design;
    EstimatorId estimator;
    double prior;

    std::string name() const {
        return std::string(to_string(design.kind)) + "+" + to_string(estimator);
    }
};

/// Ordered nonempty list of strategies whose priors sum to 1.
class StrategyMixture {
  public:
    explicit StrategyMixture(std::vector<Strategy> strategies) {
        for (auto& st : strategies) {
            if (st.prior < 0.0) throw DomainError("strategy prior must be nonnegative");
            if (st.prior == 0.0) continue;   // zero-prior strategies are dropped
            strategies_.push_back(std::move(st));
        }
        if (strategies_.empty()) throw DomainError("mixture: no strategy with positive prior");
        double sum = 0.0;
        for (const auto& st : strategies_) sum += st.prior;
        if (std::fabs(sum - 1.0) > 1e-12)
            throw DomainError("mixture: priors sum to " + std::to_string(sum) +
                              ", expected 1 within 1e-12");
    }

    /// Rescale nearly-normalized priors (config tolerance 1e-9) to an exact sum of 1.
    static StrategyMixture normalized(std::vector<Strategy> strategies) {
        double sum = 0.0;
        for (const auto& st : strategies)
            if (st.prior > 0.0) sum += st.prior;
        if (sum <= 0.0) throw DomainError("mixture: total prior mass is zero");
        if (std::fabs(sum - 1.0) > 1e-9)
            throw DomainError("mixture: priors sum to " + std::to_string(sum) +
                              ", expected 1 within 1e-9");
        for (auto& st : strategies) st.prior /= sum;
        return StrategyMixture(std::move(strategies));
    }

    const std::vector<Strategy>& strategies() const { return strategies_; }
    std::size_t size() const { return strategies_.size(); }
    const Strategy& operator[](std::size_t i) const { return strategies_[i]; }

  private:
    std::vector<Strategy> strategies_;
};

/// Which sufficient-statistic level the cross-strategy average conditions on:
/// the full ordered draw sequence, or only the distinct-unit set.
enum class ConditioningLevel { reduced_set, ordered_sample };

inline const char* to_string(ConditioningLevel l) {
    return l == ConditioningLevel::reduced_set ? "reduced" : "ordered";
}

struct RBResult {
    double point = 0.0;
    std::vector<double> weights;              // posterior strategy weights
    std::vector<double> per_strategy_points;  // 0 where the weight is 0
    double var_hat = 0.0;
    bool var_hat_fallback_used = false;
};

constexpr std::int64_t kDefaultEnumerationCap = 1'000'000;

inline double evaluate_point(const Strategy& st, const OrderedSample& s) {
    switch (st.estimator) {
        case EstimatorId::expansion_total:
            return expansion_total_point(s, st.design.population_size);
        case EstimatorId::hansen_hurwitz_total:
            return hansen_hurwitz_point(s, *st.design.draw_probs);
        case EstimatorId::effective_mean_varhat:
            return pathak_var_estimate(reduce(s), st.design.population_size, st.design.n_draws);
    }
    throw Error("unreachable estimator tag");
}

inline double evaluate_var_hat(const Strategy& st, const OrderedSample& s) {
    switch (st.estimator) {
        case EstimatorId::expansion_total:
            return expansion_total(s, st.design.population_size).var_hat;
        case EstimatorId::hansen_hurwitz_total:
            return hansen_hurwitz_total(s, *st.design.draw_probs).var_hat;
        case EstimatorId::effective_mean_varhat:
            throw UndefinedVarianceError(
                "effective_mean_varhat carries no variance-of-variance estimator");
    }
    throw Error("unreachable estimator tag");
}

namespace detail {

/// Average f over all draw sequences whose distinct set equals reduced.units,
/// weighted by the sequence probabilities under the strategy's design.
template <typename F>
double within_design_average(const Strategy& st, const ReducedSample& reduced,
                             std::int64_t enumeration_cap, F&& f) {
    const int nu = static_cast<int>(reduced.nu());
    const int n = st.design.n_draws;
    if (nu > n)
        throw DomainError("rb_within_design: nu exceeds the design's draw count");
    double seq_count = std::pow(static_cast<double>(nu), n);
    if (seq_count > static_cast<double>(enumeration_cap))
        throw EnumerationCapError("rb_within_design: nu^n exceeds enumeration cap " +
                                  std::to_string(enumeration_cap));
    std::vector<int> idx(n, 0);
    OrderedSample seq;
    seq.draws.resize(n);
    seq.responses.resize(n);
    long double num = 0.0L, den = 0.0L;
    while (true) {
        std::uint64_t mask = 0;
        for (int i = 0; i < n; ++i) mask |= std::uint64_t{1} << idx[i];
        if (mask == (std::uint64_t{1} << nu) - 1) {   // covers every distinct unit
            for (int i = 0; i < n; ++i) {
                seq.draws[i] = reduced.units[idx[i]];
                seq.responses[i] = reduced.responses[idx[i]];
            }
            const double p = ordered_sample_prob(st.design, seq);
            num += static_cast<long double>(f(seq)) * p;
            den += p;
        }
        int i = n - 1;
        while (i >= 0 && idx[i] == nu - 1) idx[i--] = 0;
        if (i < 0) break;
        ++idx[i];
    }
    if (den == 0.0L)
        throw DomainError("rb_within_design: reduced sample has zero probability");
    return static_cast<double>(num / den);
}

}  // namespace detail

/// Within-design Rao-Blackwellization: the estimator averaged over every
/// ordering (and multiplicity pattern) compatible with the reduced sample.
inline double rb_within_design(const Strategy& st, const ReducedSample& reduced,
                               std::int64_t enumeration_cap = kDefaultEnumerationCap) {
    if (st.estimator == EstimatorId::effective_mean_varhat)   // depends on reduced data only
        return pathak_var_estimate(reduced, st.design.population_size, st.design.n_draws);
    return detail::within_design_average(st, reduced, enumeration_cap,
                                         [&](const OrderedSample& s) { return evaluate_point(st, s); });
}

namespace detail {

struct StrategyEval {
    std::vector<double> data_prob;
    std::vector<double> weights;
};

inline StrategyEval posterior_weights(const StrategyMixture& mix,
                                      const std::vector<double>& data_prob) {
    StrategyEval ev;
    ev.data_prob = data_prob;
    ev.weights.resize(mix.size());
    long double total = 0.0L;
    for (std::size_t k = 0; k < mix.size(); ++k)
        total += static_cast<long double>(mix[k].prior) * data_prob[k];
    if (total <= 0.0L)
        throw ImpossibleSampleError("sample has zero probability under every strategy");
    for (std::size_t k = 0; k < mix.size(); ++k)
        ev.weights[k] = static_cast<double>(mix[k].prior * data_prob[k] / static_cast<double>(total));
    return ev;
}

inline void check_rb_invariants(const RBResult& r) {
    double wsum = 0.0;
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t k = 0; k < r.weights.size(); ++k) {
        if (r.weights[k] < 0.0) throw Error("rb: negative posterior weight");
        wsum += r.weights[k];
        if (r.weights[k] > 0.0) {
            const double pt = r.per_strategy_points[k];
            lo = any ? std::min(lo, pt) : pt;
            hi = any ? std::max(hi, pt) : pt;
            any = true;
        }
    }
    if (std::fabs(wsum - 1.0) > 1e-12) throw Error("rb: posterior weights do not sum to 1");
    const double slack = 1e-9 * (std::fabs(lo) + std::fabs(hi) + 1.0);
    if (!(r.point >= lo - slack && r.point <= hi + slack))
        throw Error("rb: point escapes the convex hull of strategy points");
}

}  // namespace detail

/// Cross-strategy Rao-Blackwellized point estimate from an ordered sample.
///
/// Posterior weight of each strategy is prior * P(data | design), where the
/// data is the full draw sequence or its distinct-unit set per `level`.
/// Strategies that cannot produce the data contribute a zero-weight zero.
inline RBResult rb_point(const StrategyMixture& mix, const OrderedSample& sample,
                         ConditioningLevel level,
                         std::int64_t enumeration_cap = kDefaultEnumerationCap) {
    std::vector<double> prob(mix.size());
    ReducedSample red;
    if (level == ConditioningLevel::reduced_set) red = reduce(sample);
    for (std::size_t k = 0; k < mix.size(); ++k) {
        const auto& st = mix[k];
        prob[k] = level == ConditioningLevel::ordered_sample
                      ? (st.design.n_draws == static_cast<int>(sample.draws.size())
                             ? ordered_sample_prob(st.design, sample)
                             : 0.0)
                      : reduced_sample_prob(st.design, red);
    }
    auto ev = detail::posterior_weights(mix, prob);
    RBResult r;
    r.weights = ev.weights;
    r.per_strategy_points.resize(mix.size(), 0.0);
    long double acc = 0.0L;
    for (std::size_t k = 0; k < mix.size(); ++k) {
        if (ev.weights[k] == 0.0) continue;
        r.per_strategy_points[k] =
            level == ConditioningLevel::ordered_sample
                ? evaluate_point(mix[k], sample)
                : rb_within_design(mix[k], red, enumeration_cap);
        acc += static_cast<long double>(ev.weights[k]) * r.per_strategy_points[k];
    }
    r.point = static_cast<double>(acc);
    detail::check_rb_invariants(r);
    return r;
}

/// Reduced-sample overload: only the distinct-unit set was observed.
inline RBResult rb_point(const StrategyMixture& mix, const ReducedSample& red,
                         std::int64_t enumeration_cap = kDefaultEnumerationCap) {
    std::vector<double> prob(mix.size());
    for (std::size_t k = 0; k < mix.size(); ++k)
        prob[k] = reduced_sample_prob(mix[k].design, red);
    auto ev = detail::posterior_weights(mix, prob);
    RBResult r;
    r.weights = ev.weights;
    r.per_strategy_points.resize(mix.size(), 0.0);
    long double acc = 0.0L;
    for (std::size_t k = 0; k < mix.size(); ++k) {
        if (ev.weights[k] == 0.0) continue;
        r.per_strategy_points[k] = rb_within_design(mix[k], red, enumeration_cap);
        acc += static_cast<long double>(ev.weights[k]) * r.per_strategy_points[k];
    }
    r.point = static_cast<double>(acc);
    detail::check_rb_invariants(r);
    return r;
}

/// Point estimate plus the two-term variance estimate:
///   A = weighted per-strategy variance estimates,
///   B = weighted squared spread of per-strategy points around the RB point,
/// var_hat = A - B, falling back to the conservative A when A - B < 0.
inline RBResult rb_var_estimate(const StrategyMixture& mix, const OrderedSample& sample,
                                ConditioningLevel level,
                                std::int64_t enumeration_cap = kDefaultEnumerationCap) {
    RBResult r = rb_point(mix, sample, level, enumeration_cap);
    ReducedSample red;
    if (level == ConditioningLevel::reduced_set) red = reduce(sample);
    long double a = 0.0L, b = 0.0L;
    for (std::size_t k = 0; k < mix.size(); ++k) {
        if (r.weights[k] == 0.0) continue;
        const auto& st = mix[k];
        const double vk =
            level == ConditioningLevel::ordered_sample
                ? evaluate_var_hat(st, sample)
                : detail::within_design_average(st, red, enumeration_cap,
                                                [&](const OrderedSample& s) {
                                                    return evaluate_var_hat(st, s);
                                                });
        const double d = r.per_strategy_points[k] - r.point;
        a += static_cast<long double>(r.weights[k]) * vk;
        b += static_cast<long double>(r.weights[k]) * d * d;
    }
    const double est = static_cast<double>(a - b);
    if (est < 0.0) {
        r.var_hat = static_cast<double>(a);
        r.var_hat_fallback_used = true;
    } else {
        r.var_hat = est;
        r.var_hat_fallback_used = false;
    }
    return r;
}

/// Retrospective Rao-Blackwellized variance estimate of the effective sample
/// mean when the draw count is unknown: posited SRSWR sizes with a prior,
/// weighted by the probability of the observed distinct-unit set.
inline RBResult retrospective_var(const std::vector<int>& posited_sizes,
                                  const std::vector<double>& size_prior,
                                  const ReducedSample& reduced, int population_size) {
    if (posited_sizes.empty() || posited_sizes.size() != size_prior.size())
        throw DomainError("retrospective_var: sizes/prior length mismatch");
    double psum = 0.0;
    for (double p : size_prior) {
        if (p < 0.0) throw DomainError("retrospective_var: negative prior");
        psum += p;
    }
    if (std::fabs(psum - 1.0) > 1e-9)
        throw DomainError("retrospective_var: size prior sums to " + std::to_string(psum));
    if (reduced.nu() < 2)
        throw UndefinedVarianceError("retrospective_var: undefined for nu < 2");

    const std::size_t m = posited_sizes.size();
    std::vector<double> prob(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (posited_sizes[k] < 1) throw DomainError("retrospective_var: posited size < 1");
        prob[k] = reduced_sample_prob(DesignSpec::srswr(population_size, posited_sizes[k]),
                                      reduced);
    }
    long double total = 0.0L;
    for (std::size_t k = 0; k < m; ++k)
        total += static_cast<long double>(size_prior[k] / psum) * prob[k];
    if (total <= 0.0L)
        throw ImpossibleSampleError(
            "retrospective_var: observed distinct-unit count exceeds every posited size");

    RBResult r;
    r.weights.resize(m);
    r.per_strategy_points.resize(m, 0.0);
    long double acc = 0.0L;
    for (std::size_t k = 0; k < m; ++k) {
        r.weights[k] = static_cast<double>((size_prior[k] / psum) * prob[k] /
                                           static_cast<double>(total));
        if (r.weights[k] == 0.0) continue;
        r.per_strategy_points[k] =
            pathak_var_estimate(reduced, population_size, posited_sizes[k]);
        acc += static_cast<long double>(r.weights[k]) * r.per_strategy_points[k];
    }
    r.point = static_cast<double>(acc);
    detail::check_rb_invariants(r);
    return r;
}

struct MixtureMoments {
    double expectation = 0.0;
    double var_preliminary = 0.0;
    double var_rb = 0.0;
};

/// Exact mixture moments by exhaustive enumeration (tiny populations only).
///
/// Enumerates every draw sequence of every design, groups sequences into
/// conditioning classes, and evaluates the exact expectation, the variance of
/// the preliminary estimate, and the variance of the Rao-Blackwellized
/// estimate both by decomposition and directly (the two must agree).
inline MixtureMoments exact_mixture_moments(const StrategyMixture& mix, const Population& pop,
                                            std::string_view response,
                                            ConditioningLevel level = ConditioningLevel::reduced_set,
                                            std::int64_t enumeration_cap = kDefaultEnumerationCap) {
    const int n_pop = static_cast<int>(pop.n());
    if (n_pop > 62) throw EnumerationCapError("exact_mixture_moments: N too large to enumerate");
    const auto& y = pop.response(response);

    struct ClassAcc {
        std::vector<double> den;   // P(class | design_k)
        std::vector<double> num;   // sum of estimate * P over the class
    };
    // key: distinct-unit mask at reduced level; (n, sequence rank) when ordered
    std::map<std::pair<std::int64_t, std::uint64_t>, ClassAcc> classes;
    const std::size_t m = mix.size();

    for (std::size_t k = 0; k < m; ++k) {
        const auto& st = mix[k];
        if (st.design.population_size != n_pop)
            throw DomainError("exact_mixture_moments: design/population size mismatch");
        const int n = st.design.n_draws;
        if (std::pow(static_cast<double>(n_pop), n) > static_cast<double>(enumeration_cap))
            throw EnumerationCapError("exact_mixture_moments: N^n exceeds enumeration cap");
        OrderedSample seq;
        seq.draws.assign(n, 1);
        seq.responses.assign(n, 0.0);
        std::uint64_t rank = 0;
        while (true) {
            for (int i = 0; i < n; ++i) seq.responses[i] = y[seq.draws[i] - 1];
            const double p = ordered_sample_prob(st.design, seq);
            std::pair<std::int64_t, std::uint64_t> key;
            if (level == ConditioningLevel::reduced_set) {
                std::uint64_t mask = 0;
                for (int v : seq.draws) mask |= std::uint64_t{1} << (v - 1);
                key = {-1, mask};
            } else {
                key = {n, rank};
            }
            auto& acc = classes[key];
            if (acc.den.empty()) {
                acc.den.assign(m, 0.0);
                acc.num.assign(m, 0.0);
            }
            acc.den[k] += p;
            acc.num[k] += evaluate_point(st, seq) * p;

            ++rank;
            int i = n - 1;
            while (i >= 0 && seq.draws[i] == n_pop) seq.draws[i--] = 1;
            if (i < 0) break;
            ++seq.draws[i];
        }
    }

    long double expectation = 0.0L;
    for (const auto& [key, acc] : classes)
        for (std::size_t k = 0; k < m; ++k)
            expectation += static_cast<long double>(mix[k].prior) * acc.num[k];

    long double var_prelim = 0.0L, cond_var = 0.0L, var_rb_direct = 0.0L;
    for (const auto& [key, acc] : classes) {
        long double class_prob = 0.0L, rb_num = 0.0L;
        for (std::size_t k = 0; k < m; ++k) {
            class_prob += static_cast<long double>(mix[k].prior) * acc.den[k];
            rb_num += static_cast<long double>(mix[k].prior) * acc.num[k];
        }
        if (class_prob <= 0.0L) continue;
        const long double rb = rb_num / class_prob;
        for (std::size_t k = 0; k < m; ++k) {
            if (acc.den[k] <= 0.0) continue;
            const long double est_k = static_cast<long double>(acc.num[k]) / acc.den[k];
            const long double w = static_cast<long double>(mix[k].prior) * acc.den[k];
            var_prelim += (est_k - expectation) * (est_k - expectation) * w;
            cond_var += (est_k - rb) * (est_k - rb) * w;
        }
        var_rb_direct += (rb - expectation) * (rb - expectation) * class_prob;
    }
    const long double var_rb_decomp = var_prelim - cond_var;
    const long double scale = std::max<long double>(1.0L, var_prelim);
    if (std::fabs(static_cast<double>(var_rb_direct - var_rb_decomp)) > 1e-10 * scale)
        throw Error("exact_mixture_moments: variance decomposition disagrees with direct form");

    return {static_cast<double>(expectation), static_cast<double>(var_prelim),
            static_cast<double>(var_rb_direct)};
}

}  // namespace svymix
