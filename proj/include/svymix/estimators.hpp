#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "svymix/designs.hpp"
#include "svymix/errors.hpp"
#include "svymix/population.hpp"

namespace svymix {

/// Closed set of per-strategy estimators. Each carries bespoke variance math,
/// so adding one is a code change, not configuration.
enum class EstimatorId {
    expansion_total,        // N * mean of all n draws (SRSWR companion)
    hansen_hurwitz_total,   // (1/n) sum y_i / p_i over draws
    effective_mean_varhat,  // variance estimate of the effective sample mean
};

inline const char* to_string(EstimatorId e) {
    switch (e) {
        case EstimatorId::expansion_total: return "expansion_total";
        case EstimatorId::hansen_hurwitz_total: return "hansen_hurwitz_total";
        case EstimatorId::effective_mean_varhat: return "effective_mean_varhat";
    }
    return "?";
}

inline EstimatorId estimator_from_string(std::string_view s) {
    if (s == "expansion_total") return EstimatorId::expansion_total;
    if (s == "hansen_hurwitz_total") return EstimatorId::hansen_hurwitz_total;
    if (s == "effective_mean_varhat") return EstimatorId::effective_mean_varhat;
    throw SchemaError("unknown estimator '" + std::string(s) + "'");
}

struct PointAndVar {
    double point = 0.0;
    double var_hat = 0.0;
};

inline double expansion_total_point(const OrderedSample& s, int population_size) {
    const auto n = s.responses.size();
    if (n == 0) throw DomainError("expansion_total: empty sample");
    double mean = 0.0;
    for (double v : s.responses) mean += v;
    mean /= static_cast<double>(n);
    return population_size * mean;
}

/// Expansion estimator of the total under SRSWR: N * ybar with the
/// with-replacement variance estimate N^2 s^2 / n.
inline PointAndVar expansion_total(const OrderedSample& s, int population_size) {
    const auto n = s.responses.size();
    if (n < 2)
        throw UndefinedVarianceError("expansion_total: variance undefined for n < 2 "
                                     "(use expansion_total_point)");
    double mean = 0.0;
    for (double v : s.responses) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : s.responses) ss += (v - mean) * (v - mean);
    const double s2 = ss / static_cast<double>(n - 1);
    const double npop = population_size;
    return {npop * mean, npop * npop * s2 / static_cast<double>(n)};
}

inline double hansen_hurwitz_point(const OrderedSample& s, const DrawProbabilities& p) {
    const auto n = s.draws.size();
    if (n == 0) throw DomainError("hansen_hurwitz_total: empty sample");
    double point = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        point += s.responses[i] / p[static_cast<std::size_t>(s.draws[i] - 1)];
    return point / static_cast<double>(n);
}

/// Hansen-Hurwitz estimator of the total under PPSWR with its textbook
/// unbiased variance estimate.
inline PointAndVar hansen_hurwitz_total(const OrderedSample& s, const DrawProbabilities& p) {
    const auto n = s.draws.size();
    if (n < 2)
        throw UndefinedVarianceError("hansen_hurwitz_total: variance undefined for n < 2 "
                                     "(use hansen_hurwitz_point)");
    std::vector<double> z(n);
    double point = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = s.responses[i] / p[static_cast<std::size_t>(s.draws[i] - 1)];
        point += z[i];
    }
    point /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : z) ss += (v - point) * (v - point);
    const double var_hat = ss / (static_cast<double>(n) * static_cast<double>(n - 1));
    return {point, var_hat};
}

inline double effective_sample_mean(const ReducedSample& r) {
    if (r.units.empty()) throw DomainError("effective_sample_mean: empty sample");
    double m = 0.0;
    for (double v : r.responses) m += v;
    return m / static_cast<double>(r.nu());
}

/// sum_{j=1}^{N-1} j^(n-1) / N^n, evaluated as (1/N) sum (j/N)^(n-1);
/// every term lies in (0, 1], so the sum cannot overflow at any (N, n).
inline double pathak_factor(int population_size, int n_draws) {
    if (population_size < 2) throw DomainError("pathak_factor: N must be >= 2");
    if (n_draws < 1) throw DomainError("pathak_factor: n must be >= 1");
    const long double npop = population_size;
    long double sum = 0.0L;
    for (int j = 1; j < population_size; ++j)
        sum += detail::pow_int(static_cast<long double>(j) / npop, n_draws - 1);
    return static_cast<double>(sum / npop);
}

/// Exact design variance of the effective sample mean under SRSWR(n).
inline double pathak_var(const Population& pop, std::string_view response, int n_draws) {
    const auto n_pop = static_cast<int>(pop.n());
    if (n_pop < 2) throw DomainError("pathak_var: N must be >= 2");
    const auto& y = pop.response(response);
    const double mu = population_mean(pop, response);
    double ss = 0.0;
    for (double v : y) ss += (v - mu) * (v - mu);
    const double s_sq = ss / static_cast<double>(n_pop - 1);
    return pathak_factor(n_pop, n_draws) * s_sq;
}

/// Unbiased estimate of pathak_var from the distinct units of one sample;
/// undefined when nu < 2 (callers discard and count such replicates).
inline double pathak_var_estimate(const ReducedSample& r, int population_size, int n_draws) {
    const auto nu = r.nu();
    if (nu < 2)
        throw UndefinedVarianceError("pathak_var_estimate: undefined for nu < 2");
    const double ybar = effective_sample_mean(r);
    double ss = 0.0;
    for (double v : r.responses) ss += (v - ybar) * (v - ybar);
    return pathak_factor(population_size, n_draws) * ss / static_cast<double>(nu - 1);
}

}  // namespace svymix
