#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "svymix/errors.hpp"
#include "svymix/population.hpp"
#include "svymix/raoblackwell.hpp"
#include "svymix/rng.hpp"

namespace svymix {

/// Lower-tail standard normal quantile (Acklam's rational approximation,
/// |relative error| < 1.2e-9 — far below any Monte Carlo tolerance here).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > 1 - plow) {
        q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

/// Independent reproducible stream for one replicate of a seeded study.
inline Rng derive_replicate_stream(std::uint64_t master_seed, std::uint64_t replicate_index) {
    return Rng::stream(master_seed, replicate_index + 1);
}

enum class StudyKind { mixture, retrospective, generic };

inline const char* to_string(StudyKind s) {
    switch (s) {
        case StudyKind::mixture: return "mixture";
        case StudyKind::retrospective: return "retrospective";
        case StudyKind::generic: return "generic";
    }
    return "?";
}

struct StrategySpec {
    DesignKind design = DesignKind::srswr;
    EstimatorId estimator = EstimatorId::expansion_total;
    double prior = 1.0;
    int n_draws = 0;   // 0 -> study-level n_draws
};

struct StudyConfig {
    StudyKind study = StudyKind::mixture;
    std::string dataset;
    std::vector<std::string> responses;          // one for mixture, >=1 for retrospective
    std::optional<std::string> size_column;
    std::optional<std::string> label_column;

    // mixture
    std::vector<StrategySpec> strategies;
    int n_draws = 5;
    ConditioningLevel level = ConditioningLevel::ordered_sample;
    int std_reference = 0;                       // 1-based strategy row; 0 -> last

    // retrospective
    std::vector<int> sizes;                      // true-size support
    std::vector<double> size_prior;              // normalized prior over `sizes`
    std::vector<int> posited_sizes;              // analysis support (default: sizes)
    std::vector<double> posited_prior;           // prior over posited sizes
    std::optional<int> true_size;                // fixed true draw count
    std::optional<double> posited_scale_max;     // posited = min(sizes)..scale*n_true

    long long replicates = 1000;
    std::uint64_t master_seed = 1;
    double confidence_level = 0.95;
    long long scatter_sample = 2000;

    std::string echo;                            // canonical key = value form
};

struct EstimatorRow {
    std::string name;
    long long replicates = 0;
    double mean = 0.0;
    double relative_bias = 0.0;
    double variance = 0.0;
    double standardized_variance = 0.0;
    double coverage = 0.0;
    double fallback_rate = 0.0;
    long long discarded = 0;
};

struct ScatterRow {
    long long replicate = 0;
    std::string design;
    double preliminary = 0.0;
    double improved = 0.0;
};

struct StudyReport {
    std::string study;
    std::uint64_t seed = 0;
    long long replicates = 0;
    double confidence_level = 0.95;
    std::string config_echo;
    long long aborted_replicates = 0;
    long long discarded_replicates = 0;
    std::vector<EstimatorRow> rows;
    double mse_preliminary = 0.0;
    double mse_improved = 0.0;
    std::vector<ScatterRow> scatter;
};

namespace detail {

/// Streaming mean/variance cell; blocks combine in fixed order so results do
/// not depend on the worker count.
struct StatCell {
    long long count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    long long hits = 0;
    long long fallbacks = 0;
    double sum_est = 0.0;
    double sum_target = 0.0;
    double sum_sq_err = 0.0;

    void add(double v, bool hit, double target = 0.0, double sq_err = 0.0, bool fallback = false) {
        ++count;
        const double d = v - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (v - mean);
        hits += hit ? 1 : 0;
        fallbacks += fallback ? 1 : 0;
        sum_est += v;
        sum_target += target;
        sum_sq_err += sq_err;
    }

    void combine(const StatCell& o) {
        if (o.count == 0) return;
        if (count == 0) { *this = o; return; }
        const double d = o.mean - mean;
        const long long n = count + o.count;
        mean += d * static_cast<double>(o.count) / static_cast<double>(n);
        m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) /
                         static_cast<double>(n);
        count = n;
        hits += o.hits;
        fallbacks += o.fallbacks;
        sum_est += o.sum_est;
        sum_target += o.sum_target;
        sum_sq_err += o.sum_sq_err;
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double coverage() const { return count > 0 ? static_cast<double>(hits) / count : 0.0; }
};

constexpr long long kBlockSize = 4096;

/// Run `total` replicates in fixed blocks over `threads` workers and merge
/// the per-block results in block order.
template <typename Block, typename PerBlock>
std::vector<Block> run_blocks(long long total, int threads, PerBlock&& per_block) {
    const long long nblocks = (total + kBlockSize - 1) / kBlockSize;
    std::vector<Block> results(static_cast<std::size_t>(nblocks));
    std::atomic<long long> next{0};
    auto worker = [&] {
        for (;;) {
            const long long b = next.fetch_add(1);
            if (b >= nblocks) return;
            const long long lo = b * kBlockSize;
            const long long hi = std::min(total, lo + kBlockSize);
            per_block(results[static_cast<std::size_t>(b)], lo, hi);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return results;
}

/// Deterministic sorted sample of `want` distinct replicate ids in [0, total).
inline std::vector<long long> scatter_ids(std::uint64_t master_seed, long long total,
                                          long long want) {
    if (want >= total) {
        std::vector<long long> all(static_cast<std::size_t>(total));
        for (long long i = 0; i < total; ++i) all[static_cast<std::size_t>(i)] = i;
        return all;
    }
    // Floyd's sampling over a dedicated stream
    Rng rng = Rng::stream(master_seed, 0x5CA77E5ull);
    std::vector<long long> out;
    out.reserve(static_cast<std::size_t>(want));
    auto contains = [&](long long v) {
        return std::binary_search(out.begin(), out.end(), v);
    };
    for (long long j = total - want; j < total; ++j) {
        const auto t = static_cast<long long>(rng.next_below(static_cast<std::uint64_t>(j) + 1));
        const long long pick = contains(t) ? j : t;
        out.insert(std::lower_bound(out.begin(), out.end(), pick), pick);
    }
    return out;
}

inline StrategyMixture build_mixture(const StudyConfig& cfg, const Population& pop) {
    if (cfg.strategies.empty()) throw SchemaError("mixture study: no strategies configured");
    std::vector<Strategy> list;
    const int n_pop = static_cast<int>(pop.n());
    for (const auto& spec : cfg.strategies) {
        const int n = spec.n_draws > 0 ? spec.n_draws : cfg.n_draws;
        DesignSpec d = spec.design == DesignKind::srswr
                           ? DesignSpec::srswr(n_pop, n)
                           : DesignSpec::ppswr(n, draw_probabilities(pop));
        list.push_back(Strategy{std::move(d), spec.estimator, spec.prior});
    }
    return StrategyMixture::normalized(std::move(list));
}

}  // namespace detail

/// Strategy-mixture study: per replicate, a strategy is drawn from the prior,
/// a sample is drawn under its design, and the preliminary (selected) and
/// improved (Rao-Blackwellized) estimates with variance estimates and CLT
/// interval hits are aggregated. Strategy rows are conditional on selection.
inline StudyReport run_mixture_study(const StudyConfig& cfg, const Population& pop,
                                     int threads = 1) {
    if (cfg.responses.size() != 1)
        throw SchemaError("mixture study: exactly one response required");
    const std::string& response = cfg.responses.front();
    const StrategyMixture mix = detail::build_mixture(cfg, pop);
    const std::size_t m = mix.size();
    const double tau = population_total(pop, response);
    const double z = normal_quantile(0.5 + cfg.confidence_level / 2.0);

    std::vector<double> cum_prior(m);
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) cum_prior[k] = (acc += mix[k].prior);
    cum_prior.back() = 1.0;

    const auto ids = cfg.scatter_sample > 0
                         ? detail::scatter_ids(cfg.master_seed, cfg.replicates,
                                               cfg.scatter_sample)
                         : std::vector<long long>{};

    struct Block {
        std::vector<detail::StatCell> strategy_rows;
        detail::StatCell prelim, improved;
        long long aborted = 0;
        std::vector<ScatterRow> scatter;
    };

    auto blocks = detail::run_blocks<Block>(
        cfg.replicates, threads, [&](Block& blk, long long lo, long long hi) {
            blk.strategy_rows.resize(m);
            for (long long r = lo; r < hi; ++r) {
                Rng rng = derive_replicate_stream(cfg.master_seed, static_cast<std::uint64_t>(r));
                try {
                    const double u = rng.next_unit();
                    std::size_t sel = 0;
                    while (sel + 1 < m && u >= cum_prior[sel]) ++sel;
                    OrderedSample sample = draw(mix[sel].design, pop, response, rng);

                    RBResult rb = rb_var_estimate(mix, sample, cfg.level);
                    const double prelim_pt = rb.per_strategy_points[sel];
                    const double prelim_var = cfg.level == ConditioningLevel::ordered_sample
                                                  ? evaluate_var_hat(mix[sel], sample)
                                                  : detail::within_design_average(
                                                        mix[sel], reduce(sample),
                                                        kDefaultEnumerationCap,
                                                        [&](const OrderedSample& s) {
                                                            return evaluate_var_hat(mix[sel], s);
                                                        });

                    const bool hit_p = std::fabs(prelim_pt - tau) <= z * std::sqrt(prelim_var);
                    const bool hit_i = std::fabs(rb.point - tau) <= z * std::sqrt(rb.var_hat);
                    const double err_p = (prelim_pt - tau) * (prelim_pt - tau);
                    const double err_i = (rb.point - tau) * (rb.point - tau);
                    blk.strategy_rows[sel].add(prelim_pt, hit_p, tau, err_p);
                    blk.prelim.add(prelim_pt, hit_p, tau, err_p);
                    blk.improved.add(rb.point, hit_i, tau, err_i, rb.var_hat_fallback_used);
                    if (!ids.empty() && std::binary_search(ids.begin(), ids.end(), r))
                        blk.scatter.push_back(
                            {r, to_string(mix[sel].design.kind), prelim_pt, rb.point});
                } catch (const Error&) {
                    ++blk.aborted;
                }
            }
        });

    Block total;
    total.strategy_rows.resize(m);
    for (const auto& blk : blocks) {
        for (std::size_t k = 0; k < m; ++k) total.strategy_rows[k].combine(blk.strategy_rows[k]);
        total.prelim.combine(blk.prelim);
        total.improved.combine(blk.improved);
        total.aborted += blk.aborted;
        total.scatter.insert(total.scatter.end(), blk.scatter.begin(), blk.scatter.end());
    }
    if (total.aborted > cfg.replicates / 100)
        throw Error("mixture study: more than 1% of replicates aborted (" +
                    std::to_string(total.aborted) + ")");

    const std::size_t ref =
        cfg.std_reference > 0 ? static_cast<std::size_t>(cfg.std_reference - 1) : m - 1;
    if (ref >= m) throw SchemaError("mixture study: standardization reference out of range");
    const double ref_var = total.strategy_rows[ref].variance();

    StudyReport rep;
    rep.study = to_string(cfg.study);
    rep.seed = cfg.master_seed;
    rep.replicates = cfg.replicates;
    rep.confidence_level = cfg.confidence_level;
    rep.config_echo = cfg.echo;
    rep.aborted_replicates = total.aborted;
    auto push = [&](const std::string& name, const detail::StatCell& c, bool with_fb) {
        EstimatorRow row;
        row.name = name;
        row.replicates = c.count;
        row.mean = c.mean;
        row.relative_bias = c.sum_target != 0.0 ? (c.sum_est - c.sum_target) / c.sum_target : 0.0;
        row.variance = c.variance();
        row.standardized_variance = ref_var > 0.0 ? c.variance() / ref_var : 0.0;
        row.coverage = c.coverage();
        row.fallback_rate = with_fb && c.count > 0
                                ? static_cast<double>(c.fallbacks) / static_cast<double>(c.count)
                                : 0.0;
        rep.rows.push_back(row);
    };
    for (std::size_t k = 0; k < m; ++k) push(mix[k].name(), total.strategy_rows[k], false);
    push("preliminary", total.prelim, false);
    push("improved", total.improved, true);
    rep.mse_preliminary =
        total.prelim.count > 0 ? total.prelim.sum_sq_err / static_cast<double>(total.prelim.count)
                               : 0.0;
    rep.mse_improved = total.improved.count > 0
                           ? total.improved.sum_sq_err / static_cast<double>(total.improved.count)
                           : 0.0;
    rep.scatter = std::move(total.scatter);
    return rep;
}

/// Retrospective variance study: the true draw count is hidden (drawn from a
/// prior or fixed), only distinct units are observed, and three variance
/// estimators of the effective sample mean are compared per response.
inline StudyReport run_retrospective_study(const StudyConfig& cfg, const Population& pop,
                                           int threads = 1) {
    if (cfg.responses.empty()) throw SchemaError("retrospective study: no responses");
    if (cfg.sizes.empty()) throw SchemaError("retrospective study: no sizes");
    if (cfg.sizes.size() != cfg.size_prior.size())
        throw SchemaError("retrospective study: sizes/prior length mismatch");
    const int n_pop = static_cast<int>(pop.n());
    const double z = normal_quantile(0.5 + cfg.confidence_level / 2.0);
    const std::size_t n_resp = cfg.responses.size();

    std::vector<const std::vector<double>*> ys(n_resp);
    std::vector<double> mus(n_resp);
    for (std::size_t j = 0; j < n_resp; ++j) {
        ys[j] = &pop.response(cfg.responses[j]);
        mus[j] = population_mean(pop, cfg.responses[j]);
    }

    std::vector<double> cum_prior(cfg.sizes.size());
    {
        double s = 0.0;
        for (double p : cfg.size_prior) s += p;
        double acc = 0.0;
        for (std::size_t k = 0; k < cfg.sizes.size(); ++k)
            cum_prior[k] = (acc += cfg.size_prior[k] / s);
        cum_prior.back() = 1.0;
    }

    // posited support per true size (fixed, or scaled to min(sizes)..scale*n)
    const int min_size = *std::min_element(cfg.sizes.begin(), cfg.sizes.end());
    const int max_size = *std::max_element(cfg.sizes.begin(), cfg.sizes.end());
    auto posited_for = [&](int n_true) -> std::pair<std::vector<int>, std::vector<double>> {
        if (cfg.posited_scale_max) {
            const int hi = static_cast<int>(std::lround(*cfg.posited_scale_max * n_true));
            std::vector<int> sizes;
            for (int v = min_size; v <= hi; ++v) sizes.push_back(v);
            std::vector<double> prior(sizes.size(), 1.0 / static_cast<double>(sizes.size()));
            return {std::move(sizes), std::move(prior)};
        }
        std::vector<int> sizes = cfg.posited_sizes.empty() ? cfg.sizes : cfg.posited_sizes;
        std::vector<double> prior = cfg.posited_prior.empty() ? cfg.size_prior : cfg.posited_prior;
        double s = 0.0;
        for (double p : prior) s += p;
        for (double& p : prior) p /= s;
        return {std::move(sizes), std::move(prior)};
    };
    std::vector<std::pair<std::vector<int>, std::vector<double>>> posited_by_n(
        static_cast<std::size_t>(max_size) + 1);
    for (int n : cfg.sizes) posited_by_n[static_cast<std::size_t>(n)] = posited_for(n);
    if (cfg.true_size) {
        if (*cfg.true_size < 1) throw SchemaError("retrospective study: true_size < 1");
        if (*cfg.true_size > max_size)
            posited_by_n.resize(static_cast<std::size_t>(*cfg.true_size) + 1);
        posited_by_n[static_cast<std::size_t>(*cfg.true_size)] = posited_for(*cfg.true_size);
    }

    const auto ids = cfg.scatter_sample > 0
                         ? detail::scatter_ids(cfg.master_seed, cfg.replicates,
                                               cfg.scatter_sample)
                         : std::vector<long long>{};

    struct Block {
        std::vector<detail::StatCell> rows;   // 3 per response: naive, prelim, improved
        long long discarded = 0;
        long long aborted = 0;
        std::vector<ScatterRow> scatter;
    };

    auto blocks = detail::run_blocks<Block>(
        cfg.replicates, threads, [&](Block& blk, long long lo, long long hi) {
            blk.rows.resize(3 * n_resp);
            std::vector<int> labels;
            for (long long r = lo; r < hi; ++r) {
                Rng rng = derive_replicate_stream(cfg.master_seed, static_cast<std::uint64_t>(r));
                try {
                    int n_true;
                    if (cfg.true_size) {
                        n_true = *cfg.true_size;
                    } else {
                        const double u = rng.next_unit();
                        std::size_t k = 0;
                        while (k + 1 < cum_prior.size() && u >= cum_prior[k]) ++k;
                        n_true = cfg.sizes[k];
                    }
                    labels.clear();
                    for (int i = 0; i < n_true; ++i)
                        labels.push_back(
                            1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_pop))));
                    std::vector<int> units(labels);
                    std::sort(units.begin(), units.end());
                    units.erase(std::unique(units.begin(), units.end()), units.end());
                    if (units.size() < 2) {
                        ++blk.discarded;
                        continue;
                    }
                    const auto& [pos_sizes, pos_prior] =
                        posited_by_n[static_cast<std::size_t>(n_true)];
                    for (std::size_t j = 0; j < n_resp; ++j) {
                        ReducedSample red;
                        red.units = units;
                        red.responses.reserve(units.size());
                        for (int u_ : units) red.responses.push_back((*ys[j])[u_ - 1]);

                        const double naive =
                            pathak_var_estimate(red, n_pop, static_cast<int>(red.nu()));
                        const double prelim = pathak_var_estimate(red, n_pop, n_true);
                        const double improved =
                            retrospective_var(pos_sizes, pos_prior, red, n_pop).point;
                        const double target = pathak_var(pop, cfg.responses[j], n_true);
                        const double ybar = effective_sample_mean(red);
                        const double dev = std::fabs(ybar - mus[j]);

                        blk.rows[3 * j + 0].add(naive, dev <= z * std::sqrt(naive), target);
                        blk.rows[3 * j + 1].add(prelim, dev <= z * std::sqrt(prelim), target);
                        blk.rows[3 * j + 2].add(improved, dev <= z * std::sqrt(improved), target);
                        if (j == 0 && !ids.empty() &&
                            std::binary_search(ids.begin(), ids.end(), r))
                            blk.scatter.push_back({r, "srswr:" + std::to_string(n_true),
                                                   prelim, improved});
                    }
                } catch (const Error&) {
                    ++blk.aborted;
                }
            }
        });

    Block total;
    total.rows.resize(3 * n_resp);
    for (const auto& blk : blocks) {
        for (std::size_t i = 0; i < total.rows.size(); ++i) total.rows[i].combine(blk.rows[i]);
        total.discarded += blk.discarded;
        total.aborted += blk.aborted;
        total.scatter.insert(total.scatter.end(), blk.scatter.begin(), blk.scatter.end());
    }
    if (total.aborted > cfg.replicates / 100)
        throw Error("retrospective study: more than 1% of replicates aborted");

    StudyReport rep;
    rep.study = to_string(cfg.study);
    rep.seed = cfg.master_seed;
    rep.replicates = cfg.replicates;
    rep.confidence_level = cfg.confidence_level;
    rep.config_echo = cfg.echo;
    rep.aborted_replicates = total.aborted;
    rep.discarded_replicates = total.discarded;
    static const char* kRowNames[3] = {"naive", "preliminary", "improved"};
    for (std::size_t j = 0; j < n_resp; ++j) {
        const double prelim_var = total.rows[3 * j + 1].variance();
        for (int e = 0; e < 3; ++e) {
            const auto& c = total.rows[3 * j + e];
            EstimatorRow row;
            row.name = cfg.responses[j] + "/" + kRowNames[e];
            row.replicates = c.count;
            row.mean = c.mean;
            row.relative_bias =
                c.sum_target != 0.0 ? (c.sum_est - c.sum_target) / c.sum_target : 0.0;
            row.variance = c.variance();
            row.standardized_variance = prelim_var > 0.0 ? c.variance() / prelim_var : 0.0;
            row.coverage = c.coverage();
            row.discarded = total.discarded;
            rep.rows.push_back(row);
        }
    }
    rep.mse_preliminary = 0.0;
    rep.mse_improved = 0.0;
    rep.scatter = std::move(total.scatter);
    return rep;
}

inline StudyReport run_study(const StudyConfig& cfg, const Population& pop, int threads = 1) {
    switch (cfg.study) {
        case StudyKind::mixture:
        case StudyKind::generic:
            return run_mixture_study(cfg, pop, threads);
        case StudyKind::retrospective:
            return run_retrospective_study(cfg, pop, threads);
    }
    throw Error("unreachable study kind");
}

}  // namespace svymix
