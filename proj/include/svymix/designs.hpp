#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svymix/errors.hpp"
#include "svymix/population.hpp"
#include "svymix/rng.hpp"

namespace svymix {

enum class DesignKind { srswr, ppswr };

inline const char* to_string(DesignKind k) {
    return k == DesignKind::srswr ? "srswr" : "ppswr";
}

/// A with-replacement sampling design with a fixed number of draws.
struct DesignSpec {
    DesignKind kind;
    int n_draws;
    int population_size;
    std::optional<DrawProbabilities> draw_probs;   // required iff ppswr

    static DesignSpec srswr(int population_size, int n_draws) {
        if (n_draws < 1) throw DomainError("design: n_draws must be >= 1");
        if (population_size < 1) throw DomainError("design: population size must be >= 1");
        return {DesignKind::srswr, n_draws, population_size, std::nullopt};
    }

    static DesignSpec ppswr(int n_draws, DrawProbabilities p) {
        if (n_draws < 1) throw DomainError("design: n_draws must be >= 1");
        int n_pop = static_cast<int>(p.size());
        return {DesignKind::ppswr, n_draws, n_pop, std::move(p)};
    }
};

/// Draw sequence in selection order, repeats allowed. Labels are 1-based.
struct OrderedSample {
    std::vector<int> draws;
    std::vector<double> responses;
};

/// Distinct labels sorted ascending with their responses.
struct ReducedSample {
    std::vector<int> units;
    std::vector<double> responses;

    std::size_t nu() const { return units.size(); }
};

inline ReducedSample reduce(const OrderedSample& s) {
    std::vector<std::size_t> order(s.draws.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.draws[a] < s.draws[b]; });
    ReducedSample r;
    for (std::size_t i : order) {
        if (!r.units.empty() && r.units.back() == s.draws[i]) continue;
        r.units.push_back(s.draws[i]);
        r.responses.push_back(s.responses[i]);
    }
    return r;
}

inline OrderedSample draw(const DesignSpec& design, const Population& pop,
                          std::string_view response, Rng& rng) {
    const auto n_pop = static_cast<int>(pop.n());
    if (design.population_size != n_pop)
        throw DomainError("draw: design population size " +
                          std::to_string(design.population_size) +
                          " does not match population N=" + std::to_string(n_pop));
    const auto& y = pop.response(response);
    OrderedSample s;
    s.draws.reserve(design.n_draws);
    s.responses.reserve(design.n_draws);
    if (design.kind == DesignKind::srswr) {
        for (int i = 0; i < design.n_draws; ++i) {
            int label = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n_pop)));
            s.draws.push_back(label);
            s.responses.push_back(y[label - 1]);
        }
    } else {
        if (!design.draw_probs) throw DomainError("draw: ppswr design without draw probabilities");
        const auto& p = design.draw_probs->probs;
        std::vector<double> cum(p.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) cum[i] = (acc += p[i]);
        cum.back() = 1.0;
        for (int i = 0; i < design.n_draws; ++i) {
            double u = rng.next_unit();
            auto it = std::upper_bound(cum.begin(), cum.end(), u);
            int label = 1 + static_cast<int>(it - cum.begin());
            s.draws.push_back(label);
            s.responses.push_back(y[label - 1]);
        }
    }
    return s;
}

namespace detail {

inline long double pow_int(long double base, int e) {
    long double r = 1.0L;
    while (e > 0) {
        if (e & 1) r *= base;
        base *= base;
        e >>= 1;
    }
    return r;
}

inline void validate_labels(const DesignSpec& design, const std::vector<int>& labels) {
    for (int lab : labels)
        if (lab < 1 || lab > design.population_size)
            throw DomainError("sample: label " + std::to_string(lab) + " outside 1.." +
                              std::to_string(design.population_size));
}

}  // namespace detail

/// P(ordered sample | design): N^-n for SRSWR, product of draw probs for PPSWR.
inline double ordered_sample_prob(const DesignSpec& design, const OrderedSample& sample) {
    detail::validate_labels(design, sample.draws);
    if (design.kind == DesignKind::srswr) {
        long double inv = 1.0L / static_cast<long double>(design.population_size);
        return static_cast<double>(detail::pow_int(inv, static_cast<int>(sample.draws.size())));
    }
    const auto& p = design.draw_probs->probs;
    long double prod = 1.0L;
    for (int lab : sample.draws) prod *= p[lab - 1];
    return static_cast<double>(prod);
}

constexpr int kDefaultSubsetCap = 25;

/// Probability that the distinct-unit set of the design's n draws equals
/// `reduced.units`.
///
/// SRSWR uses the closed form (nu/N)^n [1 - sum_{k=1}^{nu} (-1)^{k-1}
/// C(nu,k) ((nu-k)/nu)^n]; PPSWR uses its unequal-probability counterpart
/// P(s) = sum_{A subset of s} (-1)^(nu-|A|) (sum_{i in A} p_i)^n, which the
/// test suite pins against full enumeration.
inline double reduced_sample_prob(const DesignSpec& design, const ReducedSample& reduced,
                                  int subset_cap = kDefaultSubsetCap) {
    detail::validate_labels(design, reduced.units);
    const int nu = static_cast<int>(reduced.nu());
    const int n = design.n_draws;
    const int n_pop = design.population_size;
    if (nu > n_pop) throw DomainError("reduced_sample_prob: nu exceeds population size");
    if (nu == 0) throw DomainError("reduced_sample_prob: empty reduced sample");
    if (nu > n) return 0.0;
    if (nu > subset_cap)
        throw EnumerationCapError("reduced_sample_prob: nu=" + std::to_string(nu) +
                                  " exceeds cap " + std::to_string(subset_cap));

    if (design.kind == DesignKind::srswr) {
        const long double base = static_cast<long double>(nu) / n_pop;
        long double inner = 0.0L;          // sum_{k=1}^{nu} (-1)^{k-1} C(nu,k) ((nu-k)/nu)^n
        long double binom = 1.0L;          // C(nu, k)
        for (int k = 1; k <= nu; ++k) {
            binom = binom * (nu - k + 1) / k;
            long double term = binom * detail::pow_int(static_cast<long double>(nu - k) / nu, n);
            inner += (k & 1) ? term : -term;
        }
        long double p = detail::pow_int(base, n) * (1.0L - inner);
        return p < 0.0L ? 0.0 : static_cast<double>(p);
    }

    const auto& p = design.draw_probs->probs;
    long double total = 0.0L;
    const std::uint64_t subsets = std::uint64_t{1} << nu;
    for (std::uint64_t mask = 1; mask < subsets; ++mask) {
        long double psum = 0.0L;
        int bits = 0;
        for (int i = 0; i < nu; ++i)
            if (mask & (std::uint64_t{1} << i)) {
                psum += p[reduced.units[i] - 1];
                ++bits;
            }
        long double term = detail::pow_int(psum, n);
        total += ((nu - bits) & 1) ? -term : term;
    }
    return total < 0.0L ? 0.0 : static_cast<double>(total);
}

constexpr double kEnumerationGuard = 1e7;

/// Oracle: sums ordered_sample_prob over every length-n sequence whose
/// distinct set equals `reduced.units`. Guarded brute force for small designs.
inline double brute_force_reduced_prob(const DesignSpec& design, const ReducedSample& reduced) {
    detail::validate_labels(design, reduced.units);
    const int n = design.n_draws;
    const int n_pop = design.population_size;
    if (std::pow(static_cast<double>(n_pop), n) > kEnumerationGuard)
        throw EnumerationCapError("brute_force_reduced_prob: N^n exceeds enumeration guard");
    const int nu = static_cast<int>(reduced.nu());
    if (nu > n) return 0.0;

    std::vector<int> seq(n, 1);
    std::vector<char> want(n_pop + 1, 0);
    for (int u : reduced.units) want[u] = 1;
    long double total = 0.0L;
    while (true) {
        std::vector<char> seen(n_pop + 1, 0);
        bool subset_ok = true;
        int distinct = 0;
        for (int v : seq) {
            if (!want[v]) { subset_ok = false; break; }
            if (!seen[v]) { seen[v] = 1; ++distinct; }
        }
        if (subset_ok && distinct == nu) {
            if (design.kind == DesignKind::srswr) {
                total += detail::pow_int(1.0L / n_pop, n);
            } else {
                const auto& p = design.draw_probs->probs;
                long double prod = 1.0L;
                for (int v : seq) prod *= p[v - 1];
                total += prod;
            }
        }
        int i = n - 1;
        while (i >= 0 && seq[i] == n_pop) seq[i--] = 1;
        if (i < 0) break;
        ++seq[i];
    }
    return static_cast<double>(total);
}

}  // namespace svymix
