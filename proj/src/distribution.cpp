#include "valstudy/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "valstudy/error.hpp"

namespace valstudy {

double lower_quantile(std::span<const double> values, double p, std::span<const double> weights) {
    if (values.empty()) throw DataError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("quantile probability must lie in [0, 1]");
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });

    if (weights.empty()) {
        const double target = p * static_cast<double>(values.size());
        // Guard against p*n landing a hair above an integer through rounding.
        auto rank = static_cast<std::size_t>(std::ceil(target - 1e-9 * std::max(1.0, target)));
        rank = std::clamp<std::size_t>(rank, 1, values.size());
        return values[order[rank - 1]];
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double target = p * total;
    double cum = 0.0;
    for (auto idx : order) {
        cum += weights[idx];
        if (weights[idx] > 0.0 && cum >= target - 1e-12 * total) return values[idx];
    }
    return values[order.back()];
}

std::pair<double, double> weighted_mean_sd(std::span<const double> values, std::span<const double> weights) {
    if (values.empty()) throw DataError("summary of an empty sample");
    double wsum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        wsum += w;
        mean += w * values[i];
    }
    if (!(wsum > 0.0)) throw DataError("summary: total weight must be > 0");
    mean /= wsum;
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        ss += w * (values[i] - mean) * (values[i] - mean);
    }
    const double sd = wsum > 1.0 ? std::sqrt(ss / (wsum - 1.0)) : 0.0;
    return {mean, sd};
}

namespace {

struct ErrorSample {
    std::vector<double> values;
    std::vector<double> log_errors;
    std::vector<double> weights;
};

void append(ErrorSample& s, const LinkedObservation& o, ErrorNotion notion) {
    const auto e = compute_error_triple(o);
    s.values.push_back(error_value(e, notion));
    s.log_errors.push_back(e.log_error);
    s.weights.push_back(o.weight);
}

ErrorSummary summarize(const ErrorSample& s, bool weighted) {
    if (s.values.empty()) throw DataError("error summary: no observations with both incomes");
    std::span<const double> w = weighted ? std::span<const double>(s.weights) : std::span<const double>();
    ErrorSummary out;
    out.n = s.values.size();
    std::tie(out.mean, out.sd) = weighted_mean_sd(s.values, w);
    for (std::size_t i = 0; i < kSummaryProbabilities.size(); ++i)
        out.quantiles[i] = lower_quantile(s.values, kSummaryProbabilities[i], w);
    double neg = 0.0, total = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const double wi = weighted ? s.weights[i] : 1.0;
        total += wi;
        if (s.values[i] < 0.0) neg += wi;
    }
    out.share_negative = neg / total;
    out.geometric_ratio = std::exp(weighted_mean_sd(s.log_errors, w).first);
    return out;
}

}  // namespace

ErrorSummary summarize_errors(const Panel& panel, ErrorNotion notion, bool weighted) {
    ErrorSample s;
    for (const auto& o : panel)
        if (o.has_both_incomes()) append(s, o, notion);
    return summarize(s, weighted);
}

std::vector<int> quantile_assignment(const Panel& panel, int groups) {
    if (groups < 2) throw ConfigError("quantile profile: number of groups must be >= 2");
    std::map<int, std::vector<std::size_t>> by_year;
    for (std::size_t i = 0; i < panel.size(); ++i)
        if (panel[i].has_both_incomes()) by_year[panel[i].period].push_back(i);

    std::vector<int> assignment(panel.size(), 0);
    for (auto& [year, idx] : by_year) {
        if (idx.size() < static_cast<std::size_t>(groups))
            throw DataError("quantile profile: year " + std::to_string(year) + " has " + std::to_string(idx.size()) +
                            " observations, fewer than " + std::to_string(groups) + " groups");
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
            const double ra = *panel[a].register_income, rb = *panel[b].register_income;
            if (ra != rb) return ra < rb;
            return panel[a].unit_id < panel[b].unit_id;
        });
        const std::size_t n = idx.size();
        for (std::size_t r = 0; r < n; ++r)
            assignment[idx[r]] = static_cast<int>(r * static_cast<std::size_t>(groups) / n) + 1;
    }
    return assignment;
}

QuantileProfile quantile_profile(const Panel& panel, int groups, ErrorNotion notion, bool weighted) {
    const auto assignment = quantile_assignment(panel, groups);
    std::vector<ErrorSample> samples(static_cast<std::size_t>(groups));
    for (std::size_t i = 0; i < panel.size(); ++i)
        if (assignment[i] > 0) append(samples[static_cast<std::size_t>(assignment[i] - 1)], panel[i], notion);

    QuantileProfile prof;
    prof.groups = groups;
    prof.notion = notion;
    for (int q = 1; q <= groups; ++q)
        prof.rows.push_back({q, summarize(samples[static_cast<std::size_t>(q - 1)], weighted)});
    return prof;
}

std::size_t HistogramSeries::included() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

HistogramSeries histogram(std::span<const double> values, double width, double lo, double hi,
                          std::span<const double> weights) {
    if (!(width > 0.0) || !std::isfinite(width)) throw ConfigError("histogram: bin width must be > 0");
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("histogram: need lo < hi");
    if (!weights.empty() && weights.size() != values.size()) throw DataError("histogram: weights length mismatch");

    const auto bins = static_cast<std::size_t>(std::ceil((hi - lo) / width - 1e-9));
    HistogramSeries h;
    h.weighted = !weights.empty();
    for (std::size_t b = 0; b <= bins; ++b) h.bin_edges.push_back(lo + width * static_cast<double>(b));
    if (std::abs(h.bin_edges.back() - hi) <= 1e-9 * width) h.bin_edges.back() = hi;
    h.counts.assign(bins, 0);
    h.weighted_counts.assign(bins, 0.0);

    std::vector<double> included;
    std::vector<double> included_w;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v)) throw DataError("histogram: non-finite value at position " + std::to_string(i));
        const double w = weights.empty() ? 1.0 : weights[i];
        if (v < lo) {
            ++h.underflow;
            continue;
        }
        if (v >= h.bin_edges.back()) {
            ++h.overflow;
            continue;
        }
        auto b = static_cast<std::size_t>(std::floor((v - lo) / width));
        // Correct floating rounding at bin edges.
        if (b >= bins) b = bins - 1;
        while (b > 0 && v < h.bin_edges[b]) --b;
        while (b + 1 < bins && v >= h.bin_edges[b + 1]) ++b;
        ++h.counts[b];
        h.weighted_counts[b] += w;
        included.push_back(v);
        included_w.push_back(w);
    }
    if (!included.empty()) {
        h.normal_overlay = weighted_mean_sd(included, weights.empty() ? std::span<const double>() : included_w);
    }
    return h;
}

std::vector<GroupStat> weighted_group_summary(const Panel& panel, const std::vector<GroupPredicate>& chain,
                                              const std::vector<std::string>& variables, bool weighted) {
    if (weighted) {
        std::set<ModuleTag> tags;
        for (const auto& o : panel) tags.insert(o.module_tag);
        if (tags.size() > 1)
            throw DataError(
                "weighted group summary: observations from both the core and innovation modules; survey weights "
                "are not harmonized across modules, so request weighted summaries per module");
    }

    std::vector<const LinkedObservation*> members;
    for (const auto& o : panel) members.push_back(&o);
    for (const auto& var : variables) {
        const bool present = std::any_of(panel.begin(), panel.end(),
                                         [&](const LinkedObservation& o) { return variable_value(o, var).has_value(); });
        if (!present) throw DataError("group summary: variable '" + var + "' is not present in the panel");
    }

    std::vector<GroupStat> out;
    auto emit = [&](const std::string& group) {
        for (const auto& var : variables) {
            std::vector<double> vals, ws;
            for (const auto* o : members) {
                if (auto v = variable_value(*o, var)) {
                    vals.push_back(*v);
                    ws.push_back(o->weight);
                }
            }
            GroupStat st;
            st.group = group;
            st.variable = var;
            st.n = vals.size();
            if (!vals.empty()) {
                std::tie(st.mean, st.sd) = weighted_mean_sd(vals, weighted ? std::span<const double>(ws)
                                                                           : std::span<const double>());
                st.weight_sum = weighted ? std::accumulate(ws.begin(), ws.end(), 0.0) : static_cast<double>(vals.size());
            } else {
                st.mean = st.sd = std::nan("");
            }
            out.push_back(st);
        }
    };

    emit("all");
    for (const auto& link : chain) {
        std::erase_if(members, [&](const LinkedObservation* o) {
            auto v = variable_value(*o, link.variable);
            return !v || *v != link.equals;
        });
        emit(link.name);
    }
    return out;
}

}  // namespace valstudy
