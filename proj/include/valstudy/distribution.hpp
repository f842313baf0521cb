#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valstudy/panel.hpp"

namespace valstudy {

/// Lower empirical quantile: the order statistic at rank ceil(p n), or with
/// weights the smallest value whose cumulative weight reaches p W.
double lower_quantile(std::span<const double> values, double p, std::span<const double> weights = {});

inline constexpr std::array<double, 5> kSummaryProbabilities{0.05, 0.25, 0.50, 0.75, 0.95};

struct ErrorSummary {
    double mean = 0.0;
    double sd = 0.0;
    std::array<double, 5> quantiles{};  // p5, p25, p50, p75, p95
    double share_negative = 0.0;
    /// exp of the (weighted) mean log error, whatever the notion summarized.
    double geometric_ratio = 1.0;
    std::size_t n = 0;
};

/// Summarizes the chosen error notion over observations with both incomes.
/// Weighted standard deviations use frequency weights, sum w (x - m)^2 / (W - 1).
ErrorSummary summarize_errors(const Panel& panel, ErrorNotion notion, bool weighted);

struct QuantileGroup {
    int q = 0;
    ErrorSummary summary;
};

struct QuantileProfile {
    int groups = 0;
    ErrorNotion notion = ErrorNotion::log;
    std::vector<QuantileGroup> rows;
};

/// Within each calendar year, ranks observations by register income (ties
/// by unit_id) into `groups` near-equal groups, then summarizes each group
/// pooled over years. Throws DataError naming a year with fewer
/// observations than groups.
QuantileProfile quantile_profile(const Panel& panel, int groups, ErrorNotion notion, bool weighted = false);

/// Group index (1-based) of each observation used by quantile_profile, in
/// panel order; 0 for observations without both incomes.
std::vector<int> quantile_assignment(const Panel& panel, int groups);

struct HistogramSeries {
    std::vector<double> bin_edges;     // size bins + 1
    std::vector<std::size_t> counts;   // size bins
    std::vector<double> weighted_counts;
    std::size_t underflow = 0;
    std::size_t overflow = 0;
    bool weighted = false;
    /// Mean and standard deviation of the included values, for a normal overlay.
    std::optional<std::pair<double, double>> normal_overlay;

    std::size_t included() const;
};

/// Uniform left-closed bins of `width` starting at lo, covering [lo, hi).
/// Values outside land in underflow/overflow. Throws DataError on
/// non-finite input and ConfigError on an invalid range.
HistogramSeries histogram(std::span<const double> values, double width, double lo, double hi,
                          std::span<const double> weights = {});

/// One link of a funnel: an observation belongs to the group when the named
/// variable equals `equals` (and it passed every earlier link).
struct GroupPredicate {
    std::string name;
    std::string variable;
    double equals = 1.0;
};

struct GroupStat {
    std::string group;
    std::string variable;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    double weight_sum = 0.0;
};

/// Means and standard deviations per cumulative funnel group. The first
/// group, "all", holds every observation. Weighted requests must not pool
/// core and innovation observations (their weights are not harmonized).
std::vector<GroupStat> weighted_group_summary(const Panel& panel, const std::vector<GroupPredicate>& chain,
                                              const std::vector<std::string>& variables, bool weighted);

/// Weighted mean and frequency-weight standard deviation.
std::pair<double, double> weighted_mean_sd(std::span<const double> values, std::span<const double> weights);

}  // namespace valstudy
