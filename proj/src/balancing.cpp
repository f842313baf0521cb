#include "valstudy/balancing.hpp"

#include <algorithm>
#include <map>

#include "valstudy/error.hpp"

namespace valstudy {

BalanceMode balance_mode_from_string(const std::string& s) {
    if (s == "weak") return BalanceMode::weak;
    if (s == "strong") return BalanceMode::strong;
    throw ConfigError("unknown balance mode '" + s + "' (expected weak or strong)");
}

std::string to_string(BalanceMode m) { return m == BalanceMode::weak ? "weak" : "strong"; }

namespace {

bool active(const LinkedObservation& o) {
    return o.employed && o.survey_income && *o.survey_income > 0.0 && o.register_income &&
           *o.register_income > 0.0;
}

}  // namespace

Panel assign_event_time(const Panel& panel) {
    std::vector<LinkedObservation> out;
    for (const auto& [lo, hi] : panel.unit_blocks()) {
        std::size_t first = lo;
        while (first < hi && !active(panel[first])) ++first;
        if (first == hi) continue;
        int t = 1;
        for (std::size_t i = first; i < hi; ++i) {
            if (i > first && (panel[i].period != panel[i - 1].period + 1 || !active(panel[i]))) break;
            LinkedObservation o = panel[i];
            o.event_time = t++;
            out.push_back(std::move(o));
        }
    }
    return panel_from_records(std::move(out));
}

Panel build_balanced(const Panel& panel, const BalanceSpec& spec) {
    if (spec.horizon < 1) throw ConfigError("balance.horizon must be >= 1");
    const bool assigned = std::all_of(panel.begin(), panel.end(), [](const auto& o) { return o.event_time.has_value(); });
    const Panel timed = assigned ? panel : assign_event_time(panel);
    if (spec.mode == BalanceMode::weak) return timed;

    std::map<std::string, int> run_length;
    for (const auto& o : timed) run_length[o.unit_id] = std::max(run_length[o.unit_id], *o.event_time);
    return timed.filter([&](const LinkedObservation& o) {
        return run_length[o.unit_id] >= spec.horizon && *o.event_time <= spec.horizon;
    });
}

}  // namespace valstudy
