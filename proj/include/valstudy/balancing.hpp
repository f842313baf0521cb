#pragma once

#include <string>

#include "valstudy/panel.hpp"

namespace valstudy {

enum class BalanceMode { weak, strong };

BalanceMode balance_mode_from_string(const std::string& s);
std::string to_string(BalanceMode m);

struct BalanceSpec {
    int horizon = 4;
    BalanceMode mode = BalanceMode::weak;
};

/// Event time t = 1 is each unit's first employed period with both incomes
/// present; t increments over consecutive calendar years. Everything from the
/// first gap onward is discarded, as are units that are never employed.
Panel assign_event_time(const Panel& panel);

/// Weak mode keeps every unit's full gap-free run. Strong mode keeps units
/// observed at every t in 1..horizon, truncated to exactly horizon periods.
/// Assigns event time first when the panel lacks it.
Panel build_balanced(const Panel& panel, const BalanceSpec& spec);

}  // namespace valstudy
