#pragma once

#include <optional>
#include <string>
#include <vector>

#include "valstudy/panel.hpp"

namespace fixtures {

inline valstudy::LinkedObservation obs(const std::string& unit, int period, std::optional<double> survey,
                                       std::optional<double> reg, valstudy::Covariates cov = {}) {
    valstudy::LinkedObservation o;
    o.unit_id = unit;
    o.period = period;
    o.survey_income = survey;
    o.register_income = reg;
    o.covariates = std::move(cov);
    return o;
}

inline std::string data_path(const std::string& rel) { return std::string(VALSTUDY_TEST_DATA) + "/" + rel; }

}  // namespace fixtures
