#include "valstudy/bias.hpp"

#include <cmath>
#include <limits>

#include "valstudy/error.hpp"

namespace valstudy {

std::string to_string(SignRegime r) {
    switch (r) {
        case SignRegime::sign_preserved: return "sign_preserved";
        case SignRegime::sign_reversed: return "sign_reversed";
        case SignRegime::positive_bias: return "positive_bias";
    }
    return "sign_preserved";
}

BiasRegime bias_regime(double signal_var, double error_var, double corr_signal_error) {
    if (!(signal_var > 0.0)) throw DataError("bias_regime: signal variance must be > 0");
    if (!(error_var >= 0.0)) throw DataError("bias_regime: error variance must be >= 0");
    if (!(std::abs(corr_signal_error) <= 1.0)) throw DataError("bias_regime: |corr| must be <= 1");

    const double cov = corr_signal_error * std::sqrt(signal_var * error_var);
    const double num = signal_var + cov;
    const double den = signal_var + error_var + 2.0 * cov;

    BiasRegime out;
    // den = var(X* + u) >= 0; it vanishes only for corr = -1 with equal variances.
    if (!(den > 1e-14 * (signal_var + error_var))) {
        out.degenerate = true;
        out.factor = std::numeric_limits<double>::quiet_NaN();
    } else {
        out.factor = num / den;
    }

    if (error_var == 0.0) {
        out.regime = SignRegime::sign_preserved;
        return out;
    }
    const bool positive = corr_signal_error < -std::sqrt(error_var / signal_var);
    const bool preserved = corr_signal_error > -std::sqrt(signal_var / error_var);
    if (positive)
        out.regime = SignRegime::positive_bias;
    else if (preserved)
        out.regime = SignRegime::sign_preserved;
    else
        out.regime = SignRegime::sign_reversed;
    return out;
}

}  // namespace valstudy
