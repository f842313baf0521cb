#pragma once

#include <string>

namespace valstudy {

enum class SignRegime { sign_preserved, sign_reversed, positive_bias };

std::string to_string(SignRegime r);

struct BiasRegime {
    /// plim of the OLS slope divided by the true slope.
    double factor = 0.0;
    SignRegime regime = SignRegime::sign_preserved;
    /// Set when the mismeasured regressor has no variance (perfect
    /// cancellation of signal and error); `factor` is then NaN.
    bool degenerate = false;
};

/// Slope factor (s2x + s_xu) / (s2x + s2u + 2 s_xu) for a regressor measured
/// with error correlated with the signal. The regime is positive_bias when
/// corr < -sqrt(s2u / s2x), otherwise sign_preserved when
/// corr > -sqrt(s2x / s2u), otherwise sign_reversed.
BiasRegime bias_regime(double signal_var, double error_var, double corr_signal_error);

}  // namespace valstudy
