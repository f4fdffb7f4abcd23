#pragma once

#include <string>

namespace bilipren {

/// Scalar activations with slope restricted to [0, 1].
enum class Activation { kRelu, kTanh, kSigmoid };

double activate(Activation act, double v);

/// Derivative; for ReLU the value at exactly 0 is taken as 0.
double activate_slope(Activation act, double v);

std::string to_string(Activation act);

/// Accepts "relu", "tanh", "sigmoid". Throws ArgumentError otherwise.
Activation activation_from_string(const std::string& tag);

}  // namespace bilipren
