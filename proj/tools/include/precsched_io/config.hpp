#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "precsched/lti.hpp"
#include "precsched/precision.hpp"
#include "precsched/solver.hpp"

namespace precsched_io {

// Carries every problem found in a config file; what() joins them.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct RunConfig {
  precsched::SystemSpec sys;
  precsched::ScenarioSpec scen;
  precsched::PrecisionPair prec;
  std::optional<precsched::VariableRanges> ranges;
  std::optional<precsched::TimingMetrics> metrics;  // scenario.metrics override
  precsched::SolveLimits limits;
  double w1 = 1.0, w2 = 1.0;
};

// Strict parse: unknown keys are rejected, every violation is reported at
// once with its key path. The error bounds e_lo/e_hi may be given directly
// (external analyzer results take precedence) or derived from the variable
// ranges via the conservative per-step bound.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

// Discrete-time LQR gain in the loop's convention u = u_ss + K (x - x_ss),
// computed by Riccati fixed-point iteration. Used when a config omits K.
Eigen::MatrixXd discrete_lqr_gain(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& B,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R);

}  // namespace precsched_io
