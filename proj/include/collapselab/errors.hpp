#ifndef COLLAPSELAB_ERRORS_HPP
#define COLLAPSELAB_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace collapselab {

// Base class for every error raised by the lab; carries a short machine tag
// in addition to the human message so reports can record structured failures.
class LabError : public std::runtime_error {
public:
  LabError(std::string tag, const std::string& msg)
      : std::runtime_error(msg), tag_(std::move(tag)) {}
  const std::string& tag() const { return tag_; }

private:
  std::string tag_;
};

struct SingularPoint : LabError {
  explicit SingularPoint(const std::string& msg) : LabError("SingularPoint", msg) {}
};

struct UnsupportedOrder : LabError {
  explicit UnsupportedOrder(const std::string& msg) : LabError("UnsupportedOrder", msg) {}
};

struct LeftChartDomain : LabError {
  LeftChartDomain(const std::string& msg, std::vector<double> exit)
      : LabError("LeftChartDomain", msg), exit_coords(std::move(exit)) {}
  std::vector<double> exit_coords;
};

struct NoConvergence : LabError {
  NoConvergence(const std::string& msg, double residual, std::vector<double> best)
      : LabError("NoConvergence", msg), best_residual(residual), best_value(std::move(best)) {}
  double best_residual = 0.0;
  std::vector<double> best_value;
};

struct KMaxTooSmall : LabError {
  explicit KMaxTooSmall(const std::string& msg) : LabError("KMaxTooSmall", msg) {}
};

struct WindowTooSmall : LabError {
  explicit WindowTooSmall(const std::string& msg) : LabError("WindowTooSmall", msg) {}
};

struct IncompleteSearch : LabError {
  explicit IncompleteSearch(const std::string& msg) : LabError("IncompleteSearch", msg) {}
};

struct ScaleTooLarge : LabError {
  explicit ScaleTooLarge(const std::string& msg) : LabError("ScaleTooLarge", msg) {}
};

struct LeftBall : LabError {
  explicit LeftBall(const std::string& msg) : LabError("LeftBall", msg) {}
};

struct NoLifts : LabError {
  explicit NoLifts(const std::string& msg) : LabError("NoLifts", msg) {}
};

struct QuadratureFailure : LabError {
  explicit QuadratureFailure(const std::string& msg) : LabError("QuadratureFailure", msg) {}
};

struct OpenFiber : LabError {
  explicit OpenFiber(const std::string& msg) : LabError("OpenFiber", msg) {}
};

struct EmptyWindow : LabError {
  explicit EmptyWindow(const std::string& msg) : LabError("EmptyWindow", msg) {}
};

struct NonPositiveValue : LabError {
  explicit NonPositiveValue(const std::string& msg) : LabError("NonPositiveValue", msg) {}
};

struct ChartExceeded : LabError {
  explicit ChartExceeded(const std::string& msg) : LabError("ChartExceeded", msg) {}
};

struct ConfigError : LabError {
  ConfigError(const std::string& field, const std::string& msg)
      : LabError("ConfigError", field + ": " + msg), field_path(field) {}
  std::string field_path;
};

struct IntegrationError : LabError {
  explicit IntegrationError(const std::string& msg) : LabError("IntegrationError", msg) {}
};

}  // namespace collapselab

#endif
