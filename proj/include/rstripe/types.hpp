#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rstripe {

using cd = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kMu0 = 1.25663706212e-6;
inline constexpr double kEps0 = 1.0 / (kMu0 * kSpeedOfLight * kSpeedOfLight);
inline constexpr cd kJ{0.0, 1.0};

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Configuration problems map to CLI exit code 1.
struct ConfigError : Error {
  using Error::Error;
};

struct SchemaError : ConfigError {
  std::string field;
  SchemaError(const std::string& field_path, const std::string& what)
      : ConfigError(field_path + ": " + what), field(field_path) {}
};

struct SemanticError : ConfigError {
  using ConfigError::ConfigError;
};

// Everything below maps to CLI exit code 2.
struct NumericalFailure : Error {
  using Error::Error;
};

struct DegenerateGeometry : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

struct SingularFim : NumericalFailure {
  VecX null_direction;
  SingularFim(const std::string& what, VecX dir)
      : NumericalFailure(what), null_direction(std::move(dir)) {}
};

struct RankDeficient : NumericalFailure {
  double condition;
  RankDeficient(const std::string& what, double cond)
      : NumericalFailure(what), condition(cond) {}
};

struct ZeroAggregate : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

struct KernelEmpty : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

struct SearchFailure : NumericalFailure {
  using NumericalFailure::NumericalFailure;
};

}  // namespace rstripe
