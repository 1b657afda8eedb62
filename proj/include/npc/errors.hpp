#pragma once

#include <stdexcept>
#include <string>

namespace npc {

// Process exit codes used by the command line front end.
enum class ExitCode : int { ok = 0, config = 2, divergence = 3, io = 4 };

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::config; }
};

/// Invalid or inconsistent configuration (exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

/// Argument outside the validity window of a model (wavelength, temperature).
struct DomainError : ConfigError {
  using ConfigError::ConfigError;
};

/// k^2 < q^2 in exact mode: the requested mode does not propagate.
struct EvanescentError : Error {
  using Error::Error;
};

/// Operation requested for a case that has no closed form.
struct UnsupportedCase : Error {
  using Error::Error;
};

/// Non-finite field values during integration (exit code 3).
struct DivergenceError : Error {
  DivergenceError(const std::string& what, double z_um, double max_amplitude)
      : Error(what), z_um(z_um), max_amplitude(max_amplitude) {}
  ExitCode exit_code() const noexcept override { return ExitCode::divergence; }
  double z_um;
  double max_amplitude;
};

/// Adaptive integrator could not meet its tolerance with a representable step.
struct StepUnderflow : Error {
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::divergence; }
};

/// Filesystem and serialization failures (exit code 4).
struct IoError : Error {
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::io; }
};

/// Not enough data to perform a fit.
struct FitError : Error {
  using Error::Error;
};

}  // namespace npc
