#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace ladmm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem data inconsistent with itself (shapes, block partition, ...).
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operation requested in a state where it is not defined.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Power iteration failed to reach its tolerance.
class SpectralError : public Error {
 public:
  SpectralError(const std::string& what, double last_estimate)
      : Error(what), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

/// B is numerically rank deficient (smallest Gram eigenvalue below threshold).
class RankError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (CLI flags, generator parameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A runtime lemma check failed; names the lemma and the iteration.
class DiagnosticError : public Error {
 public:
  DiagnosticError(std::string lemma, long iteration, const std::string& what)
      : Error(what), lemma_(std::move(lemma)), iteration_(iteration) {}
  const std::string& lemma() const noexcept { return lemma_; }
  long iteration() const noexcept { return iteration_; }

 private:
  std::string lemma_;
  long iteration_;
};

}  // namespace ladmm
