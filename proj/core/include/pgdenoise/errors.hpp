#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace pgd {

// Every failure carries a stable machine-readable category; the CLI prints
// "error: <category>: <detail>" and exits 1.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& detail)
      : std::runtime_error(detail), category_(std::move(category)) {}

  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& detail)
      : Error("io-error", path + ": " + detail), path_(path) {}
  IoError(std::string category, const std::string& path, const std::string& detail)
      : Error(std::move(category), path + ": " + detail), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& detail) : Error("argument-error", detail) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& detail) : Error("domain-error", detail) {}
};

class DegenerateMaskError : public Error {
 public:
  explicit DegenerateMaskError(const std::string& detail) : Error("degenerate-mask", detail) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& detail) : Error("config-error", detail) {}
};

// Raised when a training loss turns non-finite; carries a diagnostic dump of
// the optimizer state at the point of failure.
class TrainDivergedError : public Error {
 public:
  TrainDivergedError(const std::string& detail, std::string diagnostics)
      : Error("train-diverged", detail), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const { return diagnostics_; }

 private:
  std::string diagnostics_;
};

}  // namespace pgd
