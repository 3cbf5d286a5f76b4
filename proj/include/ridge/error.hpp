#pragma once

#include <stdexcept>
#include <string>

namespace ridge {

// Shapes of two operands disagree.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A scalar argument is outside its documented domain.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Spectrum with no strictly positive eigenvalue (total information collapse).
struct DegenerateSpectrumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gradient descent produced a non-finite loss or increased the loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int neuron, long epoch)
      : std::runtime_error(what), neuron_(neuron), epoch_(epoch) {}
  int neuron() const noexcept { return neuron_; }
  long epoch() const noexcept { return epoch_; }

 private:
  int neuron_;
  long epoch_;
};

// Malformed configuration or artifact file. line() is 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Grid of cells cannot be laid out as a rectangle.
struct LayoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unflagged non-finite metric handed to a renderer.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ridge
