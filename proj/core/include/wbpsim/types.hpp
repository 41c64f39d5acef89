#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wbpsim {

/// Simulated time. The tile clock and the system clock are unified, so one
/// cycle is the only time unit inside the simulator.
using Cycles = std::uint64_t;

using Bit = std::uint8_t;
using BitVec = std::vector<Bit>;
using Cplx = std::complex<double>;
using CplxVec = std::vector<Cplx>;
/// Natural-log LLRs, positive means bit 0 is more likely.
using LlrVec = std::vector<double>;

using ClusterId = std::uint32_t;
using TileId = std::uint32_t;
using ThreadId = std::uint32_t;
using RegionId = std::uint32_t;
using DagId = std::uint64_t;

enum class TileClass : std::uint8_t { Large, Small };

/// A protocol rule of the machine model was broken (port ownership, tile
/// state, event ordering). Fatal in strict mode.
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Caller broke an operation precondition (programming error).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DegeneratePilot : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InsufficientData : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration or description file could not be parsed. `line()` is 1-based,
/// 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace wbpsim
