#pragma once

#include <stdexcept>
#include <string>

namespace polyhess {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// grid
struct NonHermitianInput : Error { using Error::Error; };
struct NonFiniteSample : Error { using Error::Error; };
struct BadFactor : Error { using Error::Error; };
struct BadGrid : Error { using Error::Error; };

// spectral_ops
struct NonZeroMean : Error { using Error::Error; };
struct DegenerateRatio : Error { using Error::Error; };

// kernels
struct InadmissibleOrder : Error { using Error::Error; };
struct CostCapExceeded : Error { using Error::Error; };
struct SupportTooLarge : Error { using Error::Error; };

// khessian
struct BadK : Error { using Error::Error; };

// analysis
struct BadP : Error { using Error::Error; };
struct CubeTooSmall : Error { using Error::Error; };
struct EmptyBall : Error { using Error::Error; };
struct BadCube : Error { using Error::Error; };

// solver
struct NotAdmissible : Error { using Error::Error; };

// fixedpoint
struct PointOutsideSet : Error { using Error::Error; };
struct FinderStalled : Error { using Error::Error; };

// cli
struct ConfigError : Error { using Error::Error; };
struct ComputeError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace polyhess
