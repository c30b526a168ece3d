#pragma once

#include <stdexcept>
#include <string>

namespace k2gof {

struct NonFiniteDensity : std::runtime_error {
  explicit NonFiniteDensity(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroMass : std::runtime_error {
  explicit ZeroMass(const std::string& what) : std::runtime_error(what) {}
};

struct RejectionStall : std::runtime_error {
  explicit RejectionStall(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfSupport : std::runtime_error {
  explicit OutOfSupport(const std::string& what) : std::runtime_error(what) {}
};

struct GridMismatch : std::runtime_error {
  explicit GridMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct SingularInformation : std::runtime_error {
  explicit SingularInformation(const std::string& what) : std::runtime_error(what) {}
};

struct SupportMismatch : std::runtime_error {
  explicit SupportMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateK : std::runtime_error {
  explicit DegenerateK(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct AuditFailure : std::runtime_error {
  explicit AuditFailure(const std::string& what) : std::runtime_error(what) {}
};

struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};

// Raised by the replication engine when the failed-replicate threshold is hit.
struct HarnessError : std::runtime_error {
  explicit HarnessError(const std::string& what) : std::runtime_error(what) {}
};

struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace k2gof
