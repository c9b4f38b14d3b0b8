#include "ncs/errors.hpp"

#include <fmt/format.h>

namespace ncs {

PathExplosion::PathExplosion(std::uint64_t requested_, std::uint64_t cap_)
    : Error(fmt::format("path enumeration needs {} paths, above the cap of {}; "
                        "use a smaller horizon",
                        requested_, cap_)),
      requested(requested_),
      cap(cap_) {}

GammaNotPositiveDefinite::GammaNotPositiveDefinite(int k_, int mode_, double min_eig_)
    : Error(fmt::format("Gamma is not positive definite at k={} mode={} (min eigenvalue {:.6g}); "
                        "the finite-horizon problem has no unique solution",
                        k_, mode_, min_eig_)),
      k(k_),
      mode(mode_),
      min_eig(min_eig_) {}

UpsilonNotPositiveDefinite::UpsilonNotPositiveDefinite(int k_, int mode_, double min_eig_)
    : Error(fmt::format("Upsilon is not positive definite at t={} mode={} (min eigenvalue {:.6g})",
                        k_, mode_, min_eig_)),
      k(k_),
      mode(mode_),
      min_eig(min_eig_) {}

NotConverged::NotConverged(int iterations_, double residual_)
    : Error(fmt::format("iteration did not converge after {} steps (last residual {:.6g})",
                        iterations_, residual_)),
      iterations(iterations_),
      residual(residual_) {}

ConfigError::ConfigError(std::string field_, const std::string& what)
    : Error(fmt::format("config field '{}': {}", field_, what)), field(std::move(field_)) {}

}  // namespace ncs
