#ifndef IMSTAB_ERRORS_HPP
#define IMSTAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace imstab {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define IMSTAB_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                               \
      public:                                                                  \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {}     \
    }

IMSTAB_DEFINE_ERROR(EmptyPolynomial);
IMSTAB_DEFINE_ERROR(PoleHit);
IMSTAB_DEFINE_ERROR(DivideByZeroFunction);
IMSTAB_DEFINE_ERROR(DimensionMismatch);
IMSTAB_DEFINE_ERROR(AlgebraicLoop);
IMSTAB_DEFINE_ERROR(SingularMatrixFunction);
IMSTAB_DEFINE_ERROR(NonSquare);
IMSTAB_DEFINE_ERROR(ZeroMatrix);
IMSTAB_DEFINE_ERROR(SingularEliminationBlock);
IMSTAB_DEFINE_ERROR(OriginPass);
IMSTAB_DEFINE_ERROR(UnresolvedWinding);
IMSTAB_DEFINE_ERROR(OpenLoopUnstable);
IMSTAB_DEFINE_ERROR(BranchTrackingFailure);
IMSTAB_DEFINE_ERROR(NonUniformGrid);
IMSTAB_DEFINE_ERROR(InconsistentDomains);
IMSTAB_DEFINE_ERROR(OperatingPointInfeasible);
IMSTAB_DEFINE_ERROR(PortNotAvailable);
IMSTAB_DEFINE_ERROR(SymmetryViolation);
IMSTAB_DEFINE_ERROR(ConfigError);
IMSTAB_DEFINE_ERROR(SchemaError);

#undef IMSTAB_DEFINE_ERROR

}  // namespace imstab

#endif  // IMSTAB_ERRORS_HPP
