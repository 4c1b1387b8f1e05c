#pragma once

#include <stdexcept>
#include <string>

namespace loopm {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define LOOPM_DEFINE_ERROR(Name)                                 \
    struct Name : Error {                                        \
        explicit Name(const std::string& what) : Error(what) {}  \
    }

LOOPM_DEFINE_ERROR(NonTransient);
LOOPM_DEFINE_ERROR(NegativeOffDiagonal);
LOOPM_DEFINE_ERROR(NonPositiveReference);
LOOPM_DEFINE_ERROR(SingularSolve);
LOOPM_DEFINE_ERROR(NotDualAdmissible);
LOOPM_DEFINE_ERROR(NotSymmetric);
LOOPM_DEFINE_ERROR(NonPositiveA);
LOOPM_DEFINE_ERROR(EpsilonTooLarge);
LOOPM_DEFINE_ERROR(KTooLarge);
LOOPM_DEFINE_ERROR(KUnsupported);
LOOPM_DEFINE_ERROR(SeriesDiverged);
LOOPM_DEFINE_ERROR(MarginalAsymmetry);
LOOPM_DEFINE_ERROR(Condition38Violated);
LOOPM_DEFINE_ERROR(QuadratureFailed);
LOOPM_DEFINE_ERROR(EvaluatorFailed);
LOOPM_DEFINE_ERROR(GenerationFailed);
LOOPM_DEFINE_ERROR(ConfigInvalid);

#undef LOOPM_DEFINE_ERROR

}  // namespace loopm
