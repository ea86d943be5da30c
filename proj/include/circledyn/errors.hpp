#pragma once

#include <stdexcept>
#include <string>

namespace circledyn {

// Contract violations and domain failures. code() is a stable machine-readable tag.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define CIRCLEDYN_ERROR(Name)                                                  \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    };

CIRCLEDYN_ERROR(OverlapError)
CIRCLEDYN_ERROR(DegenerateMatrix)
CIRCLEDYN_ERROR(DetMinusOne)
CIRCLEDYN_ERROR(IdentityInput)
CIRCLEDYN_ERROR(InvalidArgument)
CIRCLEDYN_ERROR(NotReduced)
CIRCLEDYN_ERROR(EmptyBase)
CIRCLEDYN_ERROR(FullCircleArc)
CIRCLEDYN_ERROR(DegenerateConstant)
CIRCLEDYN_ERROR(PointOutsideArc)
CIRCLEDYN_ERROR(BudgetExceeded)
CIRCLEDYN_ERROR(NoReturn)
CIRCLEDYN_ERROR(FamilyIncomplete)
CIRCLEDYN_ERROR(NumericBlowup)
CIRCLEDYN_ERROR(AllUnknown)
CIRCLEDYN_ERROR(NoEndpointFixer)
CIRCLEDYN_ERROR(WanderingConfiguration)
CIRCLEDYN_ERROR(CycleInconsistency)
CIRCLEDYN_ERROR(CoverGap)
CIRCLEDYN_ERROR(GridHitsIndeterminacy)
CIRCLEDYN_ERROR(NotSchottky)
CIRCLEDYN_ERROR(NoProgress)
CIRCLEDYN_ERROR(ParseError)

#undef CIRCLEDYN_ERROR

}  // namespace circledyn
