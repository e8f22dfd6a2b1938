#pragma once

#include <stdexcept>
#include <string>

namespace chaosmom {

// Base of every error the library raises. Each subclass names one failure
// mode so callers can catch precisely what they can recover from.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CHAOSMOM_DEFINE_ERROR(Name)                                   \
    class Name : public error {                                       \
    public:                                                           \
        explicit Name(const std::string& what) : error(#Name ": " + what) {} \
    }

CHAOSMOM_DEFINE_ERROR(NonConvergent);
CHAOSMOM_DEFINE_ERROR(NoFiniteK);
CHAOSMOM_DEFINE_ERROR(PreconditionViolated);
CHAOSMOM_DEFINE_ERROR(DegenerateInput);
CHAOSMOM_DEFINE_ERROR(Unreachable);
CHAOSMOM_DEFINE_ERROR(GridTooCoarse);
CHAOSMOM_DEFINE_ERROR(NotTetrahedral);
CHAOSMOM_DEFINE_ERROR(TooLarge);
CHAOSMOM_DEFINE_ERROR(ResolutionExceeded);
CHAOSMOM_DEFINE_ERROR(ConfigInvalid);
CHAOSMOM_DEFINE_ERROR(InvalidArgument);

#undef CHAOSMOM_DEFINE_ERROR

} // namespace chaosmom
