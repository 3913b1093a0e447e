#pragma once

#include <stdexcept>
#include <string>

namespace kooplab {

// Process exit codes used by the CLI. Library code throws; the CLI maps.
enum class ErrorCode {
    Other = 1,
    Config = 2,
    MissingPrerequisite = 3,
    Numeric = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

#define KOOPLAB_ERROR_TYPE(Name, Code)                                        \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& msg) : Error(ErrorCode::Code, msg) {} \
    }

KOOPLAB_ERROR_TYPE(ConfigError, Config);
KOOPLAB_ERROR_TYPE(MissingPrerequisiteError, MissingPrerequisite);

KOOPLAB_ERROR_TYPE(ShapeMismatchError, Numeric);
KOOPLAB_ERROR_TYPE(StepSizeUnderflowError, Numeric);
KOOPLAB_ERROR_TYPE(WindowTooLongError, Numeric);
KOOPLAB_ERROR_TYPE(DegenerateAxisError, Numeric);
KOOPLAB_ERROR_TYPE(NonFiniteLossError, Numeric);
KOOPLAB_ERROR_TYPE(NotScalarError, Numeric);
KOOPLAB_ERROR_TYPE(DetachedNodeError, Numeric);
KOOPLAB_ERROR_TYPE(RankDeficientError, Numeric);
KOOPLAB_ERROR_TYPE(EmptyInputError, Numeric);
KOOPLAB_ERROR_TYPE(ZeroVarianceError, Numeric);
KOOPLAB_ERROR_TYPE(AllZeroDifferencesError, Numeric);
KOOPLAB_ERROR_TYPE(TooFewSamplesError, Numeric);
KOOPLAB_ERROR_TYPE(ContextOverflowError, Numeric);
KOOPLAB_ERROR_TYPE(MissingLabelsError, Numeric);

#undef KOOPLAB_ERROR_TYPE

}  // namespace kooplab
