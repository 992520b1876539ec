#pragma once

#include <stdexcept>
#include <string>

namespace weakdyn {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StepSizeUnderflow : Error {
    using Error::Error;
};
struct DegenerateState : Error {
    using Error::Error;
};
struct InvalidPlacement : Error {
    using Error::Error;
};
struct DegenerateTestFunction : Error {
    using Error::Error;
};
struct SupportOutOfRange : Error {
    using Error::Error;
};
struct DegenerateData : Error {
    using Error::Error;
};
struct ConditionViolation : Error {
    using Error::Error;
};
struct NonFiniteLoss : Error {
    using Error::Error;
};
struct ZeroReference : Error {
    using Error::Error;
};
struct DegenerateFit : Error {
    using Error::Error;
};

} // namespace weakdyn
