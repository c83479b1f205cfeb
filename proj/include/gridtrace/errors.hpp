#ifndef GRIDTRACE_ERRORS_HPP
#define GRIDTRACE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gridtrace {

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PastEvent : SimError {
    using SimError::SimError;
};

struct PortInUse : SimError {
    using SimError::SimError;
};

struct InterfaceDown : SimError {
    using SimError::SimError;
};

struct UnknownInterface : SimError {
    using SimError::SimError;
};

struct MalformedMessage : SimError {
    using SimError::SimError;
};

struct SessionClosed : SimError {
    using SimError::SimError;
};

struct Unreachable : SimError {
    using SimError::SimError;
};

struct UnknownComponent : SimError {
    using SimError::SimError;
};

struct IoError : SimError {
    using SimError::SimError;
};

struct ParseError : SimError {
    using SimError::SimError;
};

struct DuplicateId : SimError {
    using SimError::SimError;
};

struct NoAgents : SimError {
    using SimError::SimError;
};

struct OperationFinished : SimError {
    using SimError::SimError;
};

struct BadMagic : SimError {
    using SimError::SimError;
};

struct TruncatedRecord : SimError {
    using SimError::SimError;
};

struct SchemaMismatch : SimError {
    using SimError::SimError;
};

}  // namespace gridtrace

#endif
