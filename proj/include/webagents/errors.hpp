#pragma once

#include <stdexcept>
#include <string>

namespace webagents {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Document parsing
class MalformedDoc : public Error {
public:
    using Error::Error;
};
class DuplicateEndpoint : public Error {
public:
    using Error::Error;
};

// Model backends
class BackendError : public Error {
public:
    using Error::Error;
};
class UngeneratableDoc : public Error {
public:
    using Error::Error;
};

// Program execution
class UnresolvedReference : public Error {
public:
    using Error::Error;
};
class TransportError : public Error {
public:
    using Error::Error;
};

// Harness / evaluation
class MissingCatalog : public Error {
public:
    using Error::Error;
};
class MissingInput : public Error {
public:
    using Error::Error;
};
class MisalignedInputs : public Error {
public:
    using Error::Error;
};
class SchemaError : public Error {
public:
    using Error::Error;
};
class PortInUse : public Error {
public:
    using Error::Error;
};

} // namespace webagents
