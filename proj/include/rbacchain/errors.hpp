#pragma once

#include <stdexcept>
#include <string>

namespace rbacchain {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class CryptoError : public Error {
public:
    using Error::Error;
};

// rbac
class ModelValidationError : public Error {
public:
    explicit ModelValidationError(std::string name)
        : Error("model validation failed: " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class MaskLengthError : public Error {
public:
    using Error::Error;
};

class InvalidUserType : public Error {
public:
    using Error::Error;
};

class RoleNotPermitted : public Error {
public:
    using Error::Error;
};

class UnknownUser : public Error {
public:
    using Error::Error;
};

class RequestError : public Error {
public:
    using Error::Error;
};

// contract
class ContractNotFound : public Error {
public:
    using Error::Error;
};

// datastore
class SchemaError : public Error {
public:
    using Error::Error;
};

// bench / io
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace rbacchain
