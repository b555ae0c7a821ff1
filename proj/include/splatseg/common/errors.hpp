#pragma once

#include <stdexcept>
#include <string>

namespace splatseg {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file or message is missing structure the reader requires (e.g. a PLY property).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Well-formed input carrying unusable values (non-finite numbers, bad ranges).
class DataError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// An argument violates a documented precondition.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A Gaussian is not visible from the requested camera (center behind the near plane).
class NotVisibleError : public Error {
public:
    using Error::Error;
};

/// The segmentation pipeline cannot continue (e.g. fewer than two usable views).
class PipelineError : public Error {
public:
    using Error::Error;
};

/// A mask provider could not be reached or refused a request.
class ProviderError : public Error {
public:
    using Error::Error;
};

} // namespace splatseg
