#pragma once

#include <stdexcept>
#include <string>

namespace tifinagh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit an operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid hyperparameter, fraction, k, learning rate, or config file content.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed bytes in IDX, PGM, weight, or CSV files.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A label outside the registry range.
class LabelError : public Error {
public:
    using Error::Error;
};

/// Operation called in the wrong order (e.g. backward before forward).
class StateError : public Error {
public:
    using Error::Error;
};

/// Broken internal bookkeeping, e.g. pooling indices that do not match.
class InternalError : public Error {
public:
    using Error::Error;
};

/// The image contains no pixel brighter than the foreground threshold.
class NoForeground : public Error {
public:
    using Error::Error;
};

/// A file in an ingestion directory could not be turned into an example.
class IngestionError : public Error {
public:
    IngestionError(const std::string& path, const std::string& reason, bool no_foreground = false)
        : Error(path + ": " + reason), path_(path), no_foreground_(no_foreground) {}

    const std::string& path() const noexcept { return path_; }
    bool no_foreground() const noexcept { return no_foreground_; }

private:
    std::string path_;
    bool no_foreground_;
};

/// Filesystem failures (unwritable output, missing input).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tifinagh
