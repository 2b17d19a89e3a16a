#pragma once

#include <stdexcept>
#include <string>

namespace voxsr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class SizeError : public Error { public: using Error::Error; };
class ArgumentError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class AnalysisError : public Error { public: using Error::Error; };

// Raised when a training loss becomes non-finite.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace voxsr
