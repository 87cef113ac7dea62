#pragma once

#include <stdexcept>
#include <string>

namespace rcmk {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public Error { public: using Error::Error; };
class DtypeError : public Error { public: using Error::Error; };
class ValueError : public Error { public: using Error::Error; };
class TapeError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

}  // namespace rcmk
