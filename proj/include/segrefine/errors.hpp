#pragma once

#include <stdexcept>
#include <string>

namespace segrefine {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// mask_core
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

// scene_io
class MissingFileError : public Error {
 public:
  using Error::Error;
};
class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};
class CorruptEncodingError : public Error {
 public:
  using Error::Error;
};

// sampling_ops
class ProviderUnavailableError : public Error {
 public:
  using Error::Error;
};
class NoPositiveWeightError : public Error {
 public:
  using Error::Error;
};
class PathNotFoundError : public Error {
 public:
  using Error::Error;
};
class DegeneratePathError : public Error {
 public:
  using Error::Error;
};
class NotNeighborsError : public Error {
 public:
  using Error::Error;
};
class UnknownNodeError : public Error {
 public:
  using Error::Error;
};

// sgs_net
class CorruptModelError : public Error {
 public:
  using Error::Error;
};

// metrics
class MissingSceneError : public Error {
 public:
  using Error::Error;
};
class FrameMismatchError : public Error {
 public:
  using Error::Error;
};
class EmptyListError : public Error {
 public:
  using Error::Error;
};

// config
class ConfigInvalidError : public Error {
 public:
  ConfigInvalidError(const std::string& field, const std::string& message)
      : Error("invalid config field '" + field + "': " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace segrefine
