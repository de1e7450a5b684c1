#pragma once

#include <stdexcept>
#include <string>

namespace clasp {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Frame-chain bookkeeping violation (wrong from/to frame on a pose or wrench).
class FrameError : public Error {
public:
  explicit FrameError(const std::string& what) : Error(what) {}
};

/// Undecodable payload (degenerate rotation sextet, malformed action vector).
class DecodeError : public Error {
public:
  explicit DecodeError(const std::string& what) : Error(what) {}
};

/// Invalid parameter set, spec, or scenario definition.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// File I/O, framing, or version problems on logs and model files.
class IoError : public Error {
public:
  explicit IoError(const std::string& what) : Error(what) {}
};

/// Non-finite input reached a controller; the caller must freeze motion.
class ControllerFault : public Error {
public:
  explicit ControllerFault(const std::string& what) : Error(what) {}
};

/// Training diverged (non-finite loss). Carries the epoch where it happened.
class TrainingFault : public Error {
public:
  TrainingFault(const std::string& what, int epoch_index)
      : Error(what), epoch(epoch_index) {}
  int epoch;
};

}  // namespace clasp
