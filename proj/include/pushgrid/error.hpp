// Copyright 2026 The pushgrid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PUSHGRID_ERROR_HPP_
#define PUSHGRID_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pushgrid {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or otherwise malformed caller input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ScenarioInfeasible : public Error {
 public:
  using Error::Error;
};

class SimulationFault : public Error {
 public:
  using Error::Error;
};

class InvalidAction : public Error {
 public:
  using Error::Error;
};

// API used out of order, e.g. stepping a finished episode.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class BatchError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// Unreadable, truncated or corrupt file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Checkpoint does not match the network it is loaded into.
class ArchitectureMismatch : public Error {
 public:
  using Error::Error;
};

class TrainingFault : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value; key() names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace pushgrid

#endif  // PUSHGRID_ERROR_HPP_
