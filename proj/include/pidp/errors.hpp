//
// Copyright 2026 The pidp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef PIDP_ERRORS_HPP_
#define PIDP_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace pidp {

// Malformed or inconsistent input data (trace files, sample matrices,
// request streams). Maps to CLI exit code 2.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric failure: overflow past the log-space budget, quadrature
// non-convergence, divergent training. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pidp

#endif  // PIDP_ERRORS_HPP_
