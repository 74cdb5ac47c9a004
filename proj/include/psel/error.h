// Copyright 2026 The psel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace psel {

// Diagnostic category carried by every error. The CLI maps each category to
// a distinct process exit code.
enum class ErrorCategory {
  kConfig,
  kIo,
  kEncode,
  kShape,
  kProtocol,
  kTransport,
  kResource,
  kDomain,
  kTraining,
  kAudit,
};

std::string_view category_name(ErrorCategory c);
int exit_code(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void throw_error(ErrorCategory category, const std::string& msg);

}  // namespace psel

#define PSEL_ENFORCE(cond, category, msg)                               \
  do {                                                                  \
    if (!(cond)) {                                                      \
      std::ostringstream psel_enforce_os_;                              \
      psel_enforce_os_ << msg;                                          \
      ::psel::throw_error(::psel::ErrorCategory::category,              \
                          psel_enforce_os_.str());                      \
    }                                                                   \
  } while (false)
