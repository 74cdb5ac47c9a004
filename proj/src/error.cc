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

#include "psel/error.h"

namespace psel {

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig:
      return "config";
    case ErrorCategory::kIo:
      return "io";
    case ErrorCategory::kEncode:
      return "encode";
    case ErrorCategory::kShape:
      return "shape";
    case ErrorCategory::kProtocol:
      return "protocol";
    case ErrorCategory::kTransport:
      return "transport";
    case ErrorCategory::kResource:
      return "resource";
    case ErrorCategory::kDomain:
      return "domain";
    case ErrorCategory::kTraining:
      return "training";
    case ErrorCategory::kAudit:
      return "audit";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kConfig:
      return 2;
    case ErrorCategory::kIo:
      return 3;
    case ErrorCategory::kProtocol:
    case ErrorCategory::kTransport:
      return 4;
    case ErrorCategory::kTraining:
      return 5;
    case ErrorCategory::kAudit:
      return 6;
    case ErrorCategory::kEncode:
    case ErrorCategory::kShape:
    case ErrorCategory::kResource:
    case ErrorCategory::kDomain:
      return 7;
  }
  return 1;
}

void throw_error(ErrorCategory category, const std::string& msg) {
  throw Error(category, std::string(category_name(category)) + ": " + msg);
}

}  // namespace psel
