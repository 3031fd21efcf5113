// Copyright 2026 The hdcpf Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace hdcpf {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HDCPF_DEFINE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    explicit Name(const std::string& what)  \
        : Error(std::string(#Name ": ") + what) {} \
  };

HDCPF_DEFINE_ERROR(TruncationOverflow)
HDCPF_DEFINE_ERROR(UnknownElement)
HDCPF_DEFINE_ERROR(ConventionError)
HDCPF_DEFINE_ERROR(SpaceMismatch)
HDCPF_DEFINE_ERROR(InvalidParameter)
HDCPF_DEFINE_ERROR(EmptyPostSelection)
HDCPF_DEFINE_ERROR(BasisIncomplete)
HDCPF_DEFINE_ERROR(InvalidDimension)
HDCPF_DEFINE_ERROR(InvalidSubspace)
HDCPF_DEFINE_ERROR(NotNormalized)
HDCPF_DEFINE_ERROR(EncodingError)
HDCPF_DEFINE_ERROR(InsufficientTrace)
HDCPF_DEFINE_ERROR(UnknownRecipe)

#undef HDCPF_DEFINE_ERROR

}  // namespace hdcpf
