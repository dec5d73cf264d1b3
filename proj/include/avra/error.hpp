// Copyright 2026 The AVRA Authors
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

namespace avra {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define AVRA_DEFINE_ERROR(Name)         \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

AVRA_DEFINE_ERROR(InvalidArgument);
AVRA_DEFINE_ERROR(DecodeError);
AVRA_DEFINE_ERROR(UnsupportedFormat);
AVRA_DEFINE_ERROR(EmptyInput);
AVRA_DEFINE_ERROR(ConfigError);
AVRA_DEFINE_ERROR(ShapeError);
AVRA_DEFINE_ERROR(StratificationError);
AVRA_DEFINE_ERROR(DegenerateTraining);
AVRA_DEFINE_ERROR(CalibrationError);
AVRA_DEFINE_ERROR(TrainingError);
AVRA_DEFINE_ERROR(FormatError);
AVRA_DEFINE_ERROR(DimensionError);
AVRA_DEFINE_ERROR(SelectionError);
AVRA_DEFINE_ERROR(ModelError);
AVRA_DEFINE_ERROR(IoError);

#undef AVRA_DEFINE_ERROR

}  // namespace avra
