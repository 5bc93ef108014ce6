// Copyright 2026 The emocurate Authors. All Rights Reserved.
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

#include <doctest.h>

#include <fstream>

#include "emocurate/error.hpp"

namespace testing {

/// Kind of the Error thrown by `f`; fails the test when nothing is thrown.
template <typename F>
emocurate::ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const emocurate::Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return emocurate::ErrorKind::kIo;
}

}  // namespace testing
