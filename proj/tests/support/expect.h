/*
 * Copyright 2026 The gcnhash Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef GCNHASH_TESTS_SUPPORT_EXPECT_H_
#define GCNHASH_TESTS_SUPPORT_EXPECT_H_

#include <gtest/gtest.h>

#include <string>

#include "gcnhash/error.h"

namespace gcnhash::testing {

// Runs `fn` and checks it throws E with `needle` in the message.
template <typename E, typename F>
::testing::AssertionResult ThrowsWith(F&& fn, const std::string& needle) {
  try {
    fn();
  } catch (const E& e) {
    if (std::string(e.what()).find(needle) != std::string::npos) {
      return ::testing::AssertionSuccess();
    }
    return ::testing::AssertionFailure() << "message '" << e.what() << "' lacks '" << needle
                                         << "'";
  } catch (const std::exception& e) {
    return ::testing::AssertionFailure() << "wrong exception type: " << e.what();
  }
  return ::testing::AssertionFailure() << "no exception thrown";
}

}  // namespace gcnhash::testing

#endif  // GCNHASH_TESTS_SUPPORT_EXPECT_H_
