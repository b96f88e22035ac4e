/* Copyright 2026 The slidesim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include "slidesim/units.hpp"

namespace slidesim {
namespace {

TEST(ByteQuantity, DecimalAndBinarySuffixes) {
  EXPECT_EQ(parse_byte_quantity("24GB"), 24'000'000'000ULL);
  EXPECT_EQ(parse_byte_quantity("1 KiB"), 1024ULL);
  EXPECT_EQ(parse_byte_quantity("128MiB"), 134'217'728ULL);
  EXPECT_EQ(parse_byte_quantity("2TB"), 2'000'000'000'000ULL);
  EXPECT_EQ(parse_byte_quantity("1.5KB"), 1500ULL);
  EXPECT_EQ(parse_byte_quantity("42"), 42ULL);
}

TEST(ByteQuantity, RatesNeedPermission) {
  EXPECT_EQ(parse_byte_quantity("25GB/s", true), 25'000'000'000ULL);
  EXPECT_THROW(parse_byte_quantity("25GB/s"), ConfigError);
}

TEST(ByteQuantity, RejectsGarbage) {
  for (const char* bad : {"", "GB", "-1GB", "12XB", "1e30", "nan"}) {
    EXPECT_THROW(parse_byte_quantity(bad), ConfigError) << bad;
  }
}

TEST(Durations, RoundTripAndGuards) {
  EXPECT_EQ(seconds_to_duration(1.5).count(), 1'500'000'000);
  EXPECT_DOUBLE_EQ(to_ms(std::chrono::milliseconds(25)), 25.0);
  EXPECT_THROW(seconds_to_duration(-1.0), std::domain_error);
  EXPECT_THROW(seconds_to_duration(1e300), std::domain_error);
}

}  // namespace
}  // namespace slidesim
