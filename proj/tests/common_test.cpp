// Copyright 2026 The Chorus Authors.
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

#include <gtest/gtest.h>

#include <set>

#include "chorus/common.hpp"
#include "chorus/timeutil.hpp"

namespace chorus {
namespace {

TEST(Utf8, RoundTripsMultibyteText) {
  const std::string s = "Zürich – 東京 😀";
  std::u32string u = util::DecodeUtf8(s);
  EXPECT_EQ(util::EncodeUtf8(u), s);
  EXPECT_EQ(u.size(), 13u);
}

TEST(Utf8, InvalidBytesBecomeReplacementCharacters) {
  std::u32string u = util::DecodeUtf8(std::string("a\xff" "b", 3));
  ASSERT_EQ(u.size(), 3u);
  EXPECT_EQ(u[1], U'�');
}

TEST(Text, NormalizePhraseLowercasesAndCollapsesSpace) {
  EXPECT_EQ(util::NormalizePhrase("  New   YORK\t"), "new york");
  EXPECT_EQ(util::ToLowerUtf8("ÄÖÜ Straße"), "äöü straße");
}

TEST(Text, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5, 262.67125645438898, 1e-300}) {
    EXPECT_EQ(std::stod(util::FormatDouble(v)), v);
  }
  EXPECT_EQ(util::FormatDouble(0.5), "0.5");
}

TEST(Fingerprint, SeparatesFields) {
  util::Fingerprint a, b;
  a.Add("ab");
  a.Add("c");
  b.Add("a");
  b.Add("bc");
  EXPECT_NE(a.value(), b.value());
  EXPECT_EQ(a.hex().size(), 16u);
}

TEST(Rng, IsReproducibleAndInRange) {
  util::Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    double x = a.Uniform();
    EXPECT_EQ(x, b.Uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    EXPECT_LT(a.Below(7), 7u);
    b.Below(7);
  }
}

TEST(Rng, ShuffleIsAPermutation) {
  util::Rng rng(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.Shuffle(v);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_EQ(*s.begin(), 0);
  EXPECT_EQ(*s.rbegin(), 49);
}

TEST(Time, ParsesRfc3339WithOffsets) {
  auto t = timeutil::ParseTimestamp("2017-03-01T12:30:00Z");
  ASSERT_TRUE(t);
  EXPECT_EQ(timeutil::FormatTimestamp(*t), "2017-03-01T12:30:00Z");
  auto u = timeutil::ParseTimestamp("2017-03-01T14:30:00.123+02:00");
  ASSERT_TRUE(u);
  EXPECT_EQ(*u, *t);
  EXPECT_FALSE(timeutil::ParseTimestamp("2017-02-30T00:00:00Z"));
  // RFC 3339 allows a space in place of T.
  EXPECT_EQ(timeutil::ParseTimestamp("2017-03-01 12:30:00Z"), t);
  EXPECT_FALSE(timeutil::ParseTimestamp("2017-03-01_12:30:00Z"));
  EXPECT_FALSE(timeutil::ParseTimestamp("2017-03-01T12:30:00"));
}

TEST(Time, DayArithmetic) {
  EXPECT_EQ(timeutil::DaysFromCivil(1970, 1, 1), 0);
  EXPECT_EQ(timeutil::DayOf(-1), -1);
  Day d = timeutil::DaysFromCivil(2016, 2, 29);
  EXPECT_EQ(timeutil::FormatDay(d), "2016-02-29");
  EXPECT_EQ(timeutil::FormatDay(timeutil::MonthStart(d)), "2016-02-01");
  EXPECT_EQ(timeutil::FormatDay(timeutil::NextMonthStart(timeutil::DaysFromCivil(2016, 12, 5))),
            "2017-01-01");
  EXPECT_EQ(timeutil::ParseDay("2016-02-29"), d);
  EXPECT_EQ(timeutil::ParseDay("2016-02-29T23:59:59Z"), d);
}

TEST(Time, DateRangeBounds) {
  DateRange r{10, 20};
  EXPECT_TRUE(r.Contains(10));
  EXPECT_TRUE(r.Contains(20));
  EXPECT_FALSE(r.Contains(21));
  EXPECT_TRUE(DateRange{}.Contains(-5));
  EXPECT_TRUE((DateRange{5, 4}).Empty());
}

}  // namespace
}  // namespace chorus
