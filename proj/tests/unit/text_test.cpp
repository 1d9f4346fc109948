#include <gtest/gtest.h>

#include "schemaloop/util/text.hpp"

namespace text = schemaloop::text;

TEST(Text, TrimAndCollapse) {
  EXPECT_EQ(text::trim("  a b \n"), "a b");
  EXPECT_EQ(text::trim(""), "");
  EXPECT_EQ(text::collapse_whitespace("  a \t b\n\nc "), "a b c");
}

TEST(Text, WordTokensFoldCaseAndStripPunctuation) {
  EXPECT_EQ(text::word_tokens("The attacker's (device), seized!"),
            (std::vector<std::string>{"the", "attacker's", "device", "seized"}));
  EXPECT_TRUE(text::word_tokens(" -- ... ").empty());
}

TEST(Text, Fnv1aKnownVectors) {
  // Reference values of 64-bit FNV-1a.
  EXPECT_EQ(text::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(text::fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(text::fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Text, StartsWithIgnoresCase) {
  EXPECT_TRUE(text::starts_with_ci("Before it", "before"));
  EXPECT_FALSE(text::starts_with_ci("Be", "before"));
}

TEST(Text, SplitUrl) {
  EXPECT_EQ(text::split_url("http://h:1/a/b/"), (std::pair<std::string, std::string>{"http://h:1", "/a/b"}));
  EXPECT_EQ(text::split_url("https://api.example.com"),
            (std::pair<std::string, std::string>{"https://api.example.com", ""}));
}
