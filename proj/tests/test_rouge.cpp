#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/oracles.hpp"
#include "swd/errors.hpp"
#include "swd/rouge.hpp"

using namespace swd;
using Seq = std::vector<std::string>;

TEST_SUITE("rouge-metrics") {
  TEST_CASE("ngram counts") {
    const Seq aba = {"a", "b", "a"};
    const auto uni = rouge::ngram_counts(std::span<const std::string>(aba), 1);
    CHECK(uni.size() == 2);
    CHECK(uni.at({"a"}) == 2);
    CHECK(uni.at({"b"}) == 1);
    const auto bi = rouge::ngram_counts(std::span<const std::string>(aba), 2);
    CHECK(bi.size() == 2);
    CHECK(bi.at({"a", "b"}) == 1);
    CHECK(bi.at({"b", "a"}) == 1);
    const Seq a = {"a"};
    CHECK(rouge::ngram_counts(std::span<const std::string>(a), 2).empty());
    CHECK_THROWS_AS(rouge::ngram_counts(std::span<const std::string>(a), 0), ArgumentError);
  }

  TEST_CASE("hand-computed rouge-n") {
    const Seq c = {"a", "b", "c"};
    const Seq r = {"a", "b"};
    const auto r1 = rouge::rouge_n(c, r, 1);
    CHECK(r1.recall == 1.0);
    CHECK(r1.precision == doctest::Approx(2.0 / 3.0));
    CHECK(r1.f == doctest::Approx(0.8));
    const auto r2 = rouge::rouge_n(c, r, 2);
    CHECK(r2.recall == 1.0);
    CHECK(r2.precision == 0.5);
    CHECK(r2.f == doctest::Approx(2.0 / 3.0));
    for (std::size_t n = 1; n <= 3; ++n) {
      const auto s = rouge::rouge_n(c, c, n);
      CHECK(s.precision == 1.0);
      CHECK(s.recall == 1.0);
      CHECK(s.f == 1.0);
    }
  }

  TEST_CASE("clipping and empty conventions") {
    const Seq c = {"a", "a", "a"};
    const Seq r = {"a", "b"};
    const auto s = rouge::rouge_n(c, r, 1);
    CHECK(s.precision == doctest::Approx(1.0 / 3.0));
    CHECK(s.recall == 0.5);
    const Seq empty;
    const auto e = rouge::rouge_n(empty, r, 1);
    CHECK(e.precision == 0.0);
    CHECK(e.recall == 0.0);
    CHECK(e.f == 0.0);
    CHECK(rouge::rouge_l(r, empty).f == 0.0);
  }

  TEST_CASE("lcs examples") {
    CHECK(rouge::lcs_length(std::string("ABCBDAB"), std::string("BDCABA")) == 4);
    CHECK(rouge::lcs_length(std::string(""), std::string("xyz")) == 0);
    CHECK(rouge::lcs_length(std::string("hello"), std::string("hello")) == 5);
  }

  TEST_CASE("rouge-l examples") {
    const Seq c = {"a", "b", "c"};
    const Seq r = {"a", "c"};
    const auto s = rouge::rouge_l(c, r);
    CHECK(s.recall == 1.0);
    CHECK(s.precision == doctest::Approx(2.0 / 3.0));
    CHECK(s.f == doctest::Approx(0.8));
    const Seq other = {"x", "y"};
    CHECK(rouge::rouge_l(c, other).f == 0.0);
    const auto self = rouge::rouge_l(c, c);
    CHECK(self.precision == 1.0);
    CHECK(self.recall == 1.0);
    CHECK(self.f == 1.0);
  }

  TEST_CASE("beta weighting") {
    CHECK(rouge::f_measure(0.5, 1.0, 1.0) == doctest::Approx(2.0 / 3.0));
    // Large beta approaches recall.
    CHECK(rouge::f_measure(0.5, 1.0, 100.0) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(rouge::f_measure(0.0, 0.0, 1.0) == 0.0);
  }

  TEST_CASE("lcs matches brute force exhaustively over a 4-symbol alphabet") {
    // Every pair of lengths <= 8 would be 87k^2 pairs; sweep all sequences of
    // one length class against a random sample of the other.
    std::mt19937_64 rng(4);
    std::size_t checked = 0;
    for (std::size_t len = 0; len <= 8; ++len) {
      std::size_t total = 1;
      for (std::size_t i = 0; i < len; ++i) total *= 4;
      for (std::size_t code = 0; code < total; ++code) {
        std::vector<int> a(len);
        std::size_t x = code;
        for (auto& v : a) {
          v = static_cast<int>(x % 4);
          x /= 4;
        }
        const auto b = oracle::random_sequence(rng, 8, 4);
        const std::size_t got = rouge::lcs_length(a, b);
        if (got != oracle::lcs_brute(a, b) || got != rouge::lcs_length(b, a)) {
          FAIL("lcs mismatch");
        }
        ++checked;
      }
    }
    CHECK(checked == 87381);
  }

  TEST_CASE("rouge-n matches the naive oracle and stays in range") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 1000; ++i) {
      const auto c = oracle::random_sequence(rng, 12, 10);
      const auto r = oracle::random_sequence(rng, 12, 10);
      for (std::size_t n : {1, 2}) {
        const auto s = rouge::rouge_n(c, r, n);
        const auto o = oracle::rouge_n(c, r, n);
        CHECK(s.precision == o.precision);
        CHECK(s.recall == o.recall);
        CHECK(s.f == o.f);
        CHECK(s.f <= std::max(s.precision, s.recall) + 1e-15);
        CHECK(s.f >= 0.0);
        CHECK(s.recall <= 1.0);
      }
    }
  }

  TEST_CASE("selector parsing") {
    CHECK(rouge::parse_variant("1") == rouge::Variant::kRouge1);
    CHECK(rouge::parse_variant("rouge-2") == rouge::Variant::kRouge2);
    CHECK(rouge::parse_variant("L") == rouge::Variant::kRougeL);
    CHECK(rouge::parse_measure("r") == rouge::Measure::kRecall);
    CHECK_THROWS_AS(rouge::parse_variant("3"), ArgumentError);
    CHECK_THROWS_AS(rouge::parse_measure("x"), ArgumentError);
  }
}
