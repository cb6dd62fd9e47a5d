#include <cmath>
#include <random>
#include <string>

#include "doctest.h"
#include "fixtures.hpp"
#include "moranq/error.hpp"
#include "moranq/moran.hpp"

using namespace moranq;
using moranq::testing::cantor_spec;
using moranq::testing::inhomogeneous_spec;

TEST_CASE("parse_number reads fractions exactly") {
  CHECK(parse_number("1/3") == 1.0 / 3.0);
  CHECK(parse_number("0.25") == 0.25);
  CHECK(parse_number(" 2/4 ") == 0.5);
  CHECK_THROWS_AS(parse_number("1/0"), SpecError);
  CHECK_THROWS_AS(parse_number("abc"), SpecError);
}

TEST_CASE("cantor spec validates with eta = 1/18") {
  const MoranSpec spec = cantor_spec();
  const ValidationReport rep = validate_spec(spec, 2.0);
  CHECK(rep.admissible());
  CHECK(rep.eta == doctest::Approx(1.0 / 18.0).epsilon(1e-15));
  CHECK(rep.p_min == 0.5);
  CHECK(rep.c_max == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("validation flags bad levels") {
  SUBCASE("probs summing to 1.1") {
    const MoranSpec spec = parse_spec_json(R"({"levels":[{"ratios":[0.3,0.3],"probs":[0.6,0.5]}]})");
    const ValidationReport rep = validate_spec(spec, 2.0);
    REQUIRE_FALSE(rep.admissible());
    CHECK(rep.violations.front().find("probs sum 1.1") != std::string::npos);
  }
  SUBCASE("ratios over one") {
    const MoranSpec spec = parse_spec_json(R"({"levels":[{"ratios":[0.6,0.5],"probs":[0.5,0.5]}]})");
    CHECK_FALSE(validate_spec(spec, 2.0).admissible());
  }
  SUBCASE("single child") {
    const MoranSpec spec = parse_spec_json(R"({"levels":[{"ratios":[0.5],"probs":[1]}]})");
    CHECK_FALSE(validate_spec(spec, 2.0).admissible());
  }
  SUBCASE("declared count mismatch") {
    const MoranSpec spec = parse_spec_json(R"({"levels":[{"n":3,"ratios":[0.3,0.3],"probs":[0.5,0.5]}]})");
    CHECK_FALSE(validate_spec(spec, 2.0).admissible());
  }
  SUBCASE("overlapping explicit offsets") {
    const MoranSpec spec = parse_spec_json(
        R"({"levels":[{"ratios":[0.3,0.3],"probs":[0.5,0.5],
            "layout":{"mode":"explicit-offsets","offsets":[0.0,0.2]}}]})");
    CHECK_FALSE(validate_spec(spec, 2.0).admissible());
  }
  SUBCASE("non-positive order") {
    CHECK_FALSE(validate_spec(cantor_spec(), 0.0).admissible());
  }
}

TEST_CASE("malformed documents") {
  CHECK_THROWS_AS(parse_spec_json("{not json"), SpecParseError);
  CHECK_THROWS_AS(parse_spec_json("[]"), SpecError);
  CHECK_THROWS_AS(parse_spec_json(R"({"levels":[{"ratios":"x","probs":[1]}]})"), SpecError);
  CHECK_THROWS_AS(parse_spec_json(R"({"levels":[{"ratios":[0.5,0.5],"probs":[0.5,0.5],"layout":"zigzag"}]})"),
                  SpecError);
  CHECK_THROWS_AS(load_spec_file("/nonexistent/spec.json"), std::ios_base::failure);
}

TEST_CASE("word round trip and prefixes") {
  const Word w = Word::parse("2.1.3");
  CHECK(w.depth() == 3);
  CHECK(w.to_string() == "2.1.3");
  CHECK(w.parent().to_string() == "2.1");
  CHECK(w.prefix(1).is_prefix_of(w));
  CHECK_FALSE(w.is_prefix_of(w.prefix(2)));
  CHECK(Word::root().to_string() == "root");
  CHECK(Word::parse("root").is_root());
  CHECK(w.prefix(0).is_root());
  CHECK_THROWS_AS(Word::root().parent(), UsageError);
  CHECK_THROWS_AS(Word::parse("1..2"), SpecError);
}

TEST_CASE("cantor cylinders") {
  const MoranSpec spec = cantor_spec();
  const Cylinder c = cylinder(spec, Word::parse("1.2"), 2.0);
  CHECK(c.lo == doctest::Approx(2.0 / 9.0));
  CHECK(c.hi == doctest::Approx(3.0 / 9.0));
  CHECK(c.mass == 0.25);
  CHECK(c.weight == doctest::Approx(0.25 / 81.0));
  CHECK(c.log_weight == doctest::Approx(std::log(0.25 / 81.0)));
  CHECK_THROWS_AS(cylinder(spec, Word::parse("3"), 2.0), SpecError);
}

TEST_CASE("children nest, conserve mass and respect order") {
  for (const MoranSpec& spec : {cantor_spec(), inhomogeneous_spec()}) {
    Cylinder parent = cylinder(spec, Word::root(), 2.0);
    for (int depth = 0; depth < 9; ++depth) {
      const auto kids = children(spec, parent, 2.0);
      double mass = 0.0;
      for (std::size_t j = 0; j < kids.size(); ++j) {
        const Cylinder& k = kids[j];
        mass += k.mass;
        CHECK(k.lo >= parent.lo);
        CHECK(k.hi <= parent.hi);
        CHECK(k.word.parent() == parent.word);
        if (j > 0) CHECK(kids[j - 1].hi <= k.lo);
        const Cylinder direct = cylinder(spec, k.word, 2.0);
        CHECK(direct.lo == k.lo);
        CHECK(direct.hi == k.hi);
      }
      CHECK(mass == doctest::Approx(parent.mass).epsilon(1e-14));
      parent = kids.back();
    }
  }
}

TEST_CASE("layouts place children as described") {
  const MoranSpec flush = parse_spec_json(
      R"({"levels":[{"ratios":[0.2,0.3],"probs":[0.5,0.5],"layout":"flush-left"}]})");
  auto kids = children(flush, cylinder(flush, Word::root(), 1.0), 1.0);
  CHECK(kids[0].lo == 0.0);
  CHECK(kids[1].lo == doctest::Approx(0.2));
  CHECK(kids[1].hi == doctest::Approx(0.5));

  const MoranSpec expl = parse_spec_json(
      R"({"base_interval":[2,4],"levels":[{"ratios":[0.2,0.3],"probs":[0.5,0.5],
          "layout":{"mode":"explicit-offsets","offsets":[0.1,0.6]}}]})");
  kids = children(expl, cylinder(expl, Word::root(), 1.0), 1.0);
  CHECK(kids[0].lo == doctest::Approx(2.2));
  CHECK(kids[1].lo == doctest::Approx(3.2));
  CHECK(kids[1].hi == doctest::Approx(3.8));
  CHECK(kids[1].length == doctest::Approx(0.6));
  CHECK(kids[1].ratio == doctest::Approx(0.3));
}

TEST_CASE("non-cycled spec ends") {
  const MoranSpec spec = parse_spec_json(R"({"cycle":false,"levels":[{"ratios":[0.3,0.3],"probs":[0.5,0.5]}]})");
  CHECK_NOTHROW(cylinder(spec, Word::parse("1"), 2.0));
  CHECK_THROWS_AS(cylinder(spec, Word::parse("1.1"), 2.0), SpecError);
}

TEST_CASE("weights ignore base length unless requested") {
  const MoranSpec unit = cantor_spec();
  MoranSpec wide = parse_spec_json(R"({"base_interval":[0,3],"levels":[{"ratios":["1/3","1/3"],"probs":[0.5,0.5]}]})");
  const Word w = Word::parse("1.2");
  CHECK(cylinder(wide, w, 2.0).weight == doctest::Approx(cylinder(unit, w, 2.0).weight));
  wide.normalize_weights = false;
  CHECK(cylinder(wide, w, 2.0).weight == doctest::Approx(9.0 * cylinder(unit, w, 2.0).weight));
}

TEST_CASE("fingerprint separates specs") {
  CHECK(cantor_spec().fingerprint() == cantor_spec().fingerprint());
  CHECK(cantor_spec().fingerprint() != inhomogeneous_spec().fingerprint());
}

TEST_CASE("cylinder length matches its endpoints up to rounding") {
  std::mt19937_64 rng(17);
  for (const MoranSpec& spec : {cantor_spec(), inhomogeneous_spec()}) {
    for (int trial = 0; trial < 200; ++trial) {
      Word w;
      const std::size_t depth = 1 + rng() % 30;
      for (std::size_t d = 0; d < depth; ++d) {
        w = w.child(static_cast<int>(1 + rng() % spec.level(d).count()));
      }
      const Cylinder c = cylinder(spec, w, 2.0);
      const double ulp = std::nextafter(c.hi, 2.0) - c.hi;
      CHECK(std::abs((c.hi - c.lo) - c.length) <= std::max(1e-12 * c.length, 4 * ulp));
      CHECK(c.lo <= c.hi);
    }
  }
}
