#include "doctest.h"
#include "music102/group.hpp"
#include "music102/errors.hpp"
#include "music102/rng.hpp"

#include <map>
#include <set>

using namespace music102;

TEST_CASE("identity, composition and inverse follow the dihedral rules") {
  const auto& g24 = all_elements();
  CHECK(g24.size() == 24);

  const GroupElement e = identity_element();
  for (GroupElement g : g24) {
    CHECK(compose(e, g) == g);
    CHECK(compose(g, e) == g);
    CHECK(compose(g, inverse(g)) == e);
    CHECK(compose(inverse(g), g) == e);
  }

  // Associativity, brute force over all 24^3 triples.
  for (GroupElement a : g24)
    for (GroupElement b : g24)
      for (GroupElement c : g24)
        CHECK(compose(compose(a, b), c) == compose(a, compose(b, c)));
}

TEST_CASE("every reflection is an involution, rotations compose additively") {
  for (int r = 0; r < 12; ++r) {
    const GroupElement refl{r, true};
    CHECK(compose(refl, refl) == identity_element());
    CHECK(inverse(refl) == refl);
  }
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      CHECK(compose(GroupElement{i, false}, GroupElement{j, false}) ==
            GroupElement{(i + j) % 12, false});
}

TEST_CASE("worked composition example: T3R then after T5R gives T10") {
  // compose(g, h) applies h first: (T3 R)(T5 R) = T_{3-5} = T10.
  const GroupElement g = parse_element("T3R");
  const GroupElement h = parse_element("T5R");
  CHECK(compose(g, h) == parse_element("T10"));
}

TEST_CASE("pitch-class action reflects before transposing") {
  const GroupElement g = parse_element("T7R");
  // {0, 4, 7} -> reflect {0, 8, 5} -> transpose {7, 3, 0}
  CHECK(act_pitch_class(g, 0) == 7);
  CHECK(act_pitch_class(g, 4) == 3);
  CHECK(act_pitch_class(g, 7) == 0);

  CHECK_THROWS_AS(act_pitch_class(g, 12), Error);
  CHECK_THROWS_AS(act_pitch_class(g, -1), Error);
}

TEST_CASE("action is a left action: g(h(k)) == (g.h)(k)") {
  for (GroupElement g : all_elements())
    for (GroupElement h : all_elements())
      for (int k = 0; k < 12; ++k)
        CHECK(act_pitch_class(g, act_pitch_class(h, k)) ==
              act_pitch_class(compose(g, h), k));
}

TEST_CASE("permutation matrices are faithful and multiply like the group") {
  std::set<std::vector<double>> images;
  for (GroupElement g : all_elements()) {
    const Mat p = perm_matrix(g);
    images.insert(p.data);
    // Exactly one 1 per row and per column.
    for (int i = 0; i < 12; ++i) {
      double row = 0.0, col = 0.0;
      for (int j = 0; j < 12; ++j) {
        row += p.at(i, j);
        col += p.at(j, i);
      }
      CHECK(row == 1.0);
      CHECK(col == 1.0);
    }
  }
  CHECK(images.size() == 24);  // faithful

  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const GroupElement g = all_elements()[rng.range(0, 24)];
    const GroupElement h = all_elements()[rng.range(0, 24)];
    CHECK(max_abs_diff(matmul(perm_matrix(g), perm_matrix(h)),
                       perm_matrix(compose(g, h))) == 0.0);
  }
}

TEST_CASE("element names round-trip") {
  for (GroupElement g : all_elements())
    CHECK(parse_element(to_string(g)) == g);
  CHECK(to_string(GroupElement{0, true}) == "T0R");
  CHECK(to_string(GroupElement{11, false}) == "T11");
  CHECK_THROWS_AS(parse_element("T12"), Error);
  CHECK_THROWS_AS(parse_element("X3"), Error);
  CHECK_THROWS_AS(parse_element("T3RX"), Error);
  CHECK_THROWS_AS(parse_element("T"), Error);
}

TEST_CASE("group_element normalizes the rotation") {
  CHECK(group_element(-1, false) == GroupElement{11, false});
  CHECK(group_element(25, true) == GroupElement{1, true});
}
