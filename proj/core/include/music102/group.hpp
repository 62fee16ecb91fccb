#pragma once
#include <array>
#include <string>
#include <vector>

#include "music102/mat.hpp"

namespace music102 {

// Element of the dihedral group of the 12 pitch classes (order 24), written
// T_r ∘ R^b: reflect first (k -> -k) when `reflected`, then transpose by
// `rotation` semitones. T_0 is the identity, T_0 R the plain reflection.
struct GroupElement {
  int rotation = 0;    // 0..11
  bool reflected = false;

  bool operator==(const GroupElement&) const = default;
};

GroupElement group_element(int rotation, bool reflected);

// g ∘ h: apply h first, then g.
GroupElement compose(GroupElement g, GroupElement h);
GroupElement inverse(GroupElement g);
GroupElement identity_element();

// Action on a pitch class 0..11: T_r R^b (k) = r + (-1)^b k  (mod 12).
int act_pitch_class(GroupElement g, int k);

// 12x12 permutation matrix P with P[g(k)][k] = 1, so acting on one-hot
// column vectors matches act_pitch_class.
Mat perm_matrix(GroupElement g);

// All 24 elements: T_0..T_11 then T_0R..T_11R.
const std::vector<GroupElement>& all_elements();

// "T5", "T0R", ...
std::string to_string(GroupElement g);
GroupElement parse_element(const std::string& name);

}  // namespace music102
