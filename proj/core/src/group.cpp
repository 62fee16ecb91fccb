#include "music102/group.hpp"

#include <cctype>

#include "music102/errors.hpp"

namespace music102 {

namespace {
int mod12(int x) { return ((x % 12) + 12) % 12; }
}  // namespace

GroupElement group_element(int rotation, bool reflected) {
  return GroupElement{mod12(rotation), reflected};
}

GroupElement compose(GroupElement g, GroupElement h) {
  // (T_i R^b)(T_j R^c) = T_{i + (-1)^b j} R^{b xor c}
  int rot = g.rotation + (g.reflected ? -h.rotation : h.rotation);
  return GroupElement{mod12(rot), g.reflected != h.reflected};
}

GroupElement inverse(GroupElement g) {
  // Reflections are involutions; rotations invert by negating the amount.
  return g.reflected ? g : GroupElement{mod12(-g.rotation), false};
}

GroupElement identity_element() { return GroupElement{0, false}; }

int act_pitch_class(GroupElement g, int k) {
  if (k < 0 || k >= 12) throw Error("act_pitch_class: pitch class out of range");
  return mod12(g.rotation + (g.reflected ? -k : k));
}

Mat perm_matrix(GroupElement g) {
  Mat p(12, 12);
  for (int k = 0; k < 12; ++k) p.at(act_pitch_class(g, k), k) = 1.0;
  return p;
}

const std::vector<GroupElement>& all_elements() {
  static const std::vector<GroupElement> elems = [] {
    std::vector<GroupElement> v;
    v.reserve(24);
    for (int b = 0; b < 2; ++b)
      for (int r = 0; r < 12; ++r) v.push_back(GroupElement{r, b == 1});
    return v;
  }();
  return elems;
}

std::string to_string(GroupElement g) {
  std::string s = "T" + std::to_string(g.rotation);
  if (g.reflected) s += "R";
  return s;
}

GroupElement parse_element(const std::string& name) {
  if (name.size() < 2 || name[0] != 'T')
    throw Error("parse_element: expected TkR? form, got '" + name + "'");
  size_t pos = 1;
  while (pos < name.size() && std::isdigit(static_cast<unsigned char>(name[pos]))) ++pos;
  if (pos == 1) throw Error("parse_element: missing rotation in '" + name + "'");
  int rot = std::stoi(name.substr(1, pos - 1));
  bool refl = false;
  if (pos < name.size()) {
    if (name.substr(pos) != "R")
      throw Error("parse_element: trailing junk in '" + name + "'");
    refl = true;
  }
  if (rot < 0 || rot >= 12)
    throw Error("parse_element: rotation out of range in '" + name + "'");
  return GroupElement{rot, refl};
}

}  // namespace music102
