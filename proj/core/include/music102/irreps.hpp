#pragma once
#include <array>
#include <string>
#include <vector>

#include "music102/group.hpp"
#include "music102/mat.hpp"

namespace music102 {

// The nine irreducible representations of the order-24 dihedral group on the
// pitch classes: four 1-dimensional, five 2-dimensional.
enum class IrrepLabel { A1, A2, B1, B2, E1, E2, E3, E4, E5 };

inline constexpr std::array<IrrepLabel, 9> kAllIrreps = {
    IrrepLabel::A1, IrrepLabel::A2, IrrepLabel::B1, IrrepLabel::B2,
    IrrepLabel::E1, IrrepLabel::E2, IrrepLabel::E3, IrrepLabel::E4,
    IrrepLabel::E5};

const char* to_string(IrrepLabel label);
IrrepLabel parse_irrep_label(const std::string& name);

int irrep_dim(IrrepLabel label);
Mat irrep_matrix(IrrepLabel label, GroupElement g);
double character(IrrepLabel label, GroupElement g);

struct ConjClass {
  GroupElement rep;
  std::vector<GroupElement> members;
};

// Conjugacy classes in a fixed order: T0, {T1,T11}, {T2,T10}, {T3,T9},
// {T4,T8}, {T5,T7}, T6, even reflections, odd reflections.
const std::vector<ConjClass>& conjugacy_classes();

// A channel is an irrep that actually occurs in the pitch-class permutation
// representation, together with its change of basis U (dim x 12 block of the
// orthogonal matrix that block-diagonalizes every permutation matrix):
//   U * perm(g) = D(g) * U  for all g.
struct Channel {
  IrrepLabel label;
  int dim;
  Mat U;   // dim x 12
  Mat Ut;  // 12 x dim, transpose kept around since both directions are hot
};

struct IrrepTable {
  std::array<int, 9> multiplicity;  // indexed by IrrepLabel
  std::vector<Channel> channels;    // A1, B2, E1..E5 in that order
};

// Built and verified once on first use (intertwining and orthonormality of
// every channel checked to 1e-12; a failure is a programming error and
// throws). Subsequent calls return the cached table.
const IrrepTable& irrep_table();

int multiplicity(IrrepLabel label);

// U for a surviving channel; throws NoSuchChannel for A2/B1 (multiplicity 0).
const Mat& change_of_basis(IrrepLabel label);

const Channel& channel(IrrepLabel label);

}  // namespace music102
