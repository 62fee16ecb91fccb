#include "music102/irreps.hpp"

#include <cmath>

#include "music102/errors.hpp"

namespace music102 {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kBuildTol = 1e-12;

Mat rot2(double theta) {
  Mat m(2, 2);
  m.at(0, 0) = std::cos(theta);
  m.at(0, 1) = -std::sin(theta);
  m.at(1, 0) = std::sin(theta);
  m.at(1, 1) = std::cos(theta);
  return m;
}

// Reflection across the line at angle phi/2.
Mat refl2(double phi) {
  Mat m(2, 2);
  m.at(0, 0) = std::cos(phi);
  m.at(0, 1) = std::sin(phi);
  m.at(1, 0) = std::sin(phi);
  m.at(1, 1) = -std::cos(phi);
  return m;
}

int e_order(IrrepLabel label) {
  switch (label) {
    case IrrepLabel::E1: return 1;
    case IrrepLabel::E2: return 2;
    case IrrepLabel::E3: return 3;
    case IrrepLabel::E4: return 4;
    case IrrepLabel::E5: return 5;
    default: return 0;
  }
}
}  // namespace

const char* to_string(IrrepLabel label) {
  switch (label) {
    case IrrepLabel::A1: return "A1";
    case IrrepLabel::A2: return "A2";
    case IrrepLabel::B1: return "B1";
    case IrrepLabel::B2: return "B2";
    case IrrepLabel::E1: return "E1";
    case IrrepLabel::E2: return "E2";
    case IrrepLabel::E3: return "E3";
    case IrrepLabel::E4: return "E4";
    case IrrepLabel::E5: return "E5";
  }
  throw Error("to_string: bad irrep label");
}

IrrepLabel parse_irrep_label(const std::string& name) {
  for (IrrepLabel l : kAllIrreps)
    if (name == to_string(l)) return l;
  throw NoSuchChannel("parse_irrep_label: unknown irrep '" + name + "'");
}

int irrep_dim(IrrepLabel label) { return e_order(label) ? 2 : 1; }

Mat irrep_matrix(IrrepLabel label, GroupElement g) {
  const int i = g.rotation;
  const bool b = g.reflected;
  auto scalar = [](double v) {
    Mat m(1, 1);
    m.at(0, 0) = v;
    return m;
  };
  switch (label) {
    case IrrepLabel::A1: return scalar(1.0);
    case IrrepLabel::A2: return scalar(b ? -1.0 : 1.0);
    case IrrepLabel::B1: return scalar(((i + (b ? 1 : 0)) % 2) ? -1.0 : 1.0);
    case IrrepLabel::B2: return scalar((i % 2) ? -1.0 : 1.0);
    default: {
      const double theta = kPi * e_order(label) * i / 6.0;
      Mat m = rot2(theta);
      if (b) {
        // Right-multiply by diag(1,-1): negate the second column.
        m.at(0, 1) = -m.at(0, 1);
        m.at(1, 1) = -m.at(1, 1);
      }
      return m;
    }
  }
}

double character(IrrepLabel label, GroupElement g) {
  const Mat d = irrep_matrix(label, g);
  double tr = 0.0;
  for (int i = 0; i < d.rows; ++i) tr += d.at(i, i);
  return tr;
}

const std::vector<ConjClass>& conjugacy_classes() {
  static const std::vector<ConjClass> classes = [] {
    std::vector<ConjClass> out;
    auto rot = [](int r) { return GroupElement{r, false}; };
    auto ref = [](int r) { return GroupElement{r, true}; };
    out.push_back({rot(0), {rot(0)}});
    for (int r = 1; r <= 5; ++r) out.push_back({rot(r), {rot(r), rot(12 - r)}});
    out.push_back({rot(6), {rot(6)}});
    ConjClass even{ref(0), {}}, odd{ref(1), {}};
    for (int r = 0; r < 12; ++r) (r % 2 ? odd : even).members.push_back(ref(r));
    out.push_back(even);
    out.push_back(odd);
    return out;
  }();
  return classes;
}

namespace {

double perm_character(GroupElement g) {
  double tr = 0.0;
  for (int k = 0; k < 12; ++k)
    if (act_pitch_class(g, k) == k) tr += 1.0;
  return tr;
}

int compute_multiplicity(IrrepLabel label) {
  double acc = 0.0;
  for (GroupElement g : all_elements())
    acc += character(label, g) * perm_character(g);
  acc /= 24.0;
  const int m = static_cast<int>(std::lround(acc));
  if (std::fabs(acc - m) > 1e-9 || m < 0)
    throw Error("irrep multiplicity did not come out an integer");
  return m;
}

// Projector onto the isotypic subspace, (dim/24) * sum_g chi(g) perm(g).
Mat isotypic_projector(IrrepLabel label) {
  Mat p(12, 12);
  for (GroupElement g : all_elements()) {
    const double chi = character(label, g);
    if (chi == 0.0) continue;
    const Mat pg = perm_matrix(g);
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] += chi * pg.data[i];
  }
  return scale(p, irrep_dim(label) / 24.0);
}

std::vector<double> normalized(std::vector<double> v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double n = std::sqrt(n2);
  if (n < 1e-9) throw Error("change-of-basis seed projected to zero");
  for (double& x : v) x /= n;
  return v;
}

std::vector<double> project_seed(const Mat& p, int seed) {
  std::vector<double> v(12);
  for (int r = 0; r < 12; ++r) v[r] = p.at(r, seed);
  return v;
}

// Build U for one surviving channel: project seed basis vectors, orthonormalize,
// then rotate the 2-d channels into the pinned generator convention and fix the
// overall sign.
Mat build_change_of_basis(IrrepLabel label) {
  const int dim = irrep_dim(label);
  const Mat p = isotypic_projector(label);

  std::vector<double> u0 = normalized(project_seed(p, 0));
  Mat u(dim, 12);
  for (int j = 0; j < 12; ++j) u.at(0, j) = u0[j];
  if (dim == 2) {
    std::vector<double> u1 = project_seed(p, 1);
    double d = 0.0;
    for (int j = 0; j < 12; ++j) d += u1[j] * u0[j];
    for (int j = 0; j < 12; ++j) u1[j] -= d * u0[j];
    u1 = normalized(u1);
    for (int j = 0; j < 12; ++j) u.at(1, j) = u1[j];

    // The row pair is only determined up to an orthogonal mix; align it so the
    // generator images are exactly the pinned 2x2 matrices.
    const Mat g1 = matmul(matmul(u, perm_matrix(GroupElement{1, false})), transpose(u));
    const Mat gr = matmul(matmul(u, perm_matrix(GroupElement{0, true})), transpose(u));
    const double psi = std::atan2(gr.at(0, 1), gr.at(0, 0));
    const double theta = kPi * e_order(label) / 6.0;
    Mat s(2, 2);
    if (std::fabs(g1.at(1, 0) - std::sin(theta)) < 1e-6) {
      s = rot2(-psi / 2.0);   // g1 already rotates by +theta
    } else if (std::fabs(g1.at(1, 0) + std::sin(theta)) < 1e-6) {
      s = refl2(psi / 2.0);   // a reflection flips the rotation sense
    } else {
      throw Error("change-of-basis: generator image is not a rotation by +-theta");
    }
    u = matmul(s, u);
  }

  // Canonical sign: first entry of magnitude > 1e-9 (row-major scan) positive.
  for (double x : u.data) {
    if (std::fabs(x) > 1e-9) {
      if (x < 0.0)
        for (double& y : u.data) y = -y;
      break;
    }
  }
  return u;
}

void verify_channel(const Channel& ch) {
  // Orthonormal rows.
  const Mat gram = matmul(ch.U, ch.Ut);
  if (max_abs_diff(gram, Mat::identity(ch.dim)) > kBuildTol)
    throw Error(std::string("channel ") + to_string(ch.label) + ": U rows not orthonormal");
  // Intertwining with every group element.
  for (GroupElement g : all_elements()) {
    const Mat lhs = matmul(ch.U, perm_matrix(g));
    const Mat rhs = matmul(irrep_matrix(ch.label, g), ch.U);
    if (max_abs_diff(lhs, rhs) > kBuildTol)
      throw Error(std::string("channel ") + to_string(ch.label) +
                  ": intertwining fails at " + to_string(g));
  }
}

IrrepTable build_table() {
  IrrepTable t{};
  for (IrrepLabel l : kAllIrreps)
    t.multiplicity[static_cast<int>(l)] = compute_multiplicity(l);
  for (IrrepLabel l : kAllIrreps) {
    if (t.multiplicity[static_cast<int>(l)] == 0) continue;
    Channel ch;
    ch.label = l;
    ch.dim = irrep_dim(l);
    ch.U = build_change_of_basis(l);
    ch.Ut = transpose(ch.U);
    verify_channel(ch);
    t.channels.push_back(std::move(ch));
  }
  // Sanity: the surviving channels must tile all 12 dimensions.
  int total = 0;
  for (const Channel& ch : t.channels) total += ch.dim;
  if (total != 12) throw Error("irrep channels do not span the 12 pitch classes");
  return t;
}

}  // namespace

const IrrepTable& irrep_table() {
  static const IrrepTable table = build_table();
  return table;
}

int multiplicity(IrrepLabel label) {
  return irrep_table().multiplicity[static_cast<int>(label)];
}

const Channel& channel(IrrepLabel label) {
  for (const Channel& ch : irrep_table().channels)
    if (ch.label == label) return ch;
  throw NoSuchChannel(std::string("channel ") + to_string(label) +
                      " does not occur in the pitch-class representation");
}

const Mat& change_of_basis(IrrepLabel label) { return channel(label).U; }

}  // namespace music102
