#include "thfem/flow.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace thfem {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '-' || c == '_'; }), s.end());
  return s;
}

}  // namespace

ElementPair parse_element_pair(const std::string& s) {
  const std::string t = lower(s);
  if (t == "p2p1") return ElementPair::p2p1;
  if (t == "p2p1*" || t == "p2p1star") return ElementPair::p2p1star;
  if (t == "q2q1") return ElementPair::q2q1;
  if (t == "q2q1*" || t == "q2q1star") return ElementPair::q2q1star;
  throw std::invalid_argument("unknown element pair '" + s + "' (expected P2P1, P2P1star, Q2Q1, Q2Q1star)");
}

std::string to_string(ElementPair pair) {
  switch (pair) {
    case ElementPair::p2p1: return "P2P1";
    case ElementPair::p2p1star: return "P2P1star";
    case ElementPair::q2q1: return "Q2Q1";
    case ElementPair::q2q1star: return "Q2Q1star";
  }
  return "?";
}

ElementKind element_kind(ElementPair pair) {
  return pair == ElementPair::p2p1 || pair == ElementPair::p2p1star ? ElementKind::triangle
                                                                     : ElementKind::quad;
}

PressureSpace pressure_space(ElementPair pair) {
  return pair == ElementPair::p2p1star || pair == ElementPair::q2q1star ? PressureSpace::enriched
                                                                         : PressureSpace::taylor_hood;
}

Problem parse_problem(const std::string& s) {
  const std::string t = lower(s);
  if (t == "cavity2d" || t == "cavity") return Problem::cavity2d;
  if (t == "step") return Problem::step;
  throw std::invalid_argument("unknown problem '" + s + "' (expected cavity2d or step)");
}

std::string to_string(Problem problem) { return problem == Problem::step ? "step" : "cavity2d"; }

void FlowProblem::validate() const {
  if (!(nu > 0.0)) throw std::invalid_argument("viscosity must be positive");
  if (level < 1 || level > 10) throw std::invalid_argument("grid level must be in 1..10");
}

Discretization make_discretization(const FlowProblem& fp) {
  fp.validate();
  const ElementKind kind = element_kind(fp.pair);
  Mesh mesh = fp.problem == Problem::step ? build_step_mesh(fp.level, kind)
                                          : build_cavity_mesh(fp.level, kind);
  return Discretization(std::move(mesh), pressure_space(fp.pair), boundary_profiles(fp.problem));
}

Vector direct_solve(const SaddleSystem& sys, const std::vector<Vector>& pressure_nullspace) {
  const int n = sys.size();
  const int n_u = sys.n_u();
  const int m = static_cast<int>(pressure_nullspace.size());
  // Pin one pressure dof per nullspace direction (a dense border would ruin
  // the sparse LU fill), then pick the representative orthogonal to them.
  std::vector<int> pinned;
  for (int c = 0; c < m; ++c) {
    const Vector& v = pressure_nullspace[static_cast<std::size_t>(c)];
    int pick = -1;
    for (int i = 0; i < sys.n_p() && pick < 0; ++i) {
      if (v(i) == 0.0 || std::find(pinned.begin(), pinned.end(), i) != pinned.end()) continue;
      bool clean = true;
      for (int d = 0; d < c; ++d) clean = clean && pressure_nullspace[static_cast<std::size_t>(d)](i) == 0.0;
      if (clean) pick = i;
    }
    if (pick < 0) throw std::invalid_argument("direct_solve: cannot pin nullspace direction");
    pinned.push_back(pick);
  }
  std::vector<bool> is_pinned(static_cast<std::size_t>(n), false);
  for (int i : pinned) is_pinned[static_cast<std::size_t>(n_u + i)] = true;

  const SparseMatrix a = sys.matrix();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()) + pinned.size());
  for (int i = 0; i < a.outerSize(); ++i) {
    if (is_pinned[static_cast<std::size_t>(i)]) continue;
    for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
      if (!is_pinned[static_cast<std::size_t>(it.col())]) t.emplace_back(i, static_cast<int>(it.col()), it.value());
    }
  }
  for (int i : pinned) t.emplace_back(n_u + i, n_u + i, 1.0);
  SparseMatrix pinned_matrix(n, n);
  pinned_matrix.setFromTriplets(t.begin(), t.end());
  Vector rhs = sys.rhs();
  for (int i : pinned) rhs(n_u + i) = 0.0;
  Vector x = Factorization(pinned_matrix, false).solve(rhs);
  if (m > 0) {
    DenseMatrix c(sys.n_p(), m);
    for (int k = 0; k < m; ++k) c.col(k) = pressure_nullspace[static_cast<std::size_t>(k)];
    const Vector coef = (c.transpose() * c).ldlt().solve(c.transpose() * x.tail(sys.n_p()));
    x.tail(sys.n_p()) -= c * coef;
  }
  return x;
}

StokesSolution solve_stokes(const Discretization& disc, const std::string& pre, double rtol,
                            int maxit) {
  StokesSolution out;
  out.system = disc.stokes();
  out.mass = disc.pressure_mass();
  PreconditionerApply p;
  if (pre == "p1") {
    p = make_stokes_p1(out.system, out.mass);
  } else if (pre == "p2") {
    p = make_stokes_p2(out.system, out.mass, 20, nullptr, &out.lambda_max);
  } else {
    throw std::invalid_argument("stokes preconditioner must be p1 or p2, got '" + pre + "'");
  }
  MinresOptions opt;
  opt.rtol = rtol;
  opt.maxit = maxit;
  const SaddleSystem& sys = out.system;
  out.report = minres([&](const Vector& x) { return sys.apply(x); }, sys.rhs(), p, opt);
  out.report.preconditioner = p.description;
  out.infsup = estimate_history(out.report);
  out.report.infsup_history = out.infsup.history;
  out.velocity = disc.dofs().expand(out.report.solution.head(sys.n_u()));
  out.pressure = out.report.solution.tail(sys.n_p());
  return out;
}

PicardResult picard_oseen(const Discretization& disc, double nu, int steps) {
  if (steps < 1) throw std::invalid_argument("picard: steps must be at least 1");
  if (!(nu > 0.0)) throw std::invalid_argument("picard: viscosity must be positive");
  const DofMap& dofs = disc.dofs();
  const bool enclosed = disc.mesh().domain() == Domain::cavity;
  const auto nulls = pressure_nullspace(dofs.n_k, dofs.n_0, enclosed);
  PicardResult out;

  // Stokes flow with viscosity nu.
  SaddleSystem stokes = disc.stokes();
  stokes.F *= nu;
  stokes.f *= nu;
  Vector x = direct_solve(stokes, nulls);
  auto record = [&](const SaddleSystem& sys, const Vector& sol) {
    if (sys.n_0() > 0) out.b0_residuals.push_back((sys.g.tail(sys.n_0()) - sys.B0 * sol.head(sys.n_u())).norm());
  };
  record(stokes, x);
  for (int s = 1; s < steps; ++s) {
    const SaddleSystem sys = disc.oseen(dofs.expand(x.head(dofs.n_free())), nu);
    x = direct_solve(sys, nulls);
    record(sys, x);
  }
  out.convecting = dofs.expand(x.head(dofs.n_free()));
  out.system = disc.oseen(out.convecting, nu);
  out.initial_guess = x;
  return out;
}

SolveReport solve_oseen(const Discretization& disc, const PicardResult& pic, double nu,
                        bool enclosed, const std::string& pre, double eta, int maxit,
                        const Vector& lsc_scaling) {
  const SaddleSystem& sys = pic.system;
  auto f = std::make_shared<const Factorization>(sys.F, false);
  PreconditionerApply m;
  if (pre == "m1") {
    m = make_oseen_m1(sys, disc.pressure_mass(), nu, f);
  } else if (pre == "m2") {
    m = make_oseen_m2(sys, disc.pcd(pic.convecting, nu), enclosed, f);
  } else if (pre == "m3") {
    m = make_oseen_m3(sys, disc.pcd(pic.convecting, nu).Mdiag, enclosed, lsc_scaling, f);
  } else {
    throw std::invalid_argument("oseen preconditioner must be m1, m2 or m3, got '" + pre + "'");
  }
  GmresOptions opt;
  opt.rtol = eta;
  opt.maxit = maxit;
  opt.x0 = pic.initial_guess;
  SolveReport rep = gmres([&](const Vector& x) { return sys.apply(x); }, sys.rhs(), m, opt);
  rep.preconditioner = m.description;
  return rep;
}

DivergenceDiagnostics divergence_report(const Discretization& disc, const Vector& velocity) {
  return disc.divergence(velocity);
}

void write_velocity_csv(std::ostream& out, const DofMap& dofs, const Vector& velocity) {
  const auto old = out.precision(12);
  out << "x,y,ux,uy\n";
  for (int i = 0; i < dofs.n_nodes; ++i) {
    const Point2& p = dofs.nodes[static_cast<std::size_t>(i)];
    out << p.x() << ',' << p.y() << ',' << velocity(i) << ',' << velocity(dofs.n_nodes + i) << '\n';
  }
  out.precision(old);
}

void write_pressure_csv(std::ostream& out, const Mesh& mesh, const Vector& pressure) {
  const auto old = out.precision(12);
  out << "x,y,p\n";
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Point2& p = mesh.vertex(i);
    out << p.x() << ',' << p.y() << ',' << pressure(i) << '\n';
  }
  out.precision(old);
}

void write_element_csv(std::ostream& out, const Mesh& mesh, const Vector& pressure, int n_k,
                       const DivergenceDiagnostics& div) {
  const auto old = out.precision(12);
  const bool enriched = pressure.size() > n_k;
  out << "element,cx,cy,p0,div_l2,div_mean\n";
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Point2 c = mesh.element_centroid(e);
    out << e << ',' << c.x() << ',' << c.y() << ',';
    if (enriched) out << pressure(n_k + e);
    out << ',' << div.l2_norm(e) << ',' << div.mean(e) << '\n';
  }
  out.precision(old);
}

}  // namespace thfem
