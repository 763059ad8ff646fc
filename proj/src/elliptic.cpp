#include "pil/error.hpp"
#include "pil/harmonic.hpp"
#include "pil/krylov.hpp"

#include <cmath>
#include <string>

namespace pil::harmonic {

// Constant-coefficient slab inverse: horizontal Fourier modes decouple, each
// mode is a dense Chebyshev two-point problem with the boundary rows replaced.
class SlabPreconditioner {
 public:
  SlabPreconditioner(const BulkGrid& grid, BcKind interface, BcKind wall);
  void apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const;
  bool bordered() const { return bordered_; }

 private:
  const Fourier2& fourier_;
  int nl_;
  std::size_t n_;
  bool bordered_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

namespace {

Field nyquist_part(const Fourier2& f, const double* in, int count, double m11, double m22);

double mean(const Field& f) { return f.mean(); }

int cache_key(BcKind a, BcKind b) { return int(a) * 2 + int(b); }

}  // namespace

// First derivatives vanish on the Nyquist lines, which leaves those modes
// undetermined when both ends carry Neumann data. Pure Neumann problems restore
// the second-derivative symbol there.
double nyquist_shift(const Fourier2& f, int i, int j, double m11, double m22) {
  double s = 0.0;
  if (f.nyquist_u(i)) s += m11 * f.ku(i) * f.ku(i);
  if (f.nyquist_v(j)) s += m22 * f.kv(j) * f.kv(j);
  return s;
}

namespace {

}  // namespace

SlabPreconditioner::SlabPreconditioner(const BulkGrid& grid, BcKind interface, BcKind wall)
    : fourier_(grid.fourier()),
      nl_(grid.levels()),
      n_(grid.size()),
      bordered_(interface == BcKind::Neumann && wall == BcKind::Neumann) {
  const Field& jac = grid.jac_;
  const double m11 = mean(grid.gmet_[0] / jac), m12 = mean(grid.gmet_[1] / jac);
  const double m22 = mean(grid.gmet_[3] / jac), m33 = mean(grid.gmet_[5] / jac);
  const std::size_t ns = grid.slice();
  const auto& fi = grid.finv_;
  const auto& nrm = grid.normal_;
  Field ci = fi[6].head(ns) * nrm[0] + fi[7].head(ns) * nrm[1] + fi[8].head(ns) * nrm[2];
  Field cw = wall_height(grid.side_) * fi[8].tail(ns);
  const double ci3 = mean(ci), cw3 = mean(cw);

  const auto& d1 = grid.cheb().d1();
  const auto& d2 = grid.cheb().d2();
  const auto& w = grid.cheb().weights();
  const int nu = fourier_.nu(), nv = fourier_.nv(), nh = nu / 2 + 1;
  const double npts = double(fourier_.points());
  lu_.reserve(fourier_.modes());
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nh; ++i) {
      const double a = fourier_.ku_odd(i), b = fourier_.kv_odd(j);
      double k2 = m11 * a * a + 2.0 * m12 * a * b + m22 * b * b;
      if (bordered_) k2 += nyquist_shift(fourier_, i, j, m11, m22);
      const bool border = bordered_ && i == 0 && j == 0;
      const int m = nl_ + (border ? 1 : 0);
      Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m, m);
      mat.topLeftCorner(nl_, nl_) = m33 * d2;
      for (int k = 0; k < nl_; ++k) mat(k, k) -= k2;
      if (interface == BcKind::Dirichlet) {
        mat.row(0).setZero();
        mat(0, 0) = 1.0;
      } else {
        mat.row(0).setZero();
        mat.row(0).head(nl_) = ci3 * d1.row(0);
      }
      if (wall == BcKind::Dirichlet) {
        mat.row(nl_ - 1).setZero();
        mat(nl_ - 1, nl_ - 1) = 1.0;
      } else {
        mat.row(nl_ - 1).setZero();
        mat.row(nl_ - 1).head(nl_) = cw3 * d1.row(nl_ - 1);
      }
      if (border) {
        for (int k = 1; k < nl_ - 1; ++k) mat(k, nl_) = npts;
        for (int k = 0; k < nl_; ++k) mat(nl_, k) = w[k] / (npts * w.sum());
      }
      lu_.emplace_back(mat);
    }
}

void SlabPreconditioner::apply(const Eigen::VectorXd& r, Eigen::VectorXd& z) const {
  const std::size_t modes = fourier_.modes();
  std::vector<cplx> spec(modes * nl_);
  fourier_.forward(r.data(), spec.data(), nl_);
  double lambda = 0.0;
  for (std::size_t m = 0; m < modes; ++m) {
    const bool border = bordered_ && m == 0;
    const int sz = nl_ + (border ? 1 : 0);
    Eigen::MatrixXd rhs(sz, 2);
    for (int k = 0; k < nl_; ++k) {
      rhs(k, 0) = spec[k * modes + m].real();
      rhs(k, 1) = spec[k * modes + m].imag();
    }
    if (border) {
      rhs(nl_, 0) = r[n_];
      rhs(nl_, 1) = 0.0;
    }
    Eigen::MatrixXd sol = lu_[m].solve(rhs);
    for (int k = 0; k < nl_; ++k) spec[k * modes + m] = cplx(sol(k, 0), sol(k, 1));
    if (border) lambda = sol(nl_, 0);
  }
  z.resize(r.size());
  fourier_.inverse(spec.data(), z.data(), nl_);
  if (bordered_) z[n_] = lambda;
}

namespace {

Field nyquist_part(const Fourier2& f, const double* in, int count, double m11, double m22) {
  const int nh = f.nu() / 2 + 1;
  std::vector<cplx> spec(f.modes() * count);
  f.forward(in, spec.data(), count);
  for (int c = 0; c < count; ++c)
    for (int j = 0; j < f.nv(); ++j)
      for (int i = 0; i < nh; ++i) spec[c * f.modes() + std::size_t(j) * nh + i] *= nyquist_shift(f, i, j, m11, m22);
  Field out(f.points() * count);
  f.inverse(spec.data(), out.data(), count);
  return out;
}

}  // namespace

const SlabPreconditioner& BulkGrid::preconditioner(BcKind interface, BcKind wall) const {
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  auto& slot = precond_[cache_key(interface, wall)];
  if (!slot) slot = std::make_shared<SlabPreconditioner>(*this, interface, wall);
  return *slot;
}

Field solve_elliptic(const BulkGrid& grid, const Field& source, const BoundaryData& interface,
                     const BoundaryData& wall, const EllipticOptions& opts, EllipticReport* report) {
  const std::size_t n = grid.size(), ns = grid.slice();
  const int nl = grid.levels();
  const bool bordered = interface.kind == BcKind::Neumann && wall.kind == BcKind::Neumann;
  surface::require_finite(source, "elliptic source");
  const Field zero = Field::Zero(ns);
  const Field& gi = interface.values.size() ? interface.values : zero;
  const Field& gw = wall.values.size() ? wall.values : zero;
  surface::require_finite(gi, "interface boundary data");
  surface::require_finite(gw, "wall boundary data");

  EllipticReport local;
  if (bordered) {
    // Divergence theorem: volume source against the outward boundary fluxes.
    const double out_sign = orientation(grid.side());
    const double cell = grid.fourier().cell_area();
    const double vol = grid.integrate(source);
    const double flux_i = out_sign * (gi * grid.interface_area()).sum() * cell;
    const double flux_w = (gw * grid.wall_area()).sum() * cell;
    const double scale = grid.integrate(source.abs()) + (gi.abs() * grid.interface_area()).sum() * cell +
                         (gw.abs() * grid.wall_area()).sum() * cell;
    const double defect = vol - flux_i - flux_w;
    local.compatibility_defect = scale > 0.0 ? std::abs(defect) / scale : 0.0;
    if (local.compatibility_defect > opts.compatibility_tolerance)
      fail(ErrorKind::IncompatibleData,
           "Neumann data violates the compatibility condition (relative defect " +
               std::to_string(local.compatibility_defect) + ")");
  }

  // Boundary-row coefficients on the xi-gradient.
  const auto& fi = grid.finv_;
  const auto& nrm = grid.normal_;
  Field ci[3], cw[3];
  for (int i = 0; i < 3; ++i) {
    ci[i] = fi[3 * i].head(ns) * nrm[0] + fi[3 * i + 1].head(ns) * nrm[1] + fi[3 * i + 2].head(ns) * nrm[2];
    cw[i] = wall_height(grid.side()) * fi[3 * i + 2].tail(ns);
  }
  const Field& q = grid.quadrature();
  const double volume = q.sum();
  const auto& g = grid.gmet_;
  const Field& jac = grid.jac_;
  const double m11 = (g[0] / jac).mean(), m22 = (g[3] / jac).mean();
  const Fourier2& four = grid.fourier();

  LinearMap op = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    Eigen::Map<const Field> f(x.data(), n);
    Field d0, d1, d2;
    grid.xi_gradient(f, d0, d1, d2);
    Field flux0 = g[0] * d0 + g[1] * d1 + g[2] * d2;
    Field flux1 = g[1] * d0 + g[3] * d1 + g[4] * d2;
    Field flux2 = g[2] * d0 + g[4] * d1 + g[5] * d2;
    Field lap(n), ds(n);
    grid.fourier().divergence(flux0.data(), flux1.data(), lap.data(), nl);
    Chebyshev::apply(grid.cheb().d1(), flux2.data(), ds.data(), ns);
    lap = (lap + ds) / jac;
    if (bordered) {
      lap -= nyquist_part(four, f.data(), nl, m11, m22);
      lap += x[n];
    }
    y.resize(x.size());
    y.head(n) = lap.matrix();
    if (interface.kind == BcKind::Dirichlet)
      y.head(ns) = f.head(ns).matrix();
    else
      y.head(ns) = (ci[0] * d0.head(ns) + ci[1] * d1.head(ns) + ci[2] * d2.head(ns)).matrix();
    if (wall.kind == BcKind::Dirichlet)
      y.segment(n - ns, ns) = f.tail(ns).matrix();
    else
      y.segment(n - ns, ns) = (cw[0] * d0.tail(ns) + cw[1] * d1.tail(ns) + cw[2] * d2.tail(ns)).matrix();
    if (bordered) y[n] = (q * f).sum() / volume;
  };

  const SlabPreconditioner& pre = grid.preconditioner(interface.kind, wall.kind);
  LinearMap precond = [&](const Eigen::VectorXd& r, Eigen::VectorXd& z) { pre.apply(r, z); };

  Eigen::VectorXd rhs(n + (bordered ? 1 : 0));
  rhs.head(n) = source.matrix();
  rhs.head(ns) = gi.matrix();
  rhs.segment(n - ns, ns) = gw.matrix();
  if (bordered) rhs[n] = 0.0;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  if (opts.initial_guess) x.head(n) = opts.initial_guess->matrix();
  const KrylovResult kr = gmres(op, precond, rhs, x, opts.tolerance, opts.restart, opts.max_iter);
  local.iterations = kr.iterations;
  local.residual = kr.relative_residual;
  if (bordered) local.multiplier = x[n];
  if (report) *report = local;
  if (!kr.converged)
    fail(ErrorKind::EllipticNoConverge, std::string("elliptic solve on the ") + side_name(grid.side()) +
                                            " side stalled at relative residual " +
                                            std::to_string(kr.relative_residual));
  return x.head(n).array();
}

}  // namespace pil::harmonic
