#include "pil/surface.hpp"

#include "pil/error.hpp"
#include "pil/krylov.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace pil::surface {

namespace {

Vec3Field cross(const Vec3Field& a, const Vec3Field& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Field dot(const Vec3Field& a, const Vec3Field& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

TensorField matmul(const TensorField& a, const TensorField& b) {
  TensorField c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Field s = a[3 * i] * b[j];
      for (int k = 1; k < 3; ++k) s += a[3 * i + k] * b[3 * k + j];
      c[3 * i + j] = std::move(s);
    }
  return c;
}

TensorField sandwich(const TensorField& p, const TensorField& t) { return matmul(matmul(p, t), p); }

}  // namespace

void require_finite(const Field& f, const char* what) {
  if (!f.allFinite()) fail(ErrorKind::NonFiniteInput, std::string(what) + " contains NaN or Inf");
}

std::shared_ptr<const ReferenceSurface> ReferenceSurface::flat(std::shared_ptr<const Fourier2> grid,
                                                               double z0, double chart_radius,
                                                               double wall_gap) {
  const std::size_t n = grid->points();
  if (!(1.0 - std::abs(z0) >= 2.0 * wall_gap))
    fail(ErrorKind::ValidationError,
         "reference surface at z0=" + std::to_string(z0) + " is closer than 2*c0 to a wall",
         "geometry.z0");
  auto ref = std::shared_ptr<ReferenceSurface>(new ReferenceSurface());
  ref->grid_ = std::move(grid);
  ref->offset_ = {Field::Zero(n), Field::Zero(n), Field::Constant(n, z0)};
  ref->transversal_ = {Field::Zero(n), Field::Zero(n), Field::Constant(n, -1.0)};
  ref->normal_ = ref->transversal_;
  ref->chart_radius_ = chart_radius;
  ref->wall_gap_ = wall_gap;
  ref->height_ = z0;
  ref->flat_ = true;
  return ref;
}

std::shared_ptr<const ReferenceSurface> ReferenceSurface::embedded(
    std::shared_ptr<const Fourier2> grid, const Vec3Field& offset, double chart_radius,
    double wall_gap, double smoothing_cells) {
  for (const auto& c : offset) require_finite(c, "reference embedding");
  const Fourier2& g = *grid;
  auto ref = std::shared_ptr<ReferenceSurface>(new ReferenceSurface());
  ref->grid_ = grid;
  ref->offset_ = offset;
  ref->chart_radius_ = chart_radius;
  ref->wall_gap_ = wall_gap;

  Vec3Field xu, xv;
  for (int c = 0; c < 3; ++c) {
    xu[c] = g.du(offset[c]);
    xv[c] = g.dv(offset[c]);
  }
  xu[0] += 1.0;
  xv[1] += 1.0;
  Vec3Field nrm = cross(xu, xv);
  Field len = dot(nrm, nrm).sqrt();
  if (len.minCoeff() <= 1e-12) fail(ErrorKind::DegenerateMetric, "reference embedding is singular");
  for (auto& c : nrm) c = -c / len;
  ref->normal_ = nrm;

  const double width = smoothing_cells * kTwoPi / g.nu();
  Vec3Field smooth;
  for (int c = 0; c < 3; ++c)
    smooth[c] = g.apply_symbol(nrm[c], [width](double a, double b) {
      return std::exp(-0.5 * width * width * (a * a + b * b));
    });
  Field slen = dot(smooth, smooth).sqrt();
  for (auto& c : smooth) c /= slen;
  ref->transversal_ = smooth;
  if (dot(smooth, nrm).minCoeff() < 0.9)
    fail(ErrorKind::ValidationError, "transversal field violates nu.n* >= 0.9",
         "geometry.sigma_nu");

  const double zmax = offset[2].maxCoeff(), zmin = offset[2].minCoeff();
  if (1.0 - zmax < 2.0 * wall_gap || zmin + 1.0 < 2.0 * wall_gap)
    fail(ErrorKind::ValidationError, "reference surface is closer than 2*c0 to a wall",
         "geometry.reference");

  const bool planar = (offset[0].abs().maxCoeff() == 0.0) && (offset[1].abs().maxCoeff() == 0.0) &&
                      (zmax == zmin);
  ref->flat_ = planar;
  ref->height_ = planar ? zmax : 0.0;
  if (planar) {
    ref->normal_ = {Field::Zero(g.points()), Field::Zero(g.points()), Field::Constant(g.points(), -1.0)};
    ref->transversal_ = ref->normal_;
  }
  return ref;
}

Vec3Field ReferenceSurface::position() const {
  Vec3Field p = offset_;
  p[0] += grid_->nodes_u();
  p[1] += grid_->nodes_v();
  return p;
}

std::vector<cplx> HeightField::spectral_coeffs(const Fourier2& grid) const {
  std::vector<cplx> out(grid.modes());
  grid.forward(values_.data(), out.data());
  return out;
}

double HeightField::sobolev_norm(const Fourier2& grid, double s) const {
  const auto c = spectral_coeffs(grid);
  const int nh = grid.nu() / 2 + 1;
  const double norm = 1.0 / double(grid.points());
  double sum = 0.0;
  for (int j = 0; j < grid.nv(); ++j)
    for (int i = 0; i < nh; ++i) {
      const double mult = (i == 0 || grid.nyquist_u(i)) ? 1.0 : 2.0;
      const double k2 = grid.ku(i) * grid.ku(i) + grid.kv(j) * grid.kv(j);
      sum += mult * std::pow(1.0 + k2, s) * std::norm(c[std::size_t(j) * nh + i] * norm);
    }
  return kTwoPi * std::sqrt(sum);
}

std::uint64_t HeightField::hash(const Fourier2& grid) const {
  const auto c = spectral_coeffs(grid);
  std::uint64_t h = 1469598103934665603ull;
  const auto* bytes = reinterpret_cast<const unsigned char*>(c.data());
  for (std::size_t k = 0; k < c.size() * sizeof(cplx); ++k) {
    h ^= bytes[k];
    h *= 1099511628211ull;
  }
  return h;
}

double SurfaceGeometry::integrate(const Field& f) const {
  return (f * area_density).sum() * grid().cell_area();
}

SurfaceGeometry build_geometry(std::shared_ptr<const ReferenceSurface> ref,
                               const HeightField& gamma) {
  require_finite(gamma.values(), "height field");
  const Fourier2& g = ref->grid();
  if (std::size_t(gamma.values().size()) != g.points())
    fail(ErrorKind::ValidationError, "height field does not match the reference grid");
  if (gamma.max_abs() >= ref->chart_radius())
    fail(ErrorKind::ChartOverflow, "max|gamma| = " + std::to_string(gamma.max_abs()) +
                                       " reaches the chart radius " +
                                       std::to_string(ref->chart_radius()));
  SurfaceGeometry geom;
  geom.reference = ref;
  geom.gamma = gamma.values();
  const std::size_t n = g.points();
  Vec3Field xuu, xuv, xvv;
  for (int c = 0; c < 3; ++c) {
    geom.offset[c] = ref->offset()[c] + gamma.values() * ref->transversal()[c];
    geom.tangent_u[c].resize(n);
    geom.tangent_v[c].resize(n);
    g.derivatives(geom.offset[c].data(), geom.tangent_u[c].data(), geom.tangent_v[c].data());
    xuu[c].resize(n);
    xuv[c].resize(n);
    xvv[c].resize(n);
    g.derivatives(geom.tangent_u[c].data(), xuu[c].data(), xuv[c].data());
    g.derivatives(geom.tangent_v[c].data(), nullptr, xvv[c].data());
  }
  geom.tangent_u[0] += 1.0;
  geom.tangent_v[1] += 1.0;
  geom.position = geom.offset;
  geom.position[0] += g.nodes_u();
  geom.position[1] += g.nodes_v();

  geom.g_uu = dot(geom.tangent_u, geom.tangent_u);
  geom.g_uv = dot(geom.tangent_u, geom.tangent_v);
  geom.g_vv = dot(geom.tangent_v, geom.tangent_v);
  Field det = geom.g_uu * geom.g_vv - geom.g_uv * geom.g_uv;
  if (!(det.minCoeff() > 1e-14)) fail(ErrorKind::DegenerateMetric, "metric determinant is not positive");
  geom.ginv_uu = geom.g_vv / det;
  geom.ginv_uv = -geom.g_uv / det;
  geom.ginv_vv = geom.g_uu / det;
  geom.area_density = det.sqrt();

  Vec3Field nrm = cross(geom.tangent_u, geom.tangent_v);
  for (auto& c : nrm) c = -c / geom.area_density;
  geom.normal = nrm;

  geom.ii_uu = -dot(nrm, xuu);
  geom.ii_uv = -dot(nrm, xuv);
  geom.ii_vv = -dot(nrm, xvv);
  geom.curvature = geom.ginv_uu * geom.ii_uu + 2.0 * geom.ginv_uv * geom.ii_uv + geom.ginv_vv * geom.ii_vv;
  geom.transversality = dot(ref->transversal(), nrm);
  return geom;
}

Vec3Field surface_gradient(const SurfaceGeometry& geom, const Field& f) {
  const Fourier2& g = geom.grid();
  Field fu(f.size()), fv(f.size());
  g.derivatives(f.data(), fu.data(), fv.data());
  Field a = geom.ginv_uu * fu + geom.ginv_uv * fv;
  Field b = geom.ginv_uv * fu + geom.ginv_vv * fv;
  Vec3Field out;
  for (int c = 0; c < 3; ++c) out[c] = a * geom.tangent_u[c] + b * geom.tangent_v[c];
  return out;
}

Field laplace_beltrami(const SurfaceGeometry& geom, const Field& f) {
  const Fourier2& g = geom.grid();
  Field fu(f.size()), fv(f.size());
  g.derivatives(f.data(), fu.data(), fv.data());
  Field flux_u = geom.area_density * (geom.ginv_uu * fu + geom.ginv_uv * fv);
  Field flux_v = geom.area_density * (geom.ginv_uv * fu + geom.ginv_vv * fv);
  Field out(f.size());
  g.divergence(flux_u.data(), flux_v.data(), out.data());
  return out / geom.area_density;
}

Field surface_divergence(const SurfaceGeometry& geom, const Vec3Field& x) {
  const Fourier2& g = geom.grid();
  Field out = Field::Zero(geom.points());
  for (int c = 0; c < 3; ++c) {
    Field xu(x[c].size()), xv(x[c].size());
    g.derivatives(x[c].data(), xu.data(), xv.data());
    Field eu = geom.ginv_uu * geom.tangent_u[c] + geom.ginv_uv * geom.tangent_v[c];
    Field ev = geom.ginv_uv * geom.tangent_u[c] + geom.ginv_vv * geom.tangent_v[c];
    out += eu * xu + ev * xv;
  }
  return out;
}

TensorField tangential_jacobian(const SurfaceGeometry& geom, const Vec3Field& x) {
  const Fourier2& g = geom.grid();
  Vec3Field xu, xv, eu, ev;
  for (int c = 0; c < 3; ++c) {
    xu[c].resize(x[c].size());
    xv[c].resize(x[c].size());
    g.derivatives(x[c].data(), xu[c].data(), xv[c].data());
    eu[c] = geom.ginv_uu * geom.tangent_u[c] + geom.ginv_uv * geom.tangent_v[c];
    ev[c] = geom.ginv_uv * geom.tangent_u[c] + geom.ginv_vv * geom.tangent_v[c];
  }
  TensorField t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[3 * i + j] = eu[i] * xu[j] + ev[i] * xv[j];
  return t;
}

TensorField second_form_tensor(const SurfaceGeometry& geom) {
  return tangential_jacobian(geom, geom.normal);
}

TensorField tangent_projector(const SurfaceGeometry& geom) {
  TensorField p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      p[3 * i + j] = (i == j ? 1.0 : 0.0) - geom.normal[i] * geom.normal[j];
  return p;
}

TensorField tensor_laplacian(const SurfaceGeometry& geom, const TensorField& t) {
  const Fourier2& g = geom.grid();
  const TensorField p = tangent_projector(geom);
  TensorField tu, tv;
  for (int k = 0; k < 9; ++k) {
    tu[k].resize(t[k].size());
    tv[k].resize(t[k].size());
    g.derivatives(t[k].data(), tu[k].data(), tv[k].data());
  }
  tu = sandwich(p, tu);
  tv = sandwich(p, tv);
  TensorField div;
  for (int k = 0; k < 9; ++k) {
    Field fu = geom.area_density * (geom.ginv_uu * tu[k] + geom.ginv_uv * tv[k]);
    Field fv = geom.area_density * (geom.ginv_uv * tu[k] + geom.ginv_vv * tv[k]);
    div[k].resize(fu.size());
    g.divergence(fu.data(), fv.data(), div[k].data());
    div[k] /= geom.area_density;
  }
  return sandwich(p, div);
}

TensorField hessian(const SurfaceGeometry& geom, const Field& f) {
  TensorField h = sandwich(tangent_projector(geom), tangential_jacobian(geom, surface_gradient(geom, f)));
  TensorField sym;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) sym[3 * i + j] = 0.5 * (h[3 * i + j] + h[3 * j + i]);
  return sym;
}

IdentityResiduals geometric_identities(const SurfaceGeometry& geom) {
  IdentityResiduals res;
  const TensorField ii = second_form_tensor(geom);
  const TensorField lap = tensor_laplacian(geom, ii);
  const TensorField hess = hessian(geom, geom.curvature);
  const TensorField ii2 = matmul(ii, ii);
  Field norm2 = Field::Zero(geom.points());
  for (int k = 0; k < 9; ++k) norm2 += ii[k] * ii[k];
  for (int k = 0; k < 9; ++k) {
    Field r = lap[k] - hess[k] - geom.curvature * ii2[k] + norm2 * ii[k];
    res.simons = std::max(res.simons, r.abs().maxCoeff());
  }
  const Vec3Field grad_k = surface_gradient(geom, geom.curvature);
  for (int c = 0; c < 3; ++c) {
    Field r = laplace_beltrami(geom, geom.normal[c]) + norm2 * geom.normal[c] - grad_k[c];
    res.normal_laplacian = std::max(res.normal_laplacian, r.abs().maxCoeff());
  }
  return res;
}

ModifiedCurvature kappa_a_forward(std::shared_ptr<const ReferenceSurface> ref,
                                  const HeightField& gamma, double stiffness) {
  const SurfaceGeometry geom = build_geometry(std::move(ref), gamma);
  return {geom.curvature + stiffness * stiffness * gamma.values(), stiffness};
}

std::vector<TrigMode> real_trig_modes(const Fourier2& grid, bool include_nyquist) {
  std::vector<TrigMode> modes;
  const int nu = grid.nu(), nv = grid.nv();
  for (int i = 0; i <= nu / 2; ++i) {
    if (!include_nyquist && grid.nyquist_u(i)) continue;
    const bool edge = (i == 0 || grid.nyquist_u(i));
    for (int j = 0; j < nv; ++j) {
      if (!include_nyquist && grid.nyquist_v(j)) continue;
      const double kv = grid.kv(j);
      if (edge && kv < 0) continue;  // conjugate of a listed mode
      const bool self_conjugate = edge && (j == 0 || grid.nyquist_v(j));
      modes.push_back({double(i), kv, false});
      if (!self_conjugate) modes.push_back({double(i), kv, true});
    }
  }
  return modes;
}

Field trig_mode_values(const Fourier2& grid, const TrigMode& mode) {
  Field phase = mode.ku * grid.nodes_u() + mode.kv * grid.nodes_v();
  return mode.sine ? Field(phase.sin()) : Field(phase.cos());
}

NewtonReport kappa_a_invert(std::shared_ptr<const ReferenceSurface> ref, const Field& target,
                            double stiffness, const HeightField& guess,
                            const NewtonOptions& opts) {
  require_finite(target, "curvature target");
  const Fourier2& grid = ref->grid();
  const std::size_t n = grid.points();
  const double a2 = stiffness * stiffness;
  auto residual_of = [&](const Field& gamma) {
    return Field(kappa_a_forward(ref, HeightField(gamma), stiffness).values - target);
  };

  NewtonReport report;
  Field gamma = guess.values().size() ? guess.values() : Field::Zero(n);
  Field r = residual_of(gamma);
  double rnorm = r.abs().maxCoeff();

  const bool dense = n <= opts.dense_limit;
  std::vector<TrigMode> basis;
  if (dense) basis = real_trig_modes(grid, true);

  while (rnorm > opts.tolerance) {
    if (report.iterations >= opts.max_iter)
      fail(ErrorKind::NewtonDiverged, "Newton did not reach tolerance in " +
                                          std::to_string(opts.max_iter) + " iterations (residual " +
                                          std::to_string(rnorm) + ")");
    Field delta(n);
    if (dense) {
      Eigen::MatrixXd jac(n, n), modes(n, n);
      for (std::size_t m = 0; m < basis.size(); ++m) {
        Field b = trig_mode_values(grid, basis[m]);
        const double h = opts.fd_step;
        Field col = (residual_of(gamma + h * b) - residual_of(gamma - h * b)) / (2.0 * h);
        jac.col(m) = col.matrix();
        modes.col(m) = b.matrix();
      }
      Eigen::VectorXd c = jac.partialPivLu().solve(-r.matrix());
      delta = (modes * c).array();
    } else {
      LinearMap op = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        const double scale = x.cwiseAbs().maxCoeff();
        if (scale == 0.0) {
          y.setZero(x.size());
          return;
        }
        const double h = opts.fd_step / scale;
        y = ((residual_of(gamma + h * x.array()) - residual_of(gamma - h * x.array())) / (2.0 * h))
                .matrix();
      };
      LinearMap pre = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        y = grid.apply_symbol(x.array(), [a2](double p, double q) { return 1.0 / (a2 + p * p + q * q); })
                .matrix();
      };
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      gmres(op, pre, -r.matrix(), x, 1e-12, 60, 400);
      delta = x.array();
    }
    // Backtracking keeps the iterate inside the chart and the residual decreasing.
    double step = 1.0;
    bool accepted = false;
    for (int tries = 0; tries < 8 && !accepted; ++tries, step *= 0.5) {
      Field trial = gamma + step * delta;
      if (trial.abs().maxCoeff() >= ref->chart_radius()) continue;
      Field rt = residual_of(trial);
      const double tn = rt.abs().maxCoeff();
      if (tn < rnorm) {
        gamma = trial;
        r = rt;
        rnorm = tn;
        accepted = true;
      }
    }
    ++report.iterations;
    if (!accepted) {
      if ((gamma + delta).abs().maxCoeff() >= ref->chart_radius())
        fail(ErrorKind::ChartOverflow, "Newton iterate leaves the chart");
      fail(ErrorKind::NewtonDiverged, "Newton step failed to reduce the residual " + std::to_string(rnorm));
    }
  }
  report.gamma = HeightField(gamma);
  report.residual = rnorm;
  return report;
}

}  // namespace pil::surface
