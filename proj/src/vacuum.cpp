#include "pil/error.hpp"
#include "pil/fields.hpp"

namespace pil::fields {
namespace {

using harmonic::BoundaryData;

// Vacuum field with wall tangential part R(j) = (-j_y, j_x) and interface
// normal trace `normal_data`: c + grad phi with c the mean of R(j).
Vec3Field vacuum_div_curl(const BulkGrid& minus, const std::array<Field, 2>& current, const Field& normal_data,
                          RecoveryReport* report) {
  if (minus.side() != Side::Minus) fail(ErrorKind::ValidationError, "vacuum recovery runs on the vacuum side");
  surface::require_finite(current[0], "surface current");
  surface::require_finite(current[1], "surface current");
  const Fourier2& four = minus.fourier();
  const Field rx = -current[1];
  const Field ry = current[0];
  const double cx = rx.mean();
  const double cy = ry.mean();

  // Wall potential: its horizontal gradient is R(j) - c when div j = 0.
  Field div(four.points());
  four.divergence(rx.data(), ry.data(), div.data());
  const Field wall_potential = four.apply_symbol(div, [](double ku, double kv) {
    const double k2 = ku * ku + kv * kv;
    return k2 > 0.0 ? -1.0 / k2 : 0.0;
  });

  const Vec3Field& n = minus.interface_normal();
  const Field neumann = normal_data - (cx * n[0] + cy * n[1]);
  harmonic::EllipticReport rep;
  const Field phi = harmonic::solve_elliptic(minus, Field::Zero(minus.size()), BoundaryData::neumann(neumann),
                                             BoundaryData::dirichlet(wall_potential), {}, &rep);
  if (report) *report = RecoveryReport{rep.iterations, 0.0, 0.0};
  Vec3Field h = minus.gradient(phi);
  h[0] += cx;
  h[1] += cy;
  return h;
}

}  // namespace

Vec3Field solve_vacuum_field(const BulkGrid& minus, const std::array<Field, 2>& current, RecoveryReport* report) {
  return vacuum_div_curl(minus, current, Field::Zero(minus.slice()), report);
}

Vec3Field solve_time_derivative_vacuum(const BulkGrid& minus, const BulkGrid& plus, const Vec3Field& v,
                                       const Vec3Field& hhat, const std::array<Field, 2>& current_rate,
                                       RecoveryReport* report) {
  const std::size_t ns = minus.slice();
  const Vec3Field& n = minus.interface_normal();
  Field data = Field::Zero(ns);
  for (int c = 0; c < 3; ++c) {
    const Vec3Field dv = plus.gradient(v[c]);
    const Vec3Field dh = minus.gradient(hhat[c]);
    Field h_dot_grad_v = Field::Zero(ns), v_dot_grad_h = Field::Zero(ns);
    for (int k = 0; k < 3; ++k) {
      h_dot_grad_v += hhat[k].head(ns) * dv[k].head(ns);
      v_dot_grad_h += v[k].head(ns) * dh[k].head(ns);
    }
    data += n[c] * (h_dot_grad_v - v_dot_grad_h);
  }
  return vacuum_div_curl(minus, current_rate, data, report);
}

}  // namespace pil::fields
