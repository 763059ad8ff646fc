#include "pil/error.hpp"
#include "pil/harmonic.hpp"

#include <cmath>

namespace pil::harmonic {

const char* side_name(Side side) { return side == Side::Plus ? "plus" : "minus"; }

BulkGrid::BulkGrid(Side side, std::shared_ptr<const Fourier2> fourier,
                   std::shared_ptr<const Chebyshev> cheb, Vec3Field position, Vec3Field interface_normal)
    : side_(side),
      fourier_(std::move(fourier)),
      cheb_(std::move(cheb)),
      position_(std::move(position)),
      normal_(std::move(interface_normal)) {
  const std::size_t ns = slice(), n = size();
  const int nl = levels();
  for (const auto& c : position_) surface::require_finite(c, "bulk grid position");

  // Horizontal periodic part of the position.
  Field uu(n), vv(n);
  const Field un = fourier_->nodes_u(), vn = fourier_->nodes_v();
  for (int k = 0; k < nl; ++k) {
    uu.segment(k * ns, ns) = un;
    vv.segment(k * ns, ns) = vn;
  }
  const Vec3Field periodic = {position_[0] - uu, position_[1] - vv, position_[2]};
  for (int c = 0; c < 3; ++c) {
    Field du(n), dv(n), ds(n);
    fourier_->derivatives(periodic[c].data(), du.data(), dv.data(), nl);
    Chebyshev::apply(cheb_->d1(), periodic[c].data(), ds.data(), ns);
    if (c == 0) du += 1.0;
    if (c == 1) dv += 1.0;
    dx_[0 * 3 + c] = std::move(du);
    dx_[1 * 3 + c] = std::move(dv);
    dx_[2 * 3 + c] = std::move(ds);
  }
  jac_.resize(n);
  for (auto& f : finv_) f.resize(n);
  for (auto& f : gmet_) f.resize(n);
  const double sign = orientation(side_);
  for (std::size_t p = 0; p < n; ++p) {
    Eigen::Matrix3d f;  // f(j,i) = dX_j / dxi^i
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f(j, i) = dx_[3 * i + j][p];
    const double det = f.determinant();
    if (!(sign * det > 0.0))
      fail(ErrorKind::FoldedMap, std::string("coordinate map folds on the ") + side_name(side_) +
                                     " side (Jacobian " + std::to_string(det) + ")");
    jac_[p] = det;
    const Eigen::Matrix3d inv = f.inverse();  // inv(i,j) = dxi^i / dx_j
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) finv_[3 * i + j][p] = inv(i, j);
    const Eigen::Matrix3d g = det * inv * inv.transpose();
    gmet_[0][p] = g(0, 0);
    gmet_[1][p] = g(0, 1);
    gmet_[2][p] = g(0, 2);
    gmet_[3][p] = g(1, 1);
    gmet_[4][p] = g(1, 2);
    gmet_[5][p] = g(2, 2);
  }
  quad_.resize(n);
  const auto& w = cheb_->weights();
  for (int k = 0; k < nl; ++k) quad_.segment(k * ns, ns) = jac_.segment(k * ns, ns).abs() * w[k];
  quad_ *= fourier_->cell_area();

  auto area_at = [&](int k) {
    Field a = Field::Zero(ns);
    const std::size_t off = std::size_t(k) * ns;
    Vec3Field cu, cv;
    for (int c = 0; c < 3; ++c) {
      cu[c] = dx_[c].segment(off, ns);
      cv[c] = dx_[3 + c].segment(off, ns);
    }
    Field x = cu[1] * cv[2] - cu[2] * cv[1];
    Field y = cu[2] * cv[0] - cu[0] * cv[2];
    Field z = cu[0] * cv[1] - cu[1] * cv[0];
    return Field((x * x + y * y + z * z).sqrt());
  };
  interface_area_ = area_at(0);
  wall_area_ = area_at(nl - 1);
}

void BulkGrid::xi_gradient(const Field& f, Field& du, Field& dv, Field& ds) const {
  du.resize(size());
  dv.resize(size());
  ds.resize(size());
  fourier_->derivatives(f.data(), du.data(), dv.data(), levels());
  Chebyshev::apply(cheb_->d1(), f.data(), ds.data(), slice());
}

Vec3Field BulkGrid::gradient(const Field& f) const {
  Field d[3];
  xi_gradient(f, d[0], d[1], d[2]);
  Vec3Field out;
  for (int j = 0; j < 3; ++j) out[j] = finv_[j] * d[0] + finv_[3 + j] * d[1] + finv_[6 + j] * d[2];
  return out;
}

Field BulkGrid::divergence(const Vec3Field& u) const {
  Field piola[3];
  for (int i = 0; i < 3; ++i)
    piola[i] = jac_ * (finv_[3 * i] * u[0] + finv_[3 * i + 1] * u[1] + finv_[3 * i + 2] * u[2]);
  Field out(size()), ds(size());
  fourier_->divergence(piola[0].data(), piola[1].data(), out.data(), levels());
  Chebyshev::apply(cheb_->d1(), piola[2].data(), ds.data(), slice());
  return (out + ds) / jac_;
}

Vec3Field BulkGrid::curl(const Vec3Field& u) const {
  // Covariant components U_i = dX/dxi^i . u, then the Piola image of curl_xi U.
  Field cov[3];
  for (int i = 0; i < 3; ++i) cov[i] = dx_[3 * i] * u[0] + dx_[3 * i + 1] * u[1] + dx_[3 * i + 2] * u[2];
  Field d[3][3];
  for (int i = 0; i < 3; ++i) xi_gradient(cov[i], d[i][0], d[i][1], d[i][2]);
  // d[i][k] = d_k U_i
  Field c1 = d[2][1] - d[1][2];
  Field c2 = d[0][2] - d[2][0];
  Field c3 = d[1][0] - d[0][1];
  Vec3Field out;
  for (int j = 0; j < 3; ++j) out[j] = (dx_[j] * c1 + dx_[3 + j] * c2 + dx_[6 + j] * c3) / jac_;
  return out;
}

Field BulkGrid::laplacian(const Field& f) const {
  Field d0, d1, d2;
  xi_gradient(f, d0, d1, d2);
  Field flux0 = gmet_[0] * d0 + gmet_[1] * d1 + gmet_[2] * d2;
  Field flux1 = gmet_[1] * d0 + gmet_[3] * d1 + gmet_[4] * d2;
  Field flux2 = gmet_[2] * d0 + gmet_[4] * d1 + gmet_[5] * d2;
  Field out(size()), ds(size());
  fourier_->divergence(flux0.data(), flux1.data(), out.data(), levels());
  Chebyshev::apply(cheb_->d1(), flux2.data(), ds.data(), slice());
  return (out + ds) / jac_;
}

Vec3Field BulkGrid::advect(const Vec3Field& a, const Vec3Field& b) const {
  Vec3Field out;
  for (int c = 0; c < 3; ++c) {
    const Vec3Field g = gradient(b[c]);
    out[c] = a[0] * g[0] + a[1] * g[1] + a[2] * g[2];
  }
  return out;
}

Field BulkGrid::interface_normal_derivative(const Field& f) const {
  const Vec3Field g = gradient(f);
  return interface_trace(g[0]) * normal_[0] + interface_trace(g[1]) * normal_[1] +
         interface_trace(g[2]) * normal_[2];
}

Field BulkGrid::wall_normal_derivative(const Field& f) const {
  const Vec3Field g = gradient(f);
  return wall_height(side_) * wall_trace(g[2]);
}

Field BulkGrid::apply_symbol(const Field& f, const std::function<double(double, double)>& symbol) const {
  return fourier_->apply_symbol(f, symbol, levels());
}

}  // namespace pil::harmonic
