#include "pil/error.hpp"
#include "pil/harmonic.hpp"
#include "pil/parallel.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace pil::harmonic {

namespace {

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

constexpr char kDnMagic[8] = {'P', 'I', 'L', 'D', 'N', 'O', 'P', '1'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void get(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
void put_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  put(out, std::int64_t(m.rows()));
  put(out, std::int64_t(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(double) * m.size()));
}
void get_matrix(std::ifstream& in, Eigen::MatrixXd& m) {
  std::int64_t r = 0, c = 0;
  get(in, r);
  get(in, c);
  m.resize(r, c);
  in.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(double) * m.size()));
}

}  // namespace

DNOperator dn_assemble(const BulkGrid& grid, const surface::SurfaceGeometry& geom, int threads) {
  const Fourier2& f = grid.fourier();
  DNOperator op;
  op.side_ = grid.side();
  op.hash_ = surface::HeightField(geom.gamma).hash(f);
  op.modes_ = surface::real_trig_modes(f, false);
  const std::size_t n = f.points(), m = op.modes_.size();
  op.basis_.resize(n, m);
  for (std::size_t k = 0; k < m; ++k) {
    Field b = surface::trig_mode_values(f, op.modes_[k]);
    op.basis_.col(k) = (b / std::sqrt((b * b).sum())).matrix();
  }
  Eigen::MatrixXd image(n, m);
  parallel_for(m, threads, [&](std::size_t k) {
    const Field col = op.basis_.col(k).array();
    image.col(k) = dn_apply(grid, col).matrix();
  });
  op.coords_ = op.basis_.transpose() * image;
  op.finish(geom.area_density, f.cell_area());
  return op;
}

void DNOperator::finish(const Field& area_density, double cell_area) {
  gram_ = basis_.transpose() * (area_density * cell_area).matrix().asDiagonal() * basis_;
  gram_ = symmetrize(gram_);
  const Eigen::MatrixXd s = symmetrize(gram_ * coords_);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(s, gram_);
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
  nodal_ = basis_ * coords_ * basis_.transpose();
}

Field DNOperator::apply(const Field& f) const {
  const Eigen::VectorXd c = basis_.transpose() * f.matrix();
  return (basis_ * (coords_ * c)).array();
}

Field DNOperator::solve(const Field& f, const Field& area_density) const {
  (void)area_density;
  const Eigen::VectorXd c = basis_.transpose() * f.matrix();
  Eigen::VectorXd y = evecs_.transpose() * (gram_ * c);
  const double scale = std::max(evals_.cwiseAbs().maxCoeff(), 1e-300);
  if (std::abs(y[0]) > 1e-8 * std::max(y.norm(), 1e-300) && std::abs(evals_[0]) <= 1e-8 * scale)
    fail(ErrorKind::SingularInverse, "DN inverse requested on data with a constant component");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y[i] = std::abs(evals_[i]) <= 1e-8 * scale ? 0.0 : y[i] / evals_[i];
  return (basis_ * (evecs_ * y)).array();
}

double DNOperator::symmetry_defect(const Field& f, const Field& g, const Field& area_density) const {
  const Field mf = apply(f), mg = apply(g);
  const double a = (mf * g * area_density).sum(), b = (f * mg * area_density).sum();
  const double scale = std::sqrt((mf * mf * area_density).sum() * (g * g * area_density).sum());
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

int DNOperator::kernel_dimension(double tol) const {
  const double scale = evals_.cwiseAbs().maxCoeff();
  int count = 0;
  for (Eigen::Index i = 0; i < evals_.size(); ++i)
    if (std::abs(evals_[i]) <= tol * scale) ++count;
  return count;
}

void DNOperator::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write DN cache file", path);
  out.write(kDnMagic, sizeof(kDnMagic));
  put(out, std::int32_t(side_ == Side::Plus ? 1 : -1));
  put(out, hash_);
  put(out, std::int64_t(modes_.size()));
  for (const auto& md : modes_) {
    put(out, md.ku);
    put(out, md.kv);
    put(out, std::int8_t(md.sine));
  }
  for (const auto* m : {&basis_, &coords_, &gram_, &nodal_, &evecs_}) put_matrix(out, *m);
  put_matrix(out, evals_);
}

DNOperator DNOperator::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open DN cache file", path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kDnMagic, sizeof(magic)) != 0)
    fail(ErrorKind::VersionMismatch, "DN cache header does not match this version", path);
  DNOperator op;
  std::int32_t side = 0;
  get(in, side);
  op.side_ = side > 0 ? Side::Plus : Side::Minus;
  get(in, op.hash_);
  std::int64_t nm = 0;
  get(in, nm);
  op.modes_.resize(nm);
  for (auto& md : op.modes_) {
    std::int8_t sine = 0;
    get(in, md.ku);
    get(in, md.kv);
    get(in, sine);
    md.sine = sine != 0;
  }
  for (auto* m : {&op.basis_, &op.coords_, &op.gram_, &op.nodal_, &op.evecs_}) get_matrix(in, *m);
  Eigen::MatrixXd ev;
  get_matrix(in, ev);
  op.evals_ = ev.col(0);
  if (!in) fail(ErrorKind::IoError, "truncated DN cache file", path);
  return op;
}

std::shared_ptr<const DNOperator> DnCache::get(const BulkGrid& grid, const surface::SurfaceGeometry& geom,
                                               int threads) {
  const auto key = std::make_pair(int(grid.side()), surface::HeightField(geom.gamma).hash(grid.fourier()));
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  auto op = std::make_shared<const DNOperator>(dn_assemble(grid, geom, threads));
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.emplace(key, op).first->second;
}

SurfacePowers::SurfacePowers(std::shared_ptr<const DNOperator> dn, const surface::SurfaceGeometry& geom,
                             double tol_eig)
    : dn_(std::move(dn)), area_density_(geom.area_density), cell_area_(geom.grid().cell_area()) {
  const Eigen::MatrixXd& b = dn_->basis();
  const Eigen::MatrixXd& x = dn_->eigenvectors();
  const Eigen::VectorXd& lam = dn_->eigenvalues();
  const std::size_t m = b.cols();
  const double lscale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  sqrt_lambda_.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (lam[i] < -tol_eig * lscale)
      fail(ErrorKind::NegativeEigenvalue, "DN operator has a negative eigenvalue " + std::to_string(lam[i]));
    // The constant mode is an exact kernel; solver noise must not leak through the square root.
    sqrt_lambda_[i] = std::abs(lam[i]) <= tol_eig * lscale ? 0.0 : std::sqrt(std::max(lam[i], 0.0));
  }
  // -Lap in basis coordinates, symmetrised in the dS inner product.
  Eigen::MatrixXd lap(b.rows(), m);
  for (std::size_t k = 0; k < m; ++k) lap.col(k) = (-surface::laplace_beltrami(geom, b.col(k).array())).matrix();
  const Eigen::MatrixXd s_lap = symmetrize(dn_->gram() * (b.transpose() * lap));
  const Eigen::MatrixXd lhat = x.transpose() * s_lap * x;
  const Eigen::MatrixXd t = symmetrize(sqrt_lambda_.asDiagonal() * lhat * sqrt_lambda_.asDiagonal());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  mu_ = es.eigenvalues();
  z_ = es.eigenvectors();
  const double mscale = std::max(1.0, mu_.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < mu_.size(); ++i) {
    if (mu_[i] < -tol_eig * mscale)
      fail(ErrorKind::NegativeEigenvalue,
           "symmetrised surface operator has a negative eigenvalue " + std::to_string(mu_[i]));
    mu_[i] = std::max(mu_[i], 0.0);
  }
  to_eig_ = x.transpose() * dn_->gram() * b.transpose();
  from_eig_ = b * x;
}

Eigen::VectorXd SurfacePowers::coefficients(int l, const Field& f, bool full) const {
  Eigen::VectorXd y = to_eig_ * f.matrix();
  if (full)
    y = y.cwiseProduct(sqrt_lambda_.cwiseProduct(sqrt_lambda_));
  else
    y = y.cwiseProduct(sqrt_lambda_);
  Eigen::VectorXd w = z_.transpose() * y;
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] *= std::pow(mu_[i], 0.5 * l);
  return z_ * w;
}

Field SurfacePowers::apply(int l, const Field& f) const {
  return (from_eig_ * coefficients(l, f, false)).array();
}

double SurfacePowers::norm2(int l, const Field& f) const { return coefficients(l, f, false).squaredNorm(); }

double SurfacePowers::norm2_full(int l, const Field& f) const { return coefficients(l, f, true).squaredNorm(); }

Field fractional_surface_power(const SurfacePowers& powers, int l, const Field& f) { return powers.apply(l, f); }

}  // namespace pil::harmonic
