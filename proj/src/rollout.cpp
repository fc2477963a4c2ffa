// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>

#include "pemss/model.hpp"

namespace pemss {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using ConstMap = Eigen::Map<const MatrixXd>;
using ConstVec = Eigen::Map<const VectorXd>;
using MutMap = Eigen::Map<MatrixXd>;
using MutVec = Eigen::Map<VectorXd>;

void fill_lti_mx(const ModelStructure& ms, const Layout& L, const double* th,
                 MatrixXd& mx) {
  const int nx = ms.nx, nu = ms.nu, ny = ms.ny;
  mx.resize(ms.mx_rows(), ms.mx_cols());
  mx.topLeftCorner(nx, nx) = ConstMap(th + L.ax, nx, nx);
  mx.topRightCorner(nx, nu) = ConstMap(th + L.bx, nx, nu);
  mx.bottomLeftCorner(ny, nx) = ConstMap(th + L.cx, ny, nx);
  mx.bottomRightCorner(ny, nu) = ConstMap(th + L.dx, ny, nu);
}

void fill_lti_mz(const ModelStructure& ms, const Layout& L, const double* th,
                 MatrixXd& mz) {
  const int nz = ms.nz, ny = ms.ny;
  mz.setZero(ms.mz_dim(), ms.mz_dim());
  mz.topLeftCorner(nz, nz) = ConstMap(th + L.az, nz, nz);
  mz.topRightCorner(nz, ny) = ConstMap(th + L.bz, nz, ny);
  mz.bottomLeftCorner(ny, nz) = ConstMap(th + L.cz, ny, nz);
}

// The free entries of Mz are stored as [vec Az; vec Bz; vec Cz]; the output
// block that would multiply the innovation is structurally zero.
void scatter_mz(const ModelStructure& ms, const double* freev, double* dst) {
  const int nz = ms.nz, ny = ms.ny, dz = ms.mz_dim();
  MutMap mz(dst, dz, dz);
  mz.topLeftCorner(nz, nz) = ConstMap(freev, nz, nz);
  mz.topRightCorner(nz, ny) = ConstMap(freev + Index(nz) * nz, nz, ny);
  mz.bottomLeftCorner(ny, nz) =
      ConstMap(freev + Index(nz) * nz + Index(nz) * ny, ny, nz);
}

void gather_mz(const ModelStructure& ms, const MatrixXd& mzbar, double* dst) {
  const int nz = ms.nz, ny = ms.ny;
  MutMap(dst, nz, nz) = mzbar.topLeftCorner(nz, nz);
  MutMap(dst + Index(nz) * nz, nz, ny) = mzbar.topRightCorner(nz, ny);
  MutMap(dst + Index(nz) * nz + Index(nz) * ny, ny, nz) =
      mzbar.bottomLeftCorner(ny, nz);
}

void check_inputs(const ModelStructure& ms, const Layout& L,
                  const VectorXd& tw, const Dataset& d) {
  require(tw.size() == L.total(), "rollout: parameter vector size mismatch");
  require(d.nu() == ms.nu, "rollout: dataset input channel count mismatch");
  require(d.ny() == ms.ny, "rollout: dataset output channel count mismatch");
  require(d.n() >= 1, "rollout: empty dataset");
  if (ms.family == Family::LpvExternal) {
    if (d.np() != ms.np)
      throw MissingScheduling(
          "rollout: externally scheduled model needs a p channel of width " +
          std::to_string(ms.np));
  }
}

// ---- linear stacked-matrix engine (Lti, LpvExternal, LpvSelf) -------------

// Forward predictor pass and, when `grad` is non-null, the reverse
// accumulation over the stored trajectory. Returns the mean squared
// prediction-residual norm, or +inf when the recursion leaves the finite
// domain (grad and out are then unspecified).
double lin_pem_core(const ModelStructure& ms, const Layout& L,
                    const VectorXd& tw, const Dataset& d, VectorXd* grad,
                    RolloutResult* out) {
  const int nx = ms.nx, nz = ms.nz, nu = ms.nu, ny = ms.ny, np = ms.np;
  const int rx = ms.mx_rows(), sx = ms.mx_cols(), dz = ms.mz_dim();
  const Index N = d.n();
  const Index mxb = ms.mx_block(), mzf = ms.mz_free();
  const double* th = tw.data();
  const double* w0 = tw.data() + L.w0;
  const bool lpv = ms.family != Family::Lti;
  const bool self = ms.family == Family::LpvSelf;
  const bool affine = ms.matrix_dep == MatrixDep::Affine;
  const bool mz_varies = lpv && nz > 0 && ms.noise_scheduled;

  MatrixXd X(nx, N + 1), V(ny, N), E(ny, N);
  MatrixXd Z(nz, N + 1);
  MatrixXd P, MXS, MZS;
  if (self) P.resize(np, N);
  if (lpv) MXS.resize(mxb, N);
  if (mz_varies) MZS.setZero(Index(dz) * dz, N);

  FfnView psi_v{&ms.psi, th + L.psi};
  FfnView fmx_v{&ms.fmx, th + L.mx};
  FfnView fmz_v{&ms.fmz, th + L.mz};
  FfnCache psi_c, fmx_c, fmz_c;
  FfnScratch ws;
  if (self) {
    psi_c.resize(ms.psi, N);
    ws.resize(ms.psi);
  }
  if (lpv && !affine) {
    fmx_c.resize(ms.fmx, N);
    ws.resize(ms.fmx);
    if (nz > 0) {
      fmz_c.resize(ms.fmz, N);
      ws.resize(ms.fmz);
    }
  }

  MatrixXd mx_fix, mz_fix;
  if (!lpv) {
    fill_lti_mx(ms, L, th, mx_fix);
    if (nz > 0) fill_lti_mz(ms, L, th, mz_fix);
  }
  MatrixXd mz_const;
  if (lpv && nz > 0 && !mz_varies) {
    mz_const.setZero(dz, dz);
    scatter_mz(ms, th + L.mz, mz_const.data());
  }

  VectorXd xu(sx), xy(rx), zv(nz + ny), zg(nz + ny);
  VectorXd pk(np), mxv_ffn(mxb), mzfree(mzf);

  X.col(0) = ConstVec(w0, nx);
  Z.col(0) = ConstVec(w0 + nx, nz);

  double acc = 0.0;
  for (Index k = 0; k < N; ++k) {
    xu.head(nx) = X.col(k);
    xu.tail(nu) = d.u.col(k);
    const double* pp = nullptr;
    if (self) {
      ffn_forward_cached(psi_v, xu, psi_c, k, pk, ws);
      P.col(k) = pk;
      pp = P.col(k).data();
    } else if (ms.family == Family::LpvExternal) {
      pp = d.p.col(k).data();
    }
    if (lpv) {
      MutVec mxv(MXS.col(k).data(), mxb);
      if (affine) {
        ConstMap mxc(th + L.mx, mxb, np + 1);
        mxv = mxc.col(0);
        mxv.noalias() += mxc.rightCols(np) * ConstVec(pp, np);
      } else {
        ffn_forward_cached(fmx_v, ConstVec(pp, np), fmx_c, k, mxv_ffn, ws);
        mxv = mxv_ffn;
      }
    }
    ConstMap mx(lpv ? MXS.col(k).data() : mx_fix.data(), rx, sx);
    xy.noalias() = mx * xu;
    X.col(k + 1) = xy.head(nx);
    V.col(k) = d.y.col(k) - xy.tail(ny);
    if (nz > 0) {
      if (mz_varies) {
        if (affine) {
          ConstMap mzc(th + L.mz, mzf, np + 1);
          mzfree = mzc.col(0);
          mzfree.noalias() += mzc.rightCols(np) * ConstVec(pp, np);
        } else {
          ffn_forward_cached(fmz_v, ConstVec(pp, np), fmz_c, k, mzfree, ws);
        }
        scatter_mz(ms, mzfree.data(), MZS.col(k).data());
      }
      ConstMap mz(mz_varies ? MZS.col(k).data()
                            : (lpv ? mz_const.data() : mz_fix.data()),
                  dz, dz);
      zv.head(nz) = Z.col(k);
      zv.tail(ny) = V.col(k);
      zg.noalias() = mz * zv;
      Z.col(k + 1) = zg.head(nz);
      E.col(k) = V.col(k) + zg.tail(ny);
    } else {
      E.col(k) = V.col(k);
    }
    acc += E.col(k).squaredNorm();
  }
  const double loss = acc / double(N);
  if (!std::isfinite(loss) || !X.allFinite() || !Z.allFinite()) return kInf;

  if (out != nullptr) {
    out->e_pred = E;
    out->y_pred = d.y - E;
    out->v = V;
    out->x = X;
    out->z = Z;
  }
  if (grad == nullptr) return loss;

  grad->setZero(L.total());
  double* g = grad->data();
  const double s2n = 2.0 / double(N);

  VectorXd xbar = VectorXd::Zero(nx);
  VectorXd zbar = VectorXd::Zero(nz);
  VectorXd vbar(ny), sxbar(rx), szbar(nz + ny), txu(sx), txz(nz + ny);
  VectorXd pbar(np), ginxu(sx);
  MatrixXd mxbar(rx, sx), mzbar(dz, dz);
  MatrixXd mxacc, mzacc;
  VectorXd mzfreebar(mzf);
  if (!lpv) {
    mxacc.setZero(rx, sx);
    if (nz > 0) mzacc.setZero(dz, dz);
  }

  for (Index k = N - 1; k >= 0; --k) {
    const double* pp = nullptr;
    if (self)
      pp = P.col(k).data();
    else if (ms.family == Family::LpvExternal)
      pp = d.p.col(k).data();

    if (nz > 0) {
      szbar.head(nz) = zbar;
      szbar.tail(ny) = s2n * E.col(k);
      zv.head(nz) = Z.col(k);
      zv.tail(ny) = V.col(k);
      mzbar.noalias() = szbar * zv.transpose();
      ConstMap mz(mz_varies ? MZS.col(k).data()
                            : (lpv ? mz_const.data() : mz_fix.data()),
                  dz, dz);
      txz.noalias() = mz.transpose() * szbar;
      zbar = txz.head(nz);
      vbar = txz.tail(ny);
      vbar += s2n * E.col(k);
    } else {
      vbar = s2n * E.col(k);
    }

    sxbar.head(nx) = xbar;
    sxbar.tail(ny) = -vbar;
    xu.head(nx) = X.col(k);
    xu.tail(nu) = d.u.col(k);
    mxbar.noalias() = sxbar * xu.transpose();
    ConstMap mx(lpv ? MXS.col(k).data() : mx_fix.data(), rx, sx);
    txu.noalias() = mx.transpose() * sxbar;
    xbar = txu.head(nx);

    if (!lpv) {
      mxacc += mxbar;
      if (nz > 0) mzacc += mzbar;
    } else {
      ConstVec mxbarv(mxbar.data(), mxb);
      if (self) pbar.setZero();
      if (affine) {
        MutMap gmx(g + L.mx, mxb, np + 1);
        gmx.col(0) += mxbarv;
        ConstVec pv(pp, np);
        gmx.rightCols(np).noalias() += mxbarv * pv.transpose();
        if (self) {
          ConstMap mxc(th + L.mx, mxb, np + 1);
          pbar.noalias() = mxc.rightCols(np).transpose() * mxbarv;
        }
      } else {
        ffn_backward(fmx_v, ConstVec(pp, np), fmx_c, k, mxbarv, g + L.mx,
                     self ? &pbar : nullptr, ws);
      }
      if (nz > 0) {
        if (mz_varies) {
          gather_mz(ms, mzbar, mzfreebar.data());
          if (affine) {
            MutMap gmz(g + L.mz, mzf, np + 1);
            gmz.col(0) += mzfreebar;
            ConstVec pv(pp, np);
            gmz.rightCols(np).noalias() += mzfreebar * pv.transpose();
            if (self) {
              ConstMap mzc(th + L.mz, mzf, np + 1);
              pbar.noalias() += mzc.rightCols(np).transpose() * mzfreebar;
            }
          } else {
            ffn_backward(fmz_v, ConstVec(pp, np), fmz_c, k, mzfreebar,
                         g + L.mz, self ? &pbar : nullptr, ws);
          }
        } else {
          gather_mz(ms, mzbar, mzfreebar.data());
          MutVec(g + L.mz, mzf) += mzfreebar;
        }
      }
      if (self) {
        ginxu.setZero();
        ffn_backward(psi_v, xu, psi_c, k, pbar, g + L.psi, &ginxu, ws);
        xbar += ginxu.head(nx);
      }
    }
  }

  if (!lpv) {
    MutMap(g + L.ax, nx, nx) += mxacc.topLeftCorner(nx, nx);
    MutMap(g + L.bx, nx, nu) += mxacc.topRightCorner(nx, nu);
    MutMap(g + L.cx, ny, nx) += mxacc.bottomLeftCorner(ny, nx);
    MutMap(g + L.dx, ny, nu) += mxacc.bottomRightCorner(ny, nu);
    if (nz > 0) {
      MutMap(g + L.az, nz, nz) += mzacc.topLeftCorner(nz, nz);
      MutMap(g + L.bz, nz, ny) += mzacc.topRightCorner(nz, ny);
      MutMap(g + L.cz, ny, nz) += mzacc.bottomLeftCorner(ny, nz);
    }
  }
  MutVec(g + L.w0, nx) = xbar;
  MutVec(g + L.w0 + nx, nz) = zbar;
  if (!grad->allFinite()) return kInf;
  return loss;
}

// ---- network-parameterized engine (Nonlinear) ------------------------------

double nl_pem_core(const ModelStructure& ms, const Layout& L,
                   const VectorXd& tw, const Dataset& d, VectorXd* grad,
                   RolloutResult* out) {
  const int nx = ms.nx, nz = ms.nz, nu = ms.nu, ny = ms.ny;
  const Index N = d.n();
  const double* th = tw.data();
  const double* w0 = tw.data() + L.w0;

  MatrixXd X(nx, N + 1), V(ny, N), E(ny, N);
  MatrixXd Z(nz, N + 1);

  FfnView fx_v{&ms.fx, th + L.fx};
  FfnView gx_v{&ms.gx, th + L.gx};
  FfnView fz_v{&ms.fz, th + L.fz};
  FfnView gz_v{&ms.gz, th + L.gz};
  FfnCache fx_c, gx_c, fz1_c, fz0_c, gz1_c, gz0_c;
  FfnScratch ws;
  fx_c.resize(ms.fx, N);
  gx_c.resize(ms.gx, N);
  ws.resize(ms.fx);
  ws.resize(ms.gx);
  if (nz > 0) {
    fz1_c.resize(ms.fz, N);
    fz0_c.resize(ms.fz, N);
    gz1_c.resize(ms.gz, N);
    gz0_c.resize(ms.gz, N);
    ws.resize(ms.fz);
    ws.resize(ms.gz);
  }

  VectorXd xu(nx + nu), zxu(nz + nx + nu), zxuv(nz + nx + nu + ny);
  VectorXd y0(ny), g1(ny), g0(ny), o1(nz), o0(nz), xnext(nx);

  X.col(0) = ConstVec(w0, nx);
  Z.col(0) = ConstVec(w0 + nx, nz);

  double acc = 0.0;
  for (Index k = 0; k < N; ++k) {
    xu.head(nx) = X.col(k);
    xu.tail(nu) = d.u.col(k);
    ffn_forward_cached(gx_v, xu, gx_c, k, y0, ws);
    V.col(k) = d.y.col(k) - y0;
    if (nz > 0) {
      zxu.head(nz) = Z.col(k);
      zxu.segment(nz, nx) = X.col(k);
      zxu.tail(nu) = d.u.col(k);
      ffn_forward_cached(gz_v, zxu, gz1_c, k, g1, ws);
      zxuv.head(nz) = Z.col(k);
      zxuv.segment(nz, nx) = X.col(k);
      zxuv.segment(nz + nx, nu) = d.u.col(k);
      zxuv.tail(ny) = V.col(k);
      ffn_forward_cached(fz_v, zxuv, fz1_c, k, o1, ws);
      zxu.head(nz).setZero();
      ffn_forward_cached(gz_v, zxu, gz0_c, k, g0, ws);
      zxuv.head(nz).setZero();
      zxuv.tail(ny).setZero();
      ffn_forward_cached(fz_v, zxuv, fz0_c, k, o0, ws);
      Z.col(k + 1) = o1 - o0;
      E.col(k) = V.col(k) + g1 - g0;
    } else {
      E.col(k) = V.col(k);
    }
    ffn_forward_cached(fx_v, xu, fx_c, k, xnext, ws);
    X.col(k + 1) = xnext;
    acc += E.col(k).squaredNorm();
  }
  const double loss = acc / double(N);
  if (!std::isfinite(loss) || !X.allFinite() || !Z.allFinite()) return kInf;

  if (out != nullptr) {
    out->e_pred = E;
    out->y_pred = d.y - E;
    out->v = V;
    out->x = X;
    out->z = Z;
  }
  if (grad == nullptr) return loss;

  grad->setZero(L.total());
  double* g = grad->data();
  const double s2n = 2.0 / double(N);

  VectorXd xbar = VectorXd::Zero(nx);
  VectorXd zbar = VectorXd::Zero(nz);
  VectorXd xnew(nx), znew(nz), vbar(ny), ebar(ny), negg(std::max(nz, ny));
  VectorXd gin_xu(nx + nu), gin_zxu(nz + nx + nu), gin_zxuv(nz + nx + nu + ny);

  for (Index k = N - 1; k >= 0; --k) {
    xu.head(nx) = X.col(k);
    xu.tail(nu) = d.u.col(k);
    xnew.setZero();
    znew.setZero();

    gin_xu.setZero();
    ffn_backward(fx_v, xu, fx_c, k, xbar, g + L.fx, &gin_xu, ws);
    xnew += gin_xu.head(nx);

    ebar = s2n * E.col(k);
    if (nz > 0) {
      zxuv.head(nz) = Z.col(k);
      zxuv.segment(nz, nx) = X.col(k);
      zxuv.segment(nz + nx, nu) = d.u.col(k);
      zxuv.tail(ny) = V.col(k);
      gin_zxuv.setZero();
      ffn_backward(fz_v, zxuv, fz1_c, k, zbar, g + L.fz, &gin_zxuv, ws);
      znew += gin_zxuv.head(nz);
      xnew += gin_zxuv.segment(nz, nx);
      vbar = gin_zxuv.tail(ny);

      zxuv.head(nz).setZero();
      zxuv.tail(ny).setZero();
      negg.head(nz) = -zbar;
      gin_zxuv.setZero();
      ffn_backward(fz_v, zxuv, fz0_c, k, negg.head(nz), g + L.fz, &gin_zxuv,
                   ws);
      xnew += gin_zxuv.segment(nz, nx);

      zxu.head(nz) = Z.col(k);
      zxu.segment(nz, nx) = X.col(k);
      zxu.tail(nu) = d.u.col(k);
      gin_zxu.setZero();
      ffn_backward(gz_v, zxu, gz1_c, k, ebar, g + L.gz, &gin_zxu, ws);
      znew += gin_zxu.head(nz);
      xnew += gin_zxu.segment(nz, nx);

      zxu.head(nz).setZero();
      negg.head(ny) = -ebar;
      gin_zxu.setZero();
      ffn_backward(gz_v, zxu, gz0_c, k, negg.head(ny), g + L.gz, &gin_zxu, ws);
      xnew += gin_zxu.segment(nz, nx);

      vbar += ebar;
    } else {
      vbar = ebar;
    }

    negg.head(ny) = -vbar;
    gin_xu.setZero();
    ffn_backward(gx_v, xu, gx_c, k, negg.head(ny), g + L.gx, &gin_xu, ws);
    xnew += gin_xu.head(nx);

    xbar = xnew;
    zbar = znew;
  }

  MutVec(g + L.w0, nx) = xbar;
  MutVec(g + L.w0 + nx, nz) = zbar;
  if (!grad->allFinite()) return kInf;
  return loss;
}

double pem_core(const ModelStructure& ms, const Layout& L, const VectorXd& tw,
                const Dataset& d, VectorXd* grad, RolloutResult* out) {
  check_inputs(ms, L, tw, d);
  if (ms.family == Family::Nonlinear)
    return nl_pem_core(ms, L, tw, d, grad, out);
  return lin_pem_core(ms, L, tw, d, grad, out);
}

VectorXd join_tw(const Layout& L, const VectorXd& theta, const VectorXd& w0) {
  require(theta.size() == L.n_theta, "rollout: theta size mismatch");
  require(w0.size() == L.n_w, "rollout: w0 size mismatch");
  VectorXd tw(L.total());
  tw.head(L.n_theta) = theta;
  tw.tail(L.n_w) = w0;
  return tw;
}

}  // namespace

// ---- single-step maps ------------------------------------------------------

void plant_step(const ModelStructure& ms, const VectorXd& theta,
                const Eigen::Ref<const VectorXd>& x,
                const Eigen::Ref<const VectorXd>& u, const VectorXd* p,
                VectorXd& x_next, VectorXd& y0) {
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "plant_step: theta size mismatch");
  require(x.size() == ms.nx && u.size() == ms.nu,
          "plant_step: state or input size mismatch");
  const double* th = theta.data();
  if (ms.family == Family::Nonlinear) {
    VectorXd xu(ms.nx + ms.nu);
    xu.head(ms.nx) = x;
    xu.tail(ms.nu) = u;
    FfnScratch ws;
    ffn_forward({&ms.fx, th + L.fx}, xu, x_next, ws);
    ffn_forward({&ms.gx, th + L.gx}, xu, y0, ws);
    return;
  }
  MatrixXd mx;
  if (ms.family == Family::Lti) {
    fill_lti_mx(ms, L, th, mx);
  } else {
    VectorXd pk;
    if (ms.family == Family::LpvSelf) {
      pk = scheduling_map(ms, theta, x, u);
    } else {
      if (p == nullptr)
        throw MissingScheduling("plant_step: scheduling signal required");
      require(p->size() == ms.np, "plant_step: scheduling size mismatch");
      pk = *p;
    }
    mx.resize(ms.mx_rows(), ms.mx_cols());
    MutVec mxv(mx.data(), ms.mx_block());
    if (ms.matrix_dep == MatrixDep::Affine) {
      ConstMap mxc(th + L.mx, ms.mx_block(), ms.np + 1);
      mxv = mxc.col(0);
      mxv.noalias() += mxc.rightCols(ms.np) * pk;
    } else {
      VectorXd outv;
      FfnScratch ws;
      ffn_forward({&ms.fmx, th + L.mx}, pk, outv, ws);
      mxv = outv;
    }
  }
  VectorXd xu(ms.nx + ms.nu);
  xu.head(ms.nx) = x;
  xu.tail(ms.nu) = u;
  VectorXd xy = mx * xu;
  x_next = xy.head(ms.nx);
  y0 = xy.tail(ms.ny);
}

namespace {

// Assembles Mz for linear families at one operating point; pk may be empty
// for Lti or unscheduled noise models.
MatrixXd assemble_mz_at(const ModelStructure& ms, const Layout& L,
                        const double* th, const VectorXd& pk) {
  MatrixXd mz;
  if (ms.family == Family::Lti) {
    fill_lti_mz(ms, L, th, mz);
    return mz;
  }
  mz.setZero(ms.mz_dim(), ms.mz_dim());
  if (!ms.noise_scheduled) {
    scatter_mz(ms, th + L.mz, mz.data());
    return mz;
  }
  VectorXd freev(ms.mz_free());
  if (ms.matrix_dep == MatrixDep::Affine) {
    ConstMap mzc(th + L.mz, ms.mz_free(), ms.np + 1);
    freev = mzc.col(0);
    freev.noalias() += mzc.rightCols(ms.np) * pk;
  } else {
    FfnScratch ws;
    ffn_forward({&ms.fmz, th + L.mz}, pk, freev, ws);
  }
  scatter_mz(ms, freev.data(), mz.data());
  return mz;
}

VectorXd step_scheduling(const ModelStructure& ms, const VectorXd& theta,
                         const Eigen::Ref<const VectorXd>& x,
                         const Eigen::Ref<const VectorXd>& u,
                         const VectorXd* p) {
  if (ms.family == Family::LpvSelf) return scheduling_map(ms, theta, x, u);
  if (ms.family == Family::LpvExternal) {
    if (p == nullptr)
      throw MissingScheduling("noise step: scheduling signal required");
    require(p->size() == ms.np, "noise step: scheduling size mismatch");
    return *p;
  }
  return VectorXd();
}

}  // namespace

void noise_inverse_step(const ModelStructure& ms, const VectorXd& theta,
                        const Eigen::Ref<const VectorXd>& z,
                        const Eigen::Ref<const VectorXd>& x,
                        const Eigen::Ref<const VectorXd>& u,
                        const Eigen::Ref<const VectorXd>& v, const VectorXd* p,
                        VectorXd& z_next, VectorXd& e) {
  if (ms.nz == 0) {  // output-error structure: the noise model is identity
    z_next.resize(0);
    e = v;
    return;
  }
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "noise step: theta size mismatch");
  require(z.size() == ms.nz && x.size() == ms.nx && u.size() == ms.nu &&
              v.size() == ms.ny,
          "noise step: argument size mismatch");
  const double* th = theta.data();
  if (ms.family == Family::Nonlinear) {
    VectorXd zxu(ms.nz + ms.nx + ms.nu), zxuv(ms.nz + ms.nx + ms.nu + ms.ny);
    zxu << z, x, u;
    zxuv << z, x, u, v;
    FfnScratch ws;
    VectorXd g1, g0, o1, o0;
    ffn_forward({&ms.gz, th + L.gz}, zxu, g1, ws);
    ffn_forward({&ms.fz, th + L.fz}, zxuv, o1, ws);
    zxu.head(ms.nz).setZero();
    zxuv.head(ms.nz).setZero();
    zxuv.tail(ms.ny).setZero();
    ffn_forward({&ms.gz, th + L.gz}, zxu, g0, ws);
    ffn_forward({&ms.fz, th + L.fz}, zxuv, o0, ws);
    z_next = o1 - o0;
    e = v + g1 - g0;
    return;
  }
  const VectorXd pk = step_scheduling(ms, theta, x, u, p);
  const MatrixXd mz = assemble_mz_at(ms, L, th, pk);
  VectorXd zv(ms.nz + ms.ny);
  zv << z, v;
  VectorXd zg = mz * zv;
  z_next = zg.head(ms.nz);
  e = v + zg.tail(ms.ny);
}

void noise_forward_step(const ModelStructure& ms, const VectorXd& theta,
                        const Eigen::Ref<const VectorXd>& z,
                        const Eigen::Ref<const VectorXd>& x,
                        const Eigen::Ref<const VectorXd>& u,
                        const Eigen::Ref<const VectorXd>& e, const VectorXd* p,
                        VectorXd& z_next, VectorXd& v) {
  if (ms.nz == 0) {
    z_next.resize(0);
    v = e;
    return;
  }
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "noise step: theta size mismatch");
  require(z.size() == ms.nz && x.size() == ms.nx && u.size() == ms.nu &&
              e.size() == ms.ny,
          "noise step: argument size mismatch");
  const double* th = theta.data();
  if (ms.family == Family::Nonlinear) {
    VectorXd zxu(ms.nz + ms.nx + ms.nu);
    zxu << z, x, u;
    FfnScratch ws;
    VectorXd g1, g0, o1, o0;
    ffn_forward({&ms.gz, th + L.gz}, zxu, g1, ws);
    zxu.head(ms.nz).setZero();
    ffn_forward({&ms.gz, th + L.gz}, zxu, g0, ws);
    v = e - (g1 - g0);
    VectorXd zxuv(ms.nz + ms.nx + ms.nu + ms.ny);
    zxuv << z, x, u, v;
    ffn_forward({&ms.fz, th + L.fz}, zxuv, o1, ws);
    zxuv.head(ms.nz).setZero();
    zxuv.tail(ms.ny).setZero();
    ffn_forward({&ms.fz, th + L.fz}, zxuv, o0, ws);
    z_next = o1 - o0;
    return;
  }
  const VectorXd pk = step_scheduling(ms, theta, x, u, p);
  const MatrixXd mz = assemble_mz_at(ms, L, th, pk);
  v = e - mz.bottomLeftCorner(ms.ny, ms.nz) * z;
  z_next = mz.topLeftCorner(ms.nz, ms.nz) * z +
           mz.topRightCorner(ms.nz, ms.ny) * v;
}

VectorXd scheduling_map(const ModelStructure& ms, const VectorXd& theta,
                        const Eigen::Ref<const VectorXd>& x,
                        const Eigen::Ref<const VectorXd>& u) {
  require(ms.family == Family::LpvSelf,
          "scheduling_map: model is not self-scheduled");
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "scheduling_map: theta size mismatch");
  VectorXd xu(ms.nx + ms.nu);
  xu.head(ms.nx) = x;
  xu.tail(ms.nu) = u;
  VectorXd pk;
  FfnScratch ws;
  ffn_forward({&ms.psi, theta.data() + L.psi}, xu, pk, ws);
  return pk;
}

// ---- rollouts ---------------------------------------------------------------

RolloutResult predictor_rollout(const ModelStructure& ms,
                                const VectorXd& theta, const VectorXd& w0,
                                const Dataset& d) {
  const Layout L = layout(ms);
  const VectorXd tw = join_tw(L, theta, w0);
  RolloutResult out;
  const double loss = pem_core(ms, L, tw, d, nullptr, &out);
  if (!std::isfinite(loss))
    throw NonFiniteValue("predictor rollout left the finite domain");
  return out;
}

RolloutResult simulation_rollout(const ModelStructure& ms,
                                 const VectorXd& theta, const VectorXd& x0,
                                 const Dataset& d) {
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "simulation: theta size mismatch");
  require(x0.size() == ms.nx, "simulation: x0 size mismatch");
  require(d.nu() == ms.nu, "simulation: dataset input channel mismatch");
  require(d.n() >= 1, "simulation: empty dataset");
  if (ms.family == Family::LpvExternal && d.np() != ms.np)
    throw MissingScheduling("simulation: scheduling channel required");
  const Index N = d.n();
  RolloutResult out;
  out.x.resize(ms.nx, N + 1);
  out.y_sim.resize(ms.ny, N);
  out.x.col(0) = x0;
  VectorXd xk = x0, xn(ms.nx), yk(ms.ny);
  VectorXd pk;
  for (Index k = 0; k < N; ++k) {
    const VectorXd* pp = nullptr;
    if (ms.family == Family::LpvExternal) {
      pk = d.p.col(k);
      pp = &pk;
    }
    plant_step(ms, theta, xk, d.u.col(k), pp, xn, yk);
    out.x.col(k + 1) = xn;
    out.y_sim.col(k) = yk;
    xk = xn;
  }
  if (!out.x.allFinite() || !out.y_sim.allFinite())
    throw NonFiniteValue("simulation left the finite domain");
  return out;
}

double pem_value(const ModelStructure& ms, const VectorXd& tw,
                 const Dataset& d) {
  const Layout L = layout(ms);
  return pem_core(ms, L, tw, d, nullptr, nullptr);
}

double pem_value_grad(const ModelStructure& ms, const VectorXd& tw,
                      const Dataset& d, VectorXd& grad) {
  const Layout L = layout(ms);
  const double f = pem_core(ms, L, tw, d, &grad, nullptr);
  if (!std::isfinite(f)) grad.setZero(L.total());
  return f;
}

}  // namespace pemss
