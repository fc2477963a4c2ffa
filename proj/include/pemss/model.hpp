// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pemss/dataset.hpp"
#include "pemss/nets.hpp"
#include "pemss/param_vector.hpp"

namespace pemss {

enum class Family { Lti, LpvExternal, LpvSelf, Nonlinear };

enum class MatrixDep { Affine, Ffn };

std::string family_name(Family f);
Family family_from_name(const std::string& s);
std::string matrix_dep_name(MatrixDep d);
MatrixDep matrix_dep_from_name(const std::string& s);

// Shape of one identifiable model: a process part driven by (x, u) and an
// inverse-noise part driven by (z, x, u, v). nz == 0 drops the noise model
// (output-error structure). LPV families parameterize the stacked matrices
//   Mx(p) = [Ax Bx; Cx Dx]            ((nx+ny) x (nx+nu))
//   Mz(p) = [Az Bz; Cz 0]             ((nz+ny) x (nz+ny), zero block fixed)
// as affine combinations or as feedforward nets of p; the self-scheduled
// family computes p from (x, u) with the psi net.
struct ModelStructure {
  Family family = Family::Lti;
  int nx = 1;
  int nz = 0;
  int nu = 1;
  int ny = 1;
  int np = 0;
  MatrixDep matrix_dep = MatrixDep::Affine;
  bool noise_scheduled = false;  // LPV: Mz varies with p
  FfnShape psi;                  // LpvSelf: (nx+nu) -> np
  FfnShape fmx, fmz;             // LPV with MatrixDep::Ffn: np -> block sizes
  FfnShape fx, gx, fz, gz;       // Nonlinear

  void validate() const;

  int mx_rows() const { return nx + ny; }
  int mx_cols() const { return nx + nu; }
  Index mx_block() const { return Index(mx_rows()) * mx_cols(); }
  int mz_dim() const { return nz + ny; }
  // free entries of Mz: Az, Bz, Cz
  Index mz_free() const { return Index(nz) * nz + 2 * Index(nz) * ny; }
  int n_mx_coeff() const { return np + 1; }
  int n_mz_coeff() const { return noise_scheduled ? np + 1 : 1; }
};

// Offsets of the parameter blocks inside the flat vector [theta; w0].
struct Layout {
  Index n_theta = 0;
  Index n_w = 0;  // nx + nz
  std::vector<ParamGroup> groups;
  Index ax = 0, bx = 0, cx = 0, dx = 0, az = 0, bz = 0, cz = 0;  // Lti
  Index mx = 0, mz = 0, psi = 0;                                 // Lpv*
  Index fx = 0, gx = 0, fz = 0, gz = 0;                          // Nonlinear
  Index w0 = 0;
  Index total() const { return n_theta + n_w; }
};

Layout layout(const ModelStructure& ms);

// Flat vector [theta; w0] wrapped with the layout's group map.
ParamVector make_param_vector(const ModelStructure& ms, const VectorXd& theta,
                              const VectorXd& w0);

// Structured view of an Lti parameterization.
struct LtiParams {
  MatrixXd ax, bx, cx, dx;  // nx x nx, nx x nu, ny x nx, ny x nu
  MatrixXd az, bz, cz;      // nz x nz, nz x ny, ny x nz
};

VectorXd pack_lti(const ModelStructure& ms, const LtiParams& p);
LtiParams unpack_lti(const ModelStructure& ms, const VectorXd& theta);

// Affine LPV coefficient access: i = 0 is the constant term.
MatrixXd lpv_mx_coeff(const ModelStructure& ms, const VectorXd& theta, int i);
void set_lpv_mx_coeff(const ModelStructure& ms, VectorXd& theta, int i,
                      const MatrixXd& m);
// Mz free entries of coefficient i as the blocks (az, bz, cz).
LtiParams lpv_mz_coeff(const ModelStructure& ms, const VectorXd& theta, int i);
void set_lpv_mz_coeff(const ModelStructure& ms, VectorXd& theta, int i,
                      const MatrixXd& az, const MatrixXd& bz,
                      const MatrixXd& cz);

// ---- single-step maps ----------------------------------------------------

// x_next = f_x(x, u), y0 = g_x(x, u). `p` is required for LpvExternal and
// ignored elsewhere (LpvSelf computes it internally).
void plant_step(const ModelStructure& ms, const VectorXd& theta,
                const Eigen::Ref<const VectorXd>& x,
                const Eigen::Ref<const VectorXd>& u, const VectorXd* p,
                VectorXd& x_next, VectorXd& y0);

// Inverse noise model: z_next = f_z(z, x, u, v), e = g_z(z, x, u) + v.
void noise_inverse_step(const ModelStructure& ms, const VectorXd& theta,
                        const Eigen::Ref<const VectorXd>& z,
                        const Eigen::Ref<const VectorXd>& x,
                        const Eigen::Ref<const VectorXd>& u,
                        const Eigen::Ref<const VectorXd>& v, const VectorXd* p,
                        VectorXd& z_next, VectorXd& e);

// Forward noise model: v = e - g_z(z, x, u), z_next = f_z(z, x, u, v).
void noise_forward_step(const ModelStructure& ms, const VectorXd& theta,
                        const Eigen::Ref<const VectorXd>& z,
                        const Eigen::Ref<const VectorXd>& x,
                        const Eigen::Ref<const VectorXd>& u,
                        const Eigen::Ref<const VectorXd>& e, const VectorXd* p,
                        VectorXd& z_next, VectorXd& v);

// LpvSelf scheduling map p = psi(x, u).
VectorXd scheduling_map(const ModelStructure& ms, const VectorXd& theta,
                        const Eigen::Ref<const VectorXd>& x,
                        const Eigen::Ref<const VectorXd>& u);

// ---- rollouts --------------------------------------------------------------

struct RolloutResult {
  MatrixXd y_pred;  // ny x N
  MatrixXd e_pred;  // ny x N
  MatrixXd v;       // ny x N, y - g_x(x, u) along the predictor path
  MatrixXd y_sim;   // ny x N
  MatrixXd x;       // nx x (N+1)
  MatrixXd z;       // nz x (N+1)
};

// One-step-ahead predictor over the whole record:
//   x(k+1) = f_x(x(k), u(k))
//   z(k+1) = f_z(z(k), x(k), u(k), y(k) - g_x(x(k), u(k)))
//   y_pred(k) = g_x(x(k), u(k)) - g_z(z(k), x(k), u(k))
//   e_pred(k) = y(k) - y_pred(k)
// Throws NonFiniteValue if the recursion leaves the finite domain.
RolloutResult predictor_rollout(const ModelStructure& ms,
                                const VectorXd& theta, const VectorXd& w0,
                                const Dataset& d);

// Noise-model-free simulation of the process part (x path and y_sim).
RolloutResult simulation_rollout(const ModelStructure& ms,
                                 const VectorXd& theta, const VectorXd& x0,
                                 const Dataset& d);

// Mean squared prediction-residual norm (1/N) sum_k |e_pred(k)|^2 as a
// differentiable function of tw = [theta; w0]. Returns +inf instead of
// throwing when the rollout leaves the finite domain, so optimizers can
// reject the trial point.
double pem_value(const ModelStructure& ms, const VectorXd& tw,
                 const Dataset& d);
double pem_value_grad(const ModelStructure& ms, const VectorXd& tw,
                      const Dataset& d, VectorXd& grad);

// ---- separation utilities --------------------------------------------------

using StateMap =
    std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>;
using OutputMap = std::function<VectorXd(const VectorXd&, const VectorXd&)>;

// Split an innovation system w(k+1) = f_w(w, u, e), y = g_w(w, u) + e into a
// deterministic process part and a noise part keeping x + z == w:
//   f_x(x, u)       = f_w(x, u, 0)
//   g_x(x, u)       = g_w(x, u)
//   f_z(z, x, u, e) = f_w(z + x, u, e) - f_w(x, u, 0)
//   g_z(z, x, u)    = g_w(z + x, u) - g_w(x, u)
// with x0 = w0 and z0 = 0.
struct SeparatedSystem {
  std::function<VectorXd(const VectorXd&, const VectorXd&)> f_x;
  OutputMap g_x;
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&,
                         const VectorXd&)>
      f_z;
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>
      g_z;
  VectorXd x0, z0;
};

SeparatedSystem separate_system(StateMap f_w, OutputMap g_w,
                                const VectorXd& w0, Index ne);

// Wrap raw maps so that g_z(0, x, u) == 0 and f_z(0, x, u, 0) == 0 hold for
// any parameters, by subtracting the maps evaluated at z = 0, v = 0.
struct SeparatedNoiseMaps {
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&,
                         const VectorXd&)>
      f_z;
  std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>
      g_z;
};

SeparatedNoiseMaps enforce_separation(
    std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&,
                           const VectorXd&)>
        f_raw,
    std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>
        g_raw);

// Parameter index lists used by group-lasso structure selection: one group
// per x state, per z state and (for LPV families) per scheduling entry.
struct LassoGroup {
  std::string name;
  std::vector<Index> idx;  // indices into [theta; w0]
};

struct LassoTargets {
  bool x_states = true;
  bool z_states = true;
  bool p_entries = false;
};

std::vector<LassoGroup> lasso_groups(const ModelStructure& ms,
                                     const LassoTargets& t);

// Remove the given x and z state dimensions from the structure and map the
// surviving parameters across. Only Lti and affine-LPV structures support
// state removal.
struct ReducedModel {
  ModelStructure ms;
  VectorXd theta;
  VectorXd w0;
};

ReducedModel remove_states(const ModelStructure& ms, const VectorXd& theta,
                           const VectorXd& w0,
                           const std::vector<int>& drop_x,
                           const std::vector<int>& drop_z);

}  // namespace pemss
