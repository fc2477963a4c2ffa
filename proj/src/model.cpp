// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
#include "pemss/model.hpp"

#include <algorithm>
#include <set>

namespace pemss {

std::string family_name(Family f) {
  switch (f) {
    case Family::Lti:
      return "lti";
    case Family::LpvExternal:
      return "lpv_external";
    case Family::LpvSelf:
      return "lpv_self";
    case Family::Nonlinear:
      return "nl";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "lti") return Family::Lti;
  if (s == "lpv_external") return Family::LpvExternal;
  if (s == "lpv_self") return Family::LpvSelf;
  if (s == "nl") return Family::Nonlinear;
  throw SchemaError("unknown model family: " + s);
}

std::string matrix_dep_name(MatrixDep d) {
  return d == MatrixDep::Affine ? "affine" : "ffn";
}

MatrixDep matrix_dep_from_name(const std::string& s) {
  if (s == "affine") return MatrixDep::Affine;
  if (s == "ffn") return MatrixDep::Ffn;
  throw SchemaError("unknown matrix dependence: " + s);
}

namespace {

void require_net(const FfnShape& s, int n_in, int n_out, const char* what) {
  s.validate();
  require(s.n_in() == n_in && s.n_out() == n_out,
          std::string(what) + ": net widths do not match the structure");
}

}  // namespace

void ModelStructure::validate() const {
  require(nx >= 1 && nz >= 0 && nu >= 1 && ny >= 1,
          "model: nx >= 1, nz >= 0, nu >= 1, ny >= 1 required");
  switch (family) {
    case Family::Lti:
      require(np == 0, "model: lti has no scheduling dimension");
      break;
    case Family::LpvExternal:
    case Family::LpvSelf:
      require(np >= 1, "model: lpv needs np >= 1");
      if (family == Family::LpvSelf) {
        require(matrix_dep == MatrixDep::Affine,
                "model: self-scheduled matrices must be affine in p");
        require_net(psi, nx + nu, np, "psi");
      }
      if (matrix_dep == MatrixDep::Ffn) {
        require_net(fmx, np, static_cast<int>(mx_block()), "fmx");
        if (nz > 0) require_net(fmz, np, static_cast<int>(mz_free()), "fmz");
      }
      break;
    case Family::Nonlinear:
      require(np == 0, "model: nl has no scheduling dimension");
      require_net(fx, nx + nu, nx, "fx");
      require_net(gx, nx + nu, ny, "gx");
      if (nz > 0) {
        require_net(fz, nz + nx + nu + ny, nz, "fz");
        require_net(gz, nz + nx + nu, ny, "gz");
      }
      break;
  }
  if (noise_scheduled)
    require(family == Family::LpvExternal || family == Family::LpvSelf,
            "model: noise_scheduled needs an lpv family");
}

Layout layout(const ModelStructure& ms) {
  ms.validate();
  Layout L;
  Index at = 0;
  auto group = [&](const std::string& name, Index n) {
    L.groups.push_back({name, at, at + n});
    Index lo = at;
    at += n;
    return lo;
  };
  switch (ms.family) {
    case Family::Lti: {
      L.ax = at;
      L.bx = L.ax + Index(ms.nx) * ms.nx;
      group("theta_x", Index(ms.nx) * ms.nx + Index(ms.nx) * ms.nu);
      L.cx = at;
      L.dx = L.cx + Index(ms.ny) * ms.nx;
      group("theta_y", Index(ms.ny) * ms.nx + Index(ms.ny) * ms.nu);
      if (ms.nz > 0) {
        L.az = at;
        L.bz = L.az + Index(ms.nz) * ms.nz;
        group("theta_z", Index(ms.nz) * ms.nz + Index(ms.nz) * ms.ny);
        L.cz = at;
        group("theta_e", Index(ms.ny) * ms.nz);
      }
      break;
    }
    case Family::LpvExternal:
    case Family::LpvSelf: {
      if (ms.matrix_dep == MatrixDep::Affine) {
        L.mx = group("theta_Mx", ms.mx_block() * ms.n_mx_coeff());
        if (ms.nz > 0) L.mz = group("theta_Mz", ms.mz_free() * ms.n_mz_coeff());
      } else {
        L.mx = group("theta_Mx", ms.fmx.n_params());
        if (ms.nz > 0) L.mz = group("theta_Mz", ms.fmz.n_params());
      }
      if (ms.family == Family::LpvSelf)
        L.psi = group("theta_psi", ms.psi.n_params());
      break;
    }
    case Family::Nonlinear: {
      L.fx = group("theta_x", ms.fx.n_params());
      L.gx = group("theta_y", ms.gx.n_params());
      if (ms.nz > 0) {
        L.fz = group("theta_z", ms.fz.n_params());
        L.gz = group("theta_e", ms.gz.n_params());
      }
      break;
    }
  }
  L.n_theta = at;
  L.w0 = at;
  L.n_w = ms.nx + ms.nz;
  group("w0", L.n_w);
  return L;
}

ParamVector make_param_vector(const ModelStructure& ms, const VectorXd& theta,
                              const VectorXd& w0) {
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta && w0.size() == L.n_w,
          "param vector: theta/w0 sizes do not match the structure");
  ParamVector p;
  p.values.resize(L.total());
  p.values << theta, w0;
  p.groups = L.groups;
  p.validate();
  return p;
}

VectorXd pack_lti(const ModelStructure& ms, const LtiParams& p) {
  require(ms.family == Family::Lti, "pack_lti: family must be lti");
  const Layout L = layout(ms);
  VectorXd theta(L.n_theta);
  auto put = [&](Index off, const MatrixXd& m, Index rows, Index cols) {
    require(m.rows() == rows && m.cols() == cols, "pack_lti: block shape");
    Eigen::Map<MatrixXd>(theta.data() + off, rows, cols) = m;
  };
  put(L.ax, p.ax, ms.nx, ms.nx);
  put(L.bx, p.bx, ms.nx, ms.nu);
  put(L.cx, p.cx, ms.ny, ms.nx);
  put(L.dx, p.dx, ms.ny, ms.nu);
  if (ms.nz > 0) {
    put(L.az, p.az, ms.nz, ms.nz);
    put(L.bz, p.bz, ms.nz, ms.ny);
    put(L.cz, p.cz, ms.ny, ms.nz);
  }
  return theta;
}

LtiParams unpack_lti(const ModelStructure& ms, const VectorXd& theta) {
  require(ms.family == Family::Lti, "unpack_lti: family must be lti");
  const Layout L = layout(ms);
  require(theta.size() == L.n_theta, "unpack_lti: theta size");
  LtiParams p;
  auto get = [&](Index off, Index rows, Index cols) {
    return MatrixXd(
        Eigen::Map<const MatrixXd>(theta.data() + off, rows, cols));
  };
  p.ax = get(L.ax, ms.nx, ms.nx);
  p.bx = get(L.bx, ms.nx, ms.nu);
  p.cx = get(L.cx, ms.ny, ms.nx);
  p.dx = get(L.dx, ms.ny, ms.nu);
  if (ms.nz > 0) {
    p.az = get(L.az, ms.nz, ms.nz);
    p.bz = get(L.bz, ms.nz, ms.ny);
    p.cz = get(L.cz, ms.ny, ms.nz);
  } else {
    p.az.resize(0, 0);
    p.bz.resize(0, 0);
    p.cz.resize(0, 0);
  }
  return p;
}

MatrixXd lpv_mx_coeff(const ModelStructure& ms, const VectorXd& theta, int i) {
  require(ms.matrix_dep == MatrixDep::Affine, "lpv coeff: affine only");
  require(i >= 0 && i < ms.n_mx_coeff(), "lpv coeff: index");
  const Layout L = layout(ms);
  return MatrixXd(Eigen::Map<const MatrixXd>(
      theta.data() + L.mx + Index(i) * ms.mx_block(), ms.mx_rows(),
      ms.mx_cols()));
}

void set_lpv_mx_coeff(const ModelStructure& ms, VectorXd& theta, int i,
                      const MatrixXd& m) {
  require(ms.matrix_dep == MatrixDep::Affine, "lpv coeff: affine only");
  require(i >= 0 && i < ms.n_mx_coeff(), "lpv coeff: index");
  require(m.rows() == ms.mx_rows() && m.cols() == ms.mx_cols(),
          "lpv coeff: block shape");
  const Layout L = layout(ms);
  Eigen::Map<MatrixXd>(theta.data() + L.mx + Index(i) * ms.mx_block(),
                       ms.mx_rows(), ms.mx_cols()) = m;
}

LtiParams lpv_mz_coeff(const ModelStructure& ms, const VectorXd& theta,
                       int i) {
  require(ms.matrix_dep == MatrixDep::Affine && ms.nz > 0,
          "lpv mz coeff: affine with nz > 0 only");
  require(i >= 0 && i < ms.n_mz_coeff(), "lpv mz coeff: index");
  const Layout L = layout(ms);
  const double* base = theta.data() + L.mz + Index(i) * ms.mz_free();
  LtiParams p;
  p.az = Eigen::Map<const MatrixXd>(base, ms.nz, ms.nz);
  p.bz = Eigen::Map<const MatrixXd>(base + Index(ms.nz) * ms.nz, ms.nz, ms.ny);
  p.cz = Eigen::Map<const MatrixXd>(
      base + Index(ms.nz) * ms.nz + Index(ms.nz) * ms.ny, ms.ny, ms.nz);
  return p;
}

void set_lpv_mz_coeff(const ModelStructure& ms, VectorXd& theta, int i,
                      const MatrixXd& az, const MatrixXd& bz,
                      const MatrixXd& cz) {
  require(ms.matrix_dep == MatrixDep::Affine && ms.nz > 0,
          "lpv mz coeff: affine with nz > 0 only");
  require(i >= 0 && i < ms.n_mz_coeff(), "lpv mz coeff: index");
  require(az.rows() == ms.nz && az.cols() == ms.nz && bz.rows() == ms.nz &&
              bz.cols() == ms.ny && cz.rows() == ms.ny && cz.cols() == ms.nz,
          "lpv mz coeff: block shape");
  const Layout L = layout(ms);
  double* base = theta.data() + L.mz + Index(i) * ms.mz_free();
  Eigen::Map<MatrixXd>(base, ms.nz, ms.nz) = az;
  Eigen::Map<MatrixXd>(base + Index(ms.nz) * ms.nz, ms.nz, ms.ny) = bz;
  Eigen::Map<MatrixXd>(base + Index(ms.nz) * ms.nz + Index(ms.nz) * ms.ny,
                       ms.ny, ms.nz) = cz;
}

SeparatedSystem separate_system(StateMap f_w, OutputMap g_w,
                                const VectorXd& w0, Index ne) {
  SeparatedSystem s;
  const Index nw = w0.size();
  s.x0 = w0;
  s.z0 = VectorXd::Zero(nw);
  s.f_x = [f_w, ne](const VectorXd& x, const VectorXd& u) {
    return f_w(x, u, VectorXd::Zero(ne));
  };
  s.g_x = g_w;
  s.f_z = [f_w](const VectorXd& z, const VectorXd& x, const VectorXd& u,
                const VectorXd& e) -> VectorXd {
    return f_w(z + x, u, e) - f_w(x, u, VectorXd::Zero(e.size()));
  };
  s.g_z = [g_w](const VectorXd& z, const VectorXd& x,
                const VectorXd& u) -> VectorXd {
    return g_w(z + x, u) - g_w(x, u);
  };
  return s;
}

SeparatedNoiseMaps enforce_separation(
    std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&,
                           const VectorXd&)>
        f_raw,
    std::function<VectorXd(const VectorXd&, const VectorXd&, const VectorXd&)>
        g_raw) {
  SeparatedNoiseMaps m;
  m.f_z = [f_raw](const VectorXd& z, const VectorXd& x, const VectorXd& u,
                  const VectorXd& v) -> VectorXd {
    return f_raw(z, x, u, v) -
           f_raw(VectorXd::Zero(z.size()), x, u, VectorXd::Zero(v.size()));
  };
  m.g_z = [g_raw](const VectorXd& z, const VectorXd& x,
                  const VectorXd& u) -> VectorXd {
    return g_raw(z, x, u) - g_raw(VectorXd::Zero(z.size()), x, u);
  };
  return m;
}

namespace {

void add_idx(std::set<Index>& s, Index i) { s.insert(i); }

// Column-major entry index of (r, c) in a block stored at `off` with `rows`
// rows.
Index ent(Index off, Index rows, Index r, Index c) {
  return off + c * rows + r;
}

}  // namespace

std::vector<LassoGroup> lasso_groups(const ModelStructure& ms,
                                     const LassoTargets& t) {
  const Layout L = layout(ms);
  std::vector<LassoGroup> out;
  const Index nx = ms.nx, nz = ms.nz, nu = ms.nu, ny = ms.ny;

  auto push = [&](const std::string& name, const std::set<Index>& idx) {
    LassoGroup g;
    g.name = name;
    g.idx.assign(idx.begin(), idx.end());
    out.push_back(std::move(g));
  };

  if (t.x_states) {
    for (Index i = 0; i < nx; ++i) {
      std::set<Index> s;
      switch (ms.family) {
        case Family::Lti:
          for (Index c = 0; c < nx; ++c) add_idx(s, ent(L.ax, nx, i, c));
          for (Index r = 0; r < nx; ++r) add_idx(s, ent(L.ax, nx, r, i));
          for (Index c = 0; c < nu; ++c) add_idx(s, ent(L.bx, nx, i, c));
          for (Index r = 0; r < ny; ++r) add_idx(s, ent(L.cx, ny, r, i));
          break;
        case Family::LpvExternal:
        case Family::LpvSelf: {
          require(ms.matrix_dep == MatrixDep::Affine,
                  "lasso groups: state groups need affine lpv matrices");
          const Index rows = ms.mx_rows();
          for (int j = 0; j < ms.n_mx_coeff(); ++j) {
            const Index off = L.mx + Index(j) * ms.mx_block();
            for (Index c = 0; c < nx + nu; ++c)
              add_idx(s, ent(off, rows, i, c));  // row i of [Ax Bx]
            for (Index r = 0; r < rows; ++r)
              add_idx(s, ent(off, rows, r, i));  // col i of [Ax; Cx]
          }
          if (ms.family == Family::LpvSelf) {
            const Index w1 = ms.psi.widths[1];
            for (Index r = 0; r < w1; ++r)
              add_idx(s, L.psi + ffn_param_offset_weight(ms.psi, 1) + i * w1 +
                             r);  // col i of the psi input layer
          }
          break;
        }
        case Family::Nonlinear: {
          auto net_cols = [&](const FfnShape& sh, Index off, Index slot) {
            const Index w1 = sh.widths[1];
            for (Index r = 0; r < w1; ++r)
              add_idx(s, off + ffn_param_offset_weight(sh, 1) + slot * w1 + r);
            if (sh.bypass)
              for (Index r = 0; r < sh.n_out(); ++r)
                add_idx(s, off + ffn_param_offset_bypass(sh) +
                               slot * sh.n_out() + r);
          };
          auto net_out_row = [&](const FfnShape& sh, Index off, Index row) {
            const int Ln = sh.n_layers();
            const Index wr = sh.widths[Ln];
            const Index wc = sh.widths[Ln - 1];
            for (Index c = 0; c < wc; ++c)
              add_idx(s, off + ffn_param_offset_weight(sh, Ln) + c * wr + row);
            add_idx(s, off + ffn_param_offset_bias(sh, Ln) + row);
            if (sh.bypass)
              for (Index c = 0; c < sh.n_in(); ++c)
                add_idx(s, off + ffn_param_offset_bypass(sh) + c * sh.n_out() +
                               row);
          };
          net_cols(ms.fx, L.fx, i);
          net_out_row(ms.fx, L.fx, i);
          net_cols(ms.gx, L.gx, i);
          if (nz > 0) {
            net_cols(ms.fz, L.fz, nz + i);
            net_cols(ms.gz, L.gz, nz + i);
          }
          break;
        }
      }
      add_idx(s, L.w0 + i);
      push("x" + std::to_string(i), s);
    }
  }

  if (t.z_states && nz > 0) {
    for (Index i = 0; i < nz; ++i) {
      std::set<Index> s;
      switch (ms.family) {
        case Family::Lti:
          for (Index c = 0; c < nz; ++c) add_idx(s, ent(L.az, nz, i, c));
          for (Index r = 0; r < nz; ++r) add_idx(s, ent(L.az, nz, r, i));
          for (Index c = 0; c < ny; ++c) add_idx(s, ent(L.bz, nz, i, c));
          for (Index r = 0; r < ny; ++r) add_idx(s, ent(L.cz, ny, r, i));
          break;
        case Family::LpvExternal:
        case Family::LpvSelf: {
          require(ms.matrix_dep == MatrixDep::Affine,
                  "lasso groups: state groups need affine lpv matrices");
          for (int j = 0; j < ms.n_mz_coeff(); ++j) {
            const Index off = L.mz + Index(j) * ms.mz_free();
            const Index az = off, bz = off + nz * nz, cz = bz + nz * ny;
            for (Index c = 0; c < nz; ++c) add_idx(s, ent(az, nz, i, c));
            for (Index r = 0; r < nz; ++r) add_idx(s, ent(az, nz, r, i));
            for (Index c = 0; c < ny; ++c) add_idx(s, ent(bz, nz, i, c));
            for (Index r = 0; r < ny; ++r) add_idx(s, ent(cz, ny, r, i));
          }
          break;
        }
        case Family::Nonlinear: {
          auto net_cols = [&](const FfnShape& sh, Index off, Index slot) {
            const Index w1 = sh.widths[1];
            for (Index r = 0; r < w1; ++r)
              add_idx(s, off + ffn_param_offset_weight(sh, 1) + slot * w1 + r);
            if (sh.bypass)
              for (Index r = 0; r < sh.n_out(); ++r)
                add_idx(s, off + ffn_param_offset_bypass(sh) +
                               slot * sh.n_out() + r);
          };
          auto net_out_row = [&](const FfnShape& sh, Index off, Index row) {
            const int Ln = sh.n_layers();
            const Index wr = sh.widths[Ln];
            const Index wc = sh.widths[Ln - 1];
            for (Index c = 0; c < wc; ++c)
              add_idx(s, off + ffn_param_offset_weight(sh, Ln) + c * wr + row);
            add_idx(s, off + ffn_param_offset_bias(sh, Ln) + row);
            if (sh.bypass)
              for (Index c = 0; c < sh.n_in(); ++c)
                add_idx(s, off + ffn_param_offset_bypass(sh) + c * sh.n_out() +
                               row);
          };
          net_cols(ms.fz, L.fz, i);
          net_out_row(ms.fz, L.fz, i);
          net_cols(ms.gz, L.gz, i);
          break;
        }
      }
      add_idx(s, L.w0 + nx + i);
      push("z" + std::to_string(i), s);
    }
  }

  if (t.p_entries && ms.np > 0) {
    require(ms.matrix_dep == MatrixDep::Affine,
            "lasso groups: scheduling groups need affine lpv matrices");
    for (Index i = 0; i < ms.np; ++i) {
      std::set<Index> s;
      const Index off = L.mx + (i + 1) * ms.mx_block();
      for (Index j = 0; j < ms.mx_block(); ++j) add_idx(s, off + j);
      if (ms.nz > 0 && ms.noise_scheduled) {
        const Index zoff = L.mz + (i + 1) * ms.mz_free();
        for (Index j = 0; j < ms.mz_free(); ++j) add_idx(s, zoff + j);
      }
      if (ms.family == Family::LpvSelf) {
        const int Ln = ms.psi.n_layers();
        const Index wr = ms.psi.widths[Ln];
        const Index wc = ms.psi.widths[Ln - 1];
        for (Index c = 0; c < wc; ++c)
          add_idx(s, L.psi + ffn_param_offset_weight(ms.psi, Ln) + c * wr + i);
        add_idx(s, L.psi + ffn_param_offset_bias(ms.psi, Ln) + i);
      }
      push("p" + std::to_string(i), s);
    }
  }

  return out;
}

namespace {

std::vector<Index> keep_list(Index n, const std::vector<int>& drop) {
  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i)
    if (std::find(drop.begin(), drop.end(), static_cast<int>(i)) == drop.end())
      keep.push_back(i);
  return keep;
}

MatrixXd select(const MatrixXd& m, const std::vector<Index>& rows,
                const std::vector<Index>& cols) {
  MatrixXd out(rows.size(), cols.size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < cols.size(); ++c) out(r, c) = m(rows[r], cols[c]);
  return out;
}

std::vector<Index> iota(Index n) {
  std::vector<Index> v(n);
  for (Index i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

ReducedModel remove_states(const ModelStructure& ms, const VectorXd& theta,
                           const VectorXd& w0, const std::vector<int>& drop_x,
                           const std::vector<int>& drop_z) {
  require(ms.family == Family::Lti ||
              ((ms.family == Family::LpvExternal ||
                ms.family == Family::LpvSelf) &&
               ms.matrix_dep == MatrixDep::Affine),
          "remove_states: supported for lti and affine lpv structures");
  const auto keep_x = keep_list(ms.nx, drop_x);
  const auto keep_z = keep_list(ms.nz, drop_z);
  require(!keep_x.empty(), "remove_states: at least one x state must remain");

  ReducedModel r;
  r.ms = ms;
  r.ms.nx = static_cast<int>(keep_x.size());
  r.ms.nz = static_cast<int>(keep_z.size());

  const auto all_u = iota(ms.nu);
  const auto all_y = iota(ms.ny);

  if (ms.family == Family::Lti) {
    LtiParams p = unpack_lti(ms, theta);
    LtiParams q;
    q.ax = select(p.ax, keep_x, keep_x);
    q.bx = select(p.bx, keep_x, all_u);
    q.cx = select(p.cx, all_y, keep_x);
    q.dx = p.dx;
    if (r.ms.nz > 0) {
      q.az = select(p.az, keep_z, keep_z);
      q.bz = select(p.bz, keep_z, all_y);
      q.cz = select(p.cz, all_y, keep_z);
    }
    r.theta = pack_lti(r.ms, q);
  } else {
    // affine LPV: reduce every coefficient block; for the self-scheduled
    // family also drop the psi input columns of removed x states.
    const Layout Lr = layout(r.ms);
    r.theta = VectorXd::Zero(Lr.n_theta);
    std::vector<Index> keep_xu = keep_x;
    for (Index c = 0; c < ms.nu; ++c) keep_xu.push_back(ms.nx + c);
    std::vector<Index> keep_xy = keep_x;
    for (Index rI = 0; rI < ms.ny; ++rI) keep_xy.push_back(ms.nx + rI);
    for (int i = 0; i < ms.n_mx_coeff(); ++i) {
      MatrixXd m = lpv_mx_coeff(ms, theta, i);
      set_lpv_mx_coeff(r.ms, r.theta, i, select(m, keep_xy, keep_xu));
    }
    if (r.ms.nz > 0)
      for (int i = 0; i < ms.n_mz_coeff(); ++i) {
        LtiParams mz = lpv_mz_coeff(ms, theta, i);
        set_lpv_mz_coeff(r.ms, r.theta, i, select(mz.az, keep_z, keep_z),
                         select(mz.bz, keep_z, all_y),
                         select(mz.cz, all_y, keep_z));
      }
    if (ms.family == Family::LpvSelf) {
      r.ms.psi.widths[0] = r.ms.nx + ms.nu;
      const Layout Lo = layout(ms);
      const Layout Ln = layout(r.ms);
      // copy psi params, dropping input-layer weight columns of removed x
      const Index w1 = ms.psi.widths[1];
      Eigen::Map<const MatrixXd> W1o(
          theta.data() + Lo.psi + ffn_param_offset_weight(ms.psi, 1), w1,
          ms.psi.n_in());
      Eigen::Map<MatrixXd> W1n(
          r.theta.data() + Ln.psi + ffn_param_offset_weight(r.ms.psi, 1), w1,
          r.ms.psi.n_in());
      W1n = select(W1o, iota(w1), keep_xu);
      const Index rest_o = ffn_param_offset_bias(ms.psi, 1);
      const Index rest_n = ffn_param_offset_bias(r.ms.psi, 1);
      const Index rest_len = ms.psi.n_params() - rest_o;
      r.theta.segment(Ln.psi + rest_n, rest_len) =
          theta.segment(Lo.psi + rest_o, rest_len);
    }
  }

  r.w0.resize(r.ms.nx + r.ms.nz);
  for (size_t i = 0; i < keep_x.size(); ++i) r.w0[i] = w0[keep_x[i]];
  for (size_t i = 0; i < keep_z.size(); ++i)
    r.w0[keep_x.size() + i] = w0[ms.nx + keep_z[i]];
  r.ms.validate();
  return r;
}

}  // namespace pemss
