#include "rfdose/fdtd.hpp"

#include <algorithm>
#include <cmath>

#include "rfdose/errors.hpp"

namespace rfdose {

double dipole_length_mm(Band band) {
    switch (band) {
        case Band::f900MHz: return 157.0;
        case Band::f1800MHz: return 79.0;
        case Band::f3000MHz: return 47.0;
    }
    throw DomainError("unknown band");
}

namespace {

struct AxisProfile {
    double frac(double pos, double n, int depth) const {
        const double d = static_cast<double>(depth);
        if (pos < d) return (d - pos) / d;
        if (pos > n - d) return (pos - (n - d)) / d;
        return 0.0;
    }
};

void fill_pml_axis(PmlAxis& ax, std::size_t n, AxisMode mode, const CpmlParams& p, double delta,
                   double dt) {
    ax.ik_e.assign(n + 1, 1.0);
    ax.b_e.assign(n + 1, 1.0);
    ax.c_e.assign(n + 1, 0.0);
    ax.ik_h.assign(n, 1.0);
    ax.b_h.assign(n, 1.0);
    ax.c_h.assign(n, 0.0);
    if (mode != AxisMode::cpml) return;

    const double sigma_max =
        p.sigma_factor * static_cast<double>(p.order + 1) / (kEta0 * delta);
    AxisProfile prof;
    auto fill = [&](double pos, double& ik, double& b, double& c) {
        const double f = prof.frac(pos, static_cast<double>(n), p.depth);
        const double fp = std::pow(f, p.order);
        const double sig = sigma_max * fp;
        const double kap = 1.0 + (p.kappa_max - 1.0) * fp;
        const double alp = p.alpha_max * (1.0 - f);
        b = std::exp(-(sig / kap + alp) * dt / kEps0);
        const double denom = sig * kap + kap * kap * alp;
        c = denom > 0.0 ? sig * (b - 1.0) / denom : 0.0;
        ik = 1.0 / kap;
    };
    for (std::size_t i = 0; i <= n; ++i)
        fill(static_cast<double>(i), ax.ik_e[i], ax.b_e[i], ax.c_e[i]);
    for (std::size_t i = 0; i < n; ++i)
        fill(static_cast<double>(i) + 0.5, ax.ik_h[i], ax.b_h[i], ax.c_h[i]);
}

struct CellProps {
    double sigma = 0.0;
    double eps = 1.0; // relative; air
};

void fill_edge_coefficients(SimulationGrid& g) {
    const double dt = g.dt;
    const long long nx = static_cast<long long>(g.nx);
    const long long ny = static_cast<long long>(g.ny);
    const long long nz = static_cast<long long>(g.nz);
    const long long dims[3] = {nx, ny, nz};

    // Out-of-range neighbor cells wrap on periodic axes and count as air on
    // closed ones.
    auto wrap = [&](long long c, int axis, bool& outside) {
        if (c >= 0 && c < dims[axis]) return c;
        if (g.mode[axis] == AxisMode::periodic) return c < 0 ? dims[axis] - 1 : 0LL;
        outside = true;
        return 0LL;
    };
    auto edge_props = [&](long long c0x, long long c0y, long long c0z, long long c1x,
                          long long c1y, long long c1z, long long c2x, long long c2y,
                          long long c2z, long long c3x, long long c3y, long long c3z) {
        CellProps acc{0.0, 0.0};
        const long long cs[4][3] = {
            {c0x, c0y, c0z}, {c1x, c1y, c1z}, {c2x, c2y, c2z}, {c3x, c3y, c3z}};
        for (const auto& c : cs) {
            bool outside = false;
            const long long x = wrap(c[0], 0, outside);
            const long long y = wrap(c[1], 1, outside);
            const long long z = wrap(c[2], 2, outside);
            if (outside) {
                acc.eps += 1.0;
                continue;
            }
            const std::size_t idx = g.sigma_cell.index(static_cast<std::size_t>(x),
                                                       static_cast<std::size_t>(y),
                                                       static_cast<std::size_t>(z));
            acc.sigma += g.sigma_cell[idx];
            acc.eps += g.eps_cell[idx];
        }
        acc.sigma *= 0.25;
        acc.eps *= 0.25;
        return acc;
    };
    auto coeffs = [&](const CellProps& p, double& ca, double& cb) {
        const double eps = kEps0 * p.eps;
        const double a = p.sigma * dt / (2.0 * eps);
        ca = (1.0 - a) / (1.0 + a);
        cb = (dt / eps) / (1.0 + a);
    };

    g.ca_ex = GridD(g.nx, g.ny + 1, g.nz + 1);
    g.cb_ex = GridD(g.nx, g.ny + 1, g.nz + 1);
    for (long long k = 0; k <= nz; ++k)
        for (long long j = 0; j <= ny; ++j)
            for (long long i = 0; i < nx; ++i) {
                const CellProps p =
                    edge_props(i, j - 1, k - 1, i, j, k - 1, i, j - 1, k, i, j, k);
                coeffs(p, g.ca_ex(i, j, k), g.cb_ex(i, j, k));
            }

    g.ca_ey = GridD(g.nx + 1, g.ny, g.nz + 1);
    g.cb_ey = GridD(g.nx + 1, g.ny, g.nz + 1);
    for (long long k = 0; k <= nz; ++k)
        for (long long j = 0; j < ny; ++j)
            for (long long i = 0; i <= nx; ++i) {
                const CellProps p =
                    edge_props(i - 1, j, k - 1, i, j, k - 1, i - 1, j, k, i, j, k);
                coeffs(p, g.ca_ey(i, j, k), g.cb_ey(i, j, k));
            }

    g.ca_ez = GridD(g.nx + 1, g.ny + 1, g.nz);
    g.cb_ez = GridD(g.nx + 1, g.ny + 1, g.nz);
    for (long long k = 0; k < nz; ++k)
        for (long long j = 0; j <= ny; ++j)
            for (long long i = 0; i <= nx; ++i) {
                const CellProps p =
                    edge_props(i - 1, j - 1, k, i, j - 1, k, i - 1, j, k, i, j, k);
                coeffs(p, g.ca_ez(i, j, k), g.cb_ez(i, j, k));
            }
}

} // namespace

SimulationGrid make_grid(std::size_t nx, std::size_t ny, std::size_t nz, double delta_mm,
                         double freq_hz, AxisMode mode_x, AxisMode mode_y, AxisMode mode_z,
                         const CpmlParams& cpml, const GridD& sigma, const GridD& eps_r) {
    if (nx < 2 || ny < 2 || nz < 2) throw DomainError("grid needs at least 2 cells per axis");
    if (!(delta_mm > 0)) throw DomainError("cell size must be positive");
    if (freq_hz < 0) throw DomainError("frequency must be >= 0");
    if (cpml.depth < 1) throw DomainError("absorber depth must be >= 1");

    SimulationGrid g;
    g.nx = nx;
    g.ny = ny;
    g.nz = nz;
    g.delta = delta_mm * 1e-3;
    g.mode[0] = mode_x;
    g.mode[1] = mode_y;
    g.mode[2] = mode_z;
    g.cpml = cpml;
    g.freq = freq_hz;

    const std::size_t dims[3] = {nx, ny, nz};
    for (int a = 0; a < 3; ++a)
        if (g.mode[a] == AxisMode::cpml && dims[a] < 2 * static_cast<std::size_t>(cpml.depth) + 4)
            throw DomainError("axis too short for the absorber depth");

    const double dt_cfl = 0.99 * g.delta / (kC0 * std::sqrt(3.0));
    if (freq_hz > 0) {
        const double period = 1.0 / freq_hz;
        g.steps_per_period = static_cast<std::size_t>(std::ceil(period / dt_cfl));
        g.dt = period / static_cast<double>(g.steps_per_period);
    } else {
        g.steps_per_period = 0;
        g.dt = dt_cfl;
    }

    if (!sigma.empty()) {
        if (sigma.nx() != nx || sigma.ny() != ny || sigma.nz() != nz ||
            !sigma.same_shape(eps_r))
            throw DomainError("material grids must match the cell dimensions");
        for (std::size_t i = 0; i < sigma.size(); ++i)
            if (!std::isfinite(sigma[i]) || !std::isfinite(eps_r[i]) || sigma[i] < 0 ||
                eps_r[i] < 1.0)
                throw DomainError("material values must be finite, sigma >= 0, eps >= 1");
        g.sigma_cell = sigma;
        g.eps_cell = eps_r;
    } else {
        g.sigma_cell = GridD(nx, ny, nz, 0.0);
        g.eps_cell = GridD(nx, ny, nz, 1.0);
    }
    g.rho_cell = GridD(nx, ny, nz, 0.0);

    fill_pml_axis(g.pml[0], nx, mode_x, cpml, g.delta, g.dt);
    fill_pml_axis(g.pml[1], ny, mode_y, cpml, g.delta, g.dt);
    fill_pml_axis(g.pml[2], nz, mode_z, cpml, g.delta, g.dt);
    fill_edge_coefficients(g);
    return g;
}

FieldState make_state(const SimulationGrid& g) {
    FieldState s;
    s.ex = GridD(g.nx, g.ny + 1, g.nz + 1);
    s.ey = GridD(g.nx + 1, g.ny, g.nz + 1);
    s.ez = GridD(g.nx + 1, g.ny + 1, g.nz);
    s.hx = GridD(g.nx + 1, g.ny, g.nz);
    s.hy = GridD(g.nx, g.ny + 1, g.nz);
    s.hz = GridD(g.nx, g.ny, g.nz + 1);
    s.pexy = GridD(g.nx, g.ny + 1, g.nz + 1);
    s.pexz = GridD(g.nx, g.ny + 1, g.nz + 1);
    s.peyz = GridD(g.nx + 1, g.ny, g.nz + 1);
    s.peyx = GridD(g.nx + 1, g.ny, g.nz + 1);
    s.pezx = GridD(g.nx + 1, g.ny + 1, g.nz);
    s.pezy = GridD(g.nx + 1, g.ny + 1, g.nz);
    s.phxy = GridD(g.nx + 1, g.ny, g.nz);
    s.phxz = GridD(g.nx + 1, g.ny, g.nz);
    s.phyz = GridD(g.nx, g.ny + 1, g.nz);
    s.phyx = GridD(g.nx, g.ny + 1, g.nz);
    s.phzx = GridD(g.nx, g.ny, g.nz + 1);
    s.phzy = GridD(g.nx, g.ny, g.nz + 1);
    return s;
}

void step(const SimulationGrid& g, FieldState& s) {
    const double inv_d = 1.0 / g.delta;
    const double hf = g.dt / kMu0;
    const long long nx = static_cast<long long>(g.nx);
    const long long ny = static_cast<long long>(g.ny);
    const long long nz = static_cast<long long>(g.nz);
    const PmlAxis& px = g.pml[0];
    const PmlAxis& py = g.pml[1];
    const PmlAxis& pz = g.pml[2];

    if (s.track_energy) {
        s.hx_prev = s.hx;
        s.hy_prev = s.hy;
        s.hz_prev = s.hz;
        s.ex_prev = s.ex;
        s.ey_prev = s.ey;
        s.ez_prev = s.ez;
    }

    // H advance: curls of E, all neighbors in range by construction.
#pragma omp parallel for collapse(2) schedule(static)
    for (long long k = 0; k < nz; ++k)
        for (long long j = 0; j < ny; ++j)
            for (long long i = 0; i <= nx; ++i) {
                const double dzy = (s.ez(i, j + 1, k) - s.ez(i, j, k)) * inv_d;
                const double dyz = (s.ey(i, j, k + 1) - s.ey(i, j, k)) * inv_d;
                double& fy = s.phxy(i, j, k);
                double& fz = s.phxz(i, j, k);
                fy = py.b_h[j] * fy + py.c_h[j] * dzy;
                fz = pz.b_h[k] * fz + pz.c_h[k] * dyz;
                s.hx(i, j, k) -= hf * (dzy * py.ik_h[j] - dyz * pz.ik_h[k] + fy - fz);
            }

#pragma omp parallel for collapse(2) schedule(static)
    for (long long k = 0; k < nz; ++k)
        for (long long j = 0; j <= ny; ++j)
            for (long long i = 0; i < nx; ++i) {
                const double dxz = (s.ex(i, j, k + 1) - s.ex(i, j, k)) * inv_d;
                const double dzx = (s.ez(i + 1, j, k) - s.ez(i, j, k)) * inv_d;
                double& fz = s.phyz(i, j, k);
                double& fx = s.phyx(i, j, k);
                fz = pz.b_h[k] * fz + pz.c_h[k] * dxz;
                fx = px.b_h[i] * fx + px.c_h[i] * dzx;
                s.hy(i, j, k) -= hf * (dxz * pz.ik_h[k] - dzx * px.ik_h[i] + fz - fx);
            }

#pragma omp parallel for collapse(2) schedule(static)
    for (long long k = 0; k <= nz; ++k)
        for (long long j = 0; j < ny; ++j)
            for (long long i = 0; i < nx; ++i) {
                const double dyx = (s.ey(i + 1, j, k) - s.ey(i, j, k)) * inv_d;
                const double dxy = (s.ex(i, j + 1, k) - s.ex(i, j, k)) * inv_d;
                double& fx = s.phzx(i, j, k);
                double& fy = s.phzy(i, j, k);
                fx = px.b_h[i] * fx + px.c_h[i] * dyx;
                fy = py.b_h[j] * fy + py.c_h[j] * dxy;
                s.hz(i, j, k) -= hf * (dyx * px.ik_h[i] - dxy * py.ik_h[j] + fx - fy);
            }

    // E advance. Tangential boundary layers are skipped on closed axes and
    // wrapped on periodic ones (the j==0 / k==0 cases only occur there).
    const long long jlo_x = g.mode[1] == AxisMode::periodic ? 0 : 1;
    const long long jhi_x = ny - 1;
    const long long klo_x = g.mode[2] == AxisMode::periodic ? 0 : 1;
    const long long khi_x = nz - 1;
#pragma omp parallel for collapse(2) schedule(static)
    for (long long k = klo_x; k <= khi_x; ++k)
        for (long long j = jlo_x; j <= jhi_x; ++j)
            for (long long i = 0; i < nx; ++i) {
                const long long jm = j > 0 ? j - 1 : ny - 1;
                const long long km = k > 0 ? k - 1 : nz - 1;
                const double dzy = (s.hz(i, j, k) - s.hz(i, jm, k)) * inv_d;
                const double dyz = (s.hy(i, j, k) - s.hy(i, j, km)) * inv_d;
                double& fy = s.pexy(i, j, k);
                double& fz = s.pexz(i, j, k);
                fy = py.b_e[j] * fy + py.c_e[j] * dzy;
                fz = pz.b_e[k] * fz + pz.c_e[k] * dyz;
                s.ex(i, j, k) =
                    g.ca_ex(i, j, k) * s.ex(i, j, k) +
                    g.cb_ex(i, j, k) * (dzy * py.ik_e[j] - dyz * pz.ik_e[k] + fy - fz);
            }

    const long long ilo_y = g.mode[0] == AxisMode::periodic ? 0 : 1;
    const long long ihi_y = nx - 1;
    const long long klo_y = g.mode[2] == AxisMode::periodic ? 0 : 1;
    const long long khi_y = nz - 1;
#pragma omp parallel for collapse(2) schedule(static)
    for (long long k = klo_y; k <= khi_y; ++k)
        for (long long j = 0; j < ny; ++j)
            for (long long i = ilo_y; i <= ihi_y; ++i) {
                const long long im = i > 0 ? i - 1 : nx - 1;
                const long long km = k > 0 ? k - 1 : nz - 1;
                const double dxz = (s.hx(i, j, k) - s.hx(i, j, km)) * inv_d;
                const double dzx = (s.hz(i, j, k) - s.hz(im, j, k)) * inv_d;
                double& fz = s.peyz(i, j, k);
                double& fx = s.peyx(i, j, k);
                fz = pz.b_e[k] * fz + pz.c_e[k] * dxz;
                fx = px.b_e[i] * fx + px.c_e[i] * dzx;
                s.ey(i, j, k) =
                    g.ca_ey(i, j, k) * s.ey(i, j, k) +
                    g.cb_ey(i, j, k) * (dxz * pz.ik_e[k] - dzx * px.ik_e[i] + fz - fx);
            }

    const long long ilo_z = g.mode[0] == AxisMode::periodic ? 0 : 1;
    const long long ihi_z = nx - 1;
    const long long jlo_z = g.mode[1] == AxisMode::periodic ? 0 : 1;
    const long long jhi_z = ny - 1;
#pragma omp parallel for collapse(2) schedule(static)
    for (long long k = 0; k < nz; ++k)
        for (long long j = jlo_z; j <= jhi_z; ++j)
            for (long long i = ilo_z; i <= ihi_z; ++i) {
                const long long im = i > 0 ? i - 1 : nx - 1;
                const long long jm = j > 0 ? j - 1 : ny - 1;
                const double dyx = (s.hy(i, j, k) - s.hy(im, j, k)) * inv_d;
                const double dxy = (s.hx(i, j, k) - s.hx(i, jm, k)) * inv_d;
                double& fx = s.pezx(i, j, k);
                double& fy = s.pezy(i, j, k);
                fx = px.b_e[i] * fx + px.c_e[i] * dyx;
                fy = py.b_e[j] * fy + py.c_e[j] * dxy;
                s.ez(i, j, k) =
                    g.ca_ez(i, j, k) * s.ez(i, j, k) +
                    g.cb_ez(i, j, k) * (dyx * px.ik_e[i] - dxy * py.ik_e[j] + fx - fy);
            }

    // Soft current injection at t = (n + 1/2) dt.
    if (g.waveform && !g.sources.empty()) {
        const double t_half = (static_cast<double>(s.step) + 0.5) * g.dt;
        const double cur = g.waveform(t_half);
        const double inv_area = 1.0 / (g.delta * g.delta);
        for (const SoftSource& src : g.sources) {
            const double j_term = cur * src.scale * inv_area;
            switch (src.comp) {
                case FieldComp::ex:
                    s.ex(src.i, src.j, src.k) -= g.cb_ex(src.i, src.j, src.k) * j_term;
                    break;
                case FieldComp::ey:
                    s.ey(src.i, src.j, src.k) -= g.cb_ey(src.i, src.j, src.k) * j_term;
                    break;
                case FieldComp::ez:
                    s.ez(src.i, src.j, src.k) -= g.cb_ez(src.i, src.j, src.k) * j_term;
                    break;
            }
        }
    }

    // Duplicated layers on periodic axes, lowest axis first so shared corners
    // settle to the owning layer's values.
    if (g.mode[0] == AxisMode::periodic) {
        for (long long k = 0; k <= nz; ++k)
            for (long long j = 0; j < ny; ++j) s.ey(nx, j, k) = s.ey(0, j, k);
        for (long long k = 0; k < nz; ++k)
            for (long long j = 0; j <= ny; ++j) s.ez(nx, j, k) = s.ez(0, j, k);
    }
    if (g.mode[1] == AxisMode::periodic) {
        for (long long k = 0; k <= nz; ++k)
            for (long long i = 0; i < nx; ++i) s.ex(i, ny, k) = s.ex(i, 0, k);
        for (long long k = 0; k < nz; ++k)
            for (long long i = 0; i <= nx; ++i) s.ez(i, ny, k) = s.ez(i, 0, k);
    }
    if (g.mode[2] == AxisMode::periodic) {
        for (long long j = 0; j <= ny; ++j)
            for (long long i = 0; i < nx; ++i) s.ex(i, j, nz) = s.ex(i, j, 0);
        for (long long j = 0; j < ny; ++j)
            for (long long i = 0; i <= nx; ++i) s.ey(i, j, nz) = s.ey(i, j, 0);
    }

    s.step += 1;

    if (g.has_feed) {
        const std::size_t fi = g.feed_i, fj = g.feed_j, fk = g.feed_k;
        const double v = -s.ez(fi, fj, fk) * g.delta;
        const double cur = g.delta * (s.hy(fi, fj, fk) - s.hy(fi - 1, fj, fk) -
                                      s.hx(fi, fj, fk) + s.hx(fi, fj - 1, fk));
        if (!std::isfinite(v) || !std::isfinite(cur))
            throw NumericError("fields became non-finite at step " + std::to_string(s.step));
        s.trace.push_back({s.step, v, cur});
    }
}

namespace {

bool grid_finite(const GridD& g) {
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!std::isfinite(g[i])) return false;
    return true;
}

void check_state_finite(const FieldState& s) {
    if (!grid_finite(s.ex) || !grid_finite(s.ey) || !grid_finite(s.ez) || !grid_finite(s.hx) ||
        !grid_finite(s.hy) || !grid_finite(s.hz))
        throw NumericError("fields became non-finite at step " + std::to_string(s.step));
}

double probe_value(const FieldState& s, const SoftSource& p) {
    switch (p.comp) {
        case FieldComp::ex: return s.ex(p.i, p.j, p.k);
        case FieldComp::ey: return s.ey(p.i, p.j, p.k);
        case FieldComp::ez: return s.ez(p.i, p.j, p.k);
    }
    return 0.0;
}

void center_phasors(const SimulationGrid& g, PhasorField& pf) {
    pf.ex = GridC(g.nx, g.ny, g.nz);
    pf.ey = GridC(g.nx, g.ny, g.nz);
    pf.ez = GridC(g.nx, g.ny, g.nz);
    const long long nx = static_cast<long long>(g.nx);
    const long long ny = static_cast<long long>(g.ny);
    const long long nz = static_cast<long long>(g.nz);
#pragma omp parallel for collapse(2) schedule(static)
    for (long long k = 0; k < nz; ++k)
        for (long long j = 0; j < ny; ++j)
            for (long long i = 0; i < nx; ++i) {
                pf.ex(i, j, k) = 0.25 * (pf.ex_edge(i, j, k) + pf.ex_edge(i, j + 1, k) +
                                         pf.ex_edge(i, j, k + 1) + pf.ex_edge(i, j + 1, k + 1));
                pf.ey(i, j, k) = 0.25 * (pf.ey_edge(i, j, k) + pf.ey_edge(i + 1, j, k) +
                                         pf.ey_edge(i, j, k + 1) + pf.ey_edge(i + 1, j, k + 1));
                pf.ez(i, j, k) = 0.25 * (pf.ez_edge(i, j, k) + pf.ez_edge(i + 1, j, k) +
                                         pf.ez_edge(i, j + 1, k) + pf.ez_edge(i + 1, j + 1, k));
            }
}

void accumulate(GridC& acc, const GridD& field, std::complex<double> w) {
    const long long n = static_cast<long long>(field.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) acc[i] += w * field[i];
}

} // namespace

PhasorField run_to_steady_state(const SimulationGrid& g, FieldState& s,
                                const SteadyStateConfig& cfg) {
    if (g.freq <= 0 || g.steps_per_period == 0)
        throw DomainError("steady-state extraction needs a sinusoidal drive");
    if (!g.has_feed && !cfg.has_probe)
        throw DomainError("steady-state extraction needs a feed or a probe");
    if (cfg.min_periods < 2 || cfg.max_periods < cfg.min_periods)
        throw DomainError("period limits must satisfy 2 <= min <= max");

    const std::size_t N = g.steps_per_period;
    const double w = 2.0 * std::numbers::pi * g.freq;
    std::vector<double> amps;
    bool converged = false;

    for (int p = 1; p <= cfg.max_periods; ++p) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t n = 0; n < N; ++n) {
            step(g, s);
            double sample, t;
            if (g.has_feed) {
                sample = s.trace.back().i;
                t = (static_cast<double>(s.step) - 0.5) * g.dt;
            } else {
                sample = probe_value(s, cfg.probe);
                t = static_cast<double>(s.step) * g.dt;
            }
            acc += sample * std::exp(std::complex<double>(0.0, -w * t));
        }
        check_state_finite(s);
        const double amp = 2.0 * std::abs(acc) / static_cast<double>(N);
        if (!amps.empty() && p >= cfg.min_periods) {
            const double prev = amps.back();
            if (std::abs(amp - prev) <= cfg.tol * std::max(amp, 1e-300)) {
                amps.push_back(amp);
                converged = true;
                break;
            }
        }
        amps.push_back(amp);
    }
    if (!converged) {
        std::string tail;
        const std::size_t n0 = amps.size() > 5 ? amps.size() - 5 : 0;
        for (std::size_t i = n0; i < amps.size(); ++i)
            tail += (tail.empty() ? "" : ", ") + std::to_string(amps[i]);
        throw ConvergenceError("feed amplitude still changing after " +
                               std::to_string(cfg.max_periods) +
                               " periods; last amplitudes: " + tail);
    }

    PhasorField pf;
    pf.delta = g.delta;
    pf.freq = g.freq;
    pf.ex_edge = GridC(g.nx, g.ny + 1, g.nz + 1);
    pf.ey_edge = GridC(g.nx + 1, g.ny, g.nz + 1);
    pf.ez_edge = GridC(g.nx + 1, g.ny + 1, g.nz);
    pf.hx_edge = GridC(g.nx + 1, g.ny, g.nz);
    pf.hy_edge = GridC(g.nx, g.ny + 1, g.nz);
    pf.hz_edge = GridC(g.nx, g.ny, g.nz + 1);

    const double norm = 2.0 / static_cast<double>(N);
    for (std::size_t n = 0; n < N; ++n) {
        step(g, s);
        const double t_e = static_cast<double>(s.step) * g.dt;
        const double t_h = (static_cast<double>(s.step) - 0.5) * g.dt;
        const std::complex<double> we =
            norm * std::exp(std::complex<double>(0.0, -w * t_e));
        const std::complex<double> wh =
            norm * std::exp(std::complex<double>(0.0, -w * t_h));
        accumulate(pf.ex_edge, s.ex, we);
        accumulate(pf.ey_edge, s.ey, we);
        accumulate(pf.ez_edge, s.ez, we);
        accumulate(pf.hx_edge, s.hx, wh);
        accumulate(pf.hy_edge, s.hy, wh);
        accumulate(pf.hz_edge, s.hz, wh);
        if (g.has_feed) {
            pf.feed_v += we * s.trace.back().v;
            pf.feed_i += wh * s.trace.back().i;
        }
    }
    check_state_finite(s);
    center_phasors(g, pf);
    pf.periods = static_cast<int>(amps.size()) + 1;
    if (g.has_feed)
        pf.accepted_power_w = 0.5 * (pf.feed_v * std::conj(pf.feed_i)).real();
    return pf;
}

FeedMetrics feed_metrics(const PhasorField& pf) {
    if (!(std::abs(pf.feed_v) > 0.0) || !(std::abs(pf.feed_i) > 0.0))
        throw DomainError("degenerate feed: zero gap voltage or current phasor");
    FeedMetrics m;
    m.impedance = pf.feed_v / pf.feed_i;
    m.accepted_power_w = 0.5 * (pf.feed_v * std::conj(pf.feed_i)).real();
    return m;
}

PhasorField normalize_to_power(PhasorField pf, double target_w) {
    if (!(target_w > 0)) throw DomainError("target power must be positive");
    const double p0 = 0.5 * (pf.feed_v * std::conj(pf.feed_i)).real();
    if (!(p0 > 0)) throw DomainError("accepted power must be positive before normalization");
    const double s = std::sqrt(target_w / p0);
    auto scale = [s](GridC& gc) {
        for (std::size_t i = 0; i < gc.size(); ++i) gc[i] *= s;
    };
    scale(pf.ex);
    scale(pf.ey);
    scale(pf.ez);
    scale(pf.ex_edge);
    scale(pf.ey_edge);
    scale(pf.ez_edge);
    scale(pf.hx_edge);
    scale(pf.hy_edge);
    scale(pf.hz_edge);
    pf.feed_v *= s;
    pf.feed_i *= s;
    pf.accepted_power_w = 0.5 * (pf.feed_v * std::conj(pf.feed_i)).real();
    return pf;
}

double field_energy(const SimulationGrid& g, const FieldState& s) {
    if (!s.track_energy || s.hx_prev.empty())
        throw DomainError("energy needs track_energy set before stepping");
    // E is taken just before its update so it sits between the two H times
    // in the product below; that pairing is what the leapfrog conserves.
    const double cell = g.delta * g.delta * g.delta;
    double ue = 0.0;
    auto add_e = [&](const GridD& e, const GridD& cb) {
        for (std::size_t i = 0; i < e.size(); ++i)
            if (cb[i] > 0.0) ue += (g.dt / cb[i]) * e[i] * e[i];
    };
    add_e(s.ex_prev, g.cb_ex);
    add_e(s.ey_prev, g.cb_ey);
    add_e(s.ez_prev, g.cb_ez);
    double uh = 0.0;
    auto add_h = [&](const GridD& cur, const GridD& prev) {
        for (std::size_t i = 0; i < cur.size(); ++i) uh += cur[i] * prev[i];
    };
    add_h(s.hx, s.hx_prev);
    add_h(s.hy, s.hy_prev);
    add_h(s.hz, s.hz_prev);
    return 0.5 * cell * (ue + kMu0 * uh);
}

double poynting_box_power(const SimulationGrid& g, const PhasorField& pf, std::size_t inset) {
    if (pf.ex_edge.empty()) throw DomainError("flux needs edge phasors");
    if (2 * inset + 2 >= std::min({g.nx, g.ny, g.nz}))
        throw DomainError("flux box inset leaves no interior");
    const std::size_t x0 = inset, x1 = g.nx - inset;
    const std::size_t y0 = inset, y1 = g.ny - inset;
    const std::size_t z0 = inset, z1 = g.nz - inset;
    const double da = g.delta * g.delta;
    using C = std::complex<double>;
    double total = 0.0;

    // x faces: S_x = Ey Hz* - Ez Hy*
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t i = side ? x1 : x0;
        const double sgn = side ? 1.0 : -1.0;
        double p = 0.0;
        for (std::size_t k = z0; k < z1; ++k)
            for (std::size_t j = y0; j < y1; ++j) {
                const C ey = 0.5 * (pf.ey_edge(i, j, k) + pf.ey_edge(i, j, k + 1));
                const C ez = 0.5 * (pf.ez_edge(i, j, k) + pf.ez_edge(i, j + 1, k));
                const C hz = 0.25 * (pf.hz_edge(i - 1, j, k) + pf.hz_edge(i, j, k) +
                                     pf.hz_edge(i - 1, j, k + 1) + pf.hz_edge(i, j, k + 1));
                const C hy = 0.25 * (pf.hy_edge(i - 1, j, k) + pf.hy_edge(i, j, k) +
                                     pf.hy_edge(i - 1, j + 1, k) + pf.hy_edge(i, j + 1, k));
                p += 0.5 * (ey * std::conj(hz) - ez * std::conj(hy)).real();
            }
        total += sgn * p * da;
    }
    // y faces: S_y = Ez Hx* - Ex Hz*
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t j = side ? y1 : y0;
        const double sgn = side ? 1.0 : -1.0;
        double p = 0.0;
        for (std::size_t k = z0; k < z1; ++k)
            for (std::size_t i = x0; i < x1; ++i) {
                const C ez = 0.5 * (pf.ez_edge(i, j, k) + pf.ez_edge(i + 1, j, k));
                const C ex = 0.5 * (pf.ex_edge(i, j, k) + pf.ex_edge(i, j, k + 1));
                const C hx = 0.25 * (pf.hx_edge(i, j - 1, k) + pf.hx_edge(i, j, k) +
                                     pf.hx_edge(i + 1, j - 1, k) + pf.hx_edge(i + 1, j, k));
                const C hz = 0.25 * (pf.hz_edge(i, j - 1, k) + pf.hz_edge(i, j, k) +
                                     pf.hz_edge(i, j - 1, k + 1) + pf.hz_edge(i, j, k + 1));
                p += 0.5 * (ez * std::conj(hx) - ex * std::conj(hz)).real();
            }
        total += sgn * p * da;
    }
    // z faces: S_z = Ex Hy* - Ey Hx*
    for (std::size_t side = 0; side < 2; ++side) {
        const std::size_t k = side ? z1 : z0;
        const double sgn = side ? 1.0 : -1.0;
        double p = 0.0;
        for (std::size_t j = y0; j < y1; ++j)
            for (std::size_t i = x0; i < x1; ++i) {
                const C ex = 0.5 * (pf.ex_edge(i, j, k) + pf.ex_edge(i, j + 1, k));
                const C ey = 0.5 * (pf.ey_edge(i, j, k) + pf.ey_edge(i + 1, j, k));
                const C hy = 0.25 * (pf.hy_edge(i, j, k - 1) + pf.hy_edge(i, j, k) +
                                     pf.hy_edge(i, j + 1, k - 1) + pf.hy_edge(i, j + 1, k));
                const C hx = 0.25 * (pf.hx_edge(i, j, k - 1) + pf.hx_edge(i, j, k) +
                                     pf.hx_edge(i + 1, j, k - 1) + pf.hx_edge(i + 1, j, k));
                p += 0.5 * (ex * std::conj(hy) - ey * std::conj(hx)).real();
            }
        total += sgn * p * da;
    }
    return total;
}

std::complex<double> dft_peak_phasor(const std::vector<double>& samples, double freq_hz,
                                     double dt, double t0) {
    if (samples.empty()) throw DomainError("dft needs samples");
    const double w = 2.0 * std::numbers::pi * freq_hz;
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        acc += samples[n] * std::exp(std::complex<double>(0.0, -w * t));
    }
    return 2.0 * acc / static_cast<double>(samples.size());
}

GridD resample_nearest(const GridD& src, double src_mm, double dst_mm) {
    if (!(src_mm > 0) || !(dst_mm > 0)) throw DomainError("voxel pitches must be positive");
    if (src.empty()) return src;
    auto out_dim = [&](std::size_t n) {
        const double v = static_cast<double>(n) * src_mm / dst_mm;
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(v)));
    };
    const std::size_t nx = out_dim(src.nx()), ny = out_dim(src.ny()), nz = out_dim(src.nz());
    GridD out(nx, ny, nz);
    auto map = [&](std::size_t i, std::size_t n_src) {
        const double c = (static_cast<double>(i) + 0.5) * dst_mm / src_mm;
        long long s = static_cast<long long>(std::floor(c));
        s = std::clamp<long long>(s, 0, static_cast<long long>(n_src) - 1);
        return static_cast<std::size_t>(s);
    };
    for (std::size_t z = 0; z < nz; ++z) {
        const std::size_t sz = map(z, src.nz());
        for (std::size_t y = 0; y < ny; ++y) {
            const std::size_t sy = map(y, src.ny());
            for (std::size_t x = 0; x < nx; ++x) out(x, y, z) = src(map(x, src.nx()), sy, sz);
        }
    }
    return out;
}

Simulation build_simulation(const PropertyMaps& maps, const DipoleSource& source,
                            const GridConfig& config) {
    if (config.margin_cells < 2) throw DomainError("margin must be >= 2 cells");
    const double freq = band_hz(source.band);
    const double delta_mm = config.delta_mm;
    const double length_mm =
        source.total_length_mm > 0 ? source.total_length_mm : dipole_length_mm(source.band);

    // Odd cell count so a single gap edge sits at the center.
    const double cells = length_mm / delta_mm;
    long long n_dip = 2 * std::llround((cells - 1.0) / 2.0) + 1;
    n_dip = std::max<long long>(3, n_dip);
    const long long arm = (n_dip - 1) / 2;

    const long long d = config.cpml.depth;
    const long long m = config.margin_cells;
    const long long base = d + m;

    GridD sig_head, eps_head, rho_head;
    long long hnx = 0, hny = 0, hnz = 0;
    long long dip_i = 0, dip_j = 0, gap_k = 0; // local to the material box
    const bool have_head = !maps.sigma.empty();
    if (have_head) {
        if (maps.band != source.band)
            throw DomainError("property maps and source disagree on frequency band");
        sig_head = resample_nearest(maps.sigma, maps.voxel_size_mm, delta_mm);
        eps_head = resample_nearest(maps.epsilon, maps.voxel_size_mm, delta_mm);
        rho_head = resample_nearest(maps.rho, maps.voxel_size_mm, delta_mm);
        hnx = static_cast<long long>(sig_head.nx());
        hny = static_cast<long long>(sig_head.ny());
        hnz = static_cast<long long>(sig_head.nz());

        long long ty0 = hny, ty1 = -1, tz0 = hnz, tz1 = -1;
        for (long long z = 0; z < hnz; ++z)
            for (long long y = 0; y < hny; ++y)
                for (long long x = 0; x < hnx; ++x)
                    if (rho_head(x, y, z) > 0) {
                        ty0 = std::min(ty0, y);
                        ty1 = std::max(ty1, y);
                        tz0 = std::min(tz0, z);
                        tz1 = std::max(tz1, z);
                    }
        if (tz1 < 0) throw DomainError("property maps contain no tissue voxels");

        const long long z_mid = (tz0 + tz1) / 2;
        long long x_surf = -1;
        for (long long z = std::max<long long>(z_mid - 1, 0);
             z <= std::min(z_mid + 1, hnz - 1); ++z)
            for (long long y = 0; y < hny; ++y)
                for (long long x = 0; x < hnx; ++x)
                    if (rho_head(x, y, z) > 0) x_surf = std::max(x_surf, x);
        const long long s_cells =
            std::max<long long>(1, std::llround(source.standoff_mm / delta_mm));
        dip_i = x_surf + 1 + s_cells;
        dip_j = (ty0 + ty1 + 1) / 2;
        gap_k = z_mid;
    } else {
        dip_i = 0;
        dip_j = 0;
        gap_k = arm;
        hnz = n_dip;
    }

    const long long content_lo_z = std::min<long long>(0, gap_k - arm);
    const long long content_hi_z = std::max<long long>(hnz, gap_k + arm + 1);
    const long long content_x = std::max<long long>(have_head ? hnx : 0, dip_i + 1);
    const long long content_y = std::max<long long>(have_head ? hny : 0, dip_j + 1);

    const std::size_t nx = static_cast<std::size_t>(base + content_x + m + d);
    const std::size_t ny = static_cast<std::size_t>(base + content_y + m + d);
    const std::size_t nz = static_cast<std::size_t>(base + (content_hi_z - content_lo_z) + m + d);
    for (std::size_t n : {nx, ny, nz})
        if (n > config.max_cells_per_axis)
            throw DomainError("simulation domain " + std::to_string(nx) + "x" +
                              std::to_string(ny) + "x" + std::to_string(nz) +
                              " exceeds the per-axis cell limit of " +
                              std::to_string(config.max_cells_per_axis));

    GridD sig_full(nx, ny, nz, 0.0), eps_full(nx, ny, nz, 1.0);
    const long long hx0 = base, hy0 = base, hz0 = base - content_lo_z;
    if (have_head)
        for (long long z = 0; z < hnz; ++z)
            for (long long y = 0; y < hny; ++y)
                for (long long x = 0; x < hnx; ++x) {
                    sig_full(hx0 + x, hy0 + y, hz0 + z) = sig_head(x, y, z);
                    eps_full(hx0 + x, hy0 + y, hz0 + z) = eps_head(x, y, z);
                }

    Simulation sim;
    sim.grid = make_grid(nx, ny, nz, delta_mm, freq, AxisMode::cpml, AxisMode::cpml,
                         AxisMode::cpml, config.cpml, sig_full, eps_full);
    SimulationGrid& g = sim.grid;
    if (have_head) {
        for (long long z = 0; z < hnz; ++z)
            for (long long y = 0; y < hny; ++y)
                for (long long x = 0; x < hnx; ++x)
                    g.rho_cell(hx0 + x, hy0 + y, hz0 + z) = rho_head(x, y, z);
        g.head_x0 = static_cast<std::size_t>(hx0);
        g.head_y0 = static_cast<std::size_t>(hy0);
        g.head_z0 = static_cast<std::size_t>(hz0);
        g.head_nx = static_cast<std::size_t>(hnx);
        g.head_ny = static_cast<std::size_t>(hny);
        g.head_nz = static_cast<std::size_t>(hnz);
    }

    const std::size_t fi = static_cast<std::size_t>(hx0 + dip_i);
    const std::size_t fj = static_cast<std::size_t>((have_head ? hy0 : base) + dip_j);
    const std::size_t fk = static_cast<std::size_t>(hz0 + gap_k);
    g.has_feed = true;
    g.feed_i = fi;
    g.feed_j = fj;
    g.feed_k = fk;
    g.dipole_cells = static_cast<std::size_t>(n_dip);

    // Arms: perfectly conducting vertical edges either side of the gap.
    for (long long a = 1; a <= arm; ++a) {
        for (long long sgn : {-1LL, 1LL}) {
            const std::size_t k = static_cast<std::size_t>(static_cast<long long>(fk) + sgn * a);
            g.ca_ez(fi, fj, k) = 0.0;
            g.cb_ez(fi, fj, k) = 0.0;
            g.pec_ez.push_back(g.ca_ez.index(fi, fj, k));
        }
    }

    g.sources.push_back({FieldComp::ez, fi, fj, fk, 1.0});
    const double amp = source.amplitude;
    const double w = 2.0 * std::numbers::pi * freq;
    const double ramp_t = 3.0 / freq;
    g.waveform = [amp, w, ramp_t](double t) {
        const double envelope =
            t >= ramp_t ? 1.0 : std::sin(0.5 * std::numbers::pi * t / ramp_t) *
                                    std::sin(0.5 * std::numbers::pi * t / ramp_t);
        return amp * envelope * std::sin(w * t);
    };

    sim.state = make_state(sim.grid);
    return sim;
}

ExposureResult simulate_dipole_exposure(const PropertyMaps& maps, const DipoleSource& source,
                                        const ExposureConfig& config) {
    Simulation sim = build_simulation(maps, source, config.grid);
    const SimulationGrid& g = sim.grid;

    PhasorField pf = run_to_steady_state(g, sim.state, config.steady);
    const FeedMetrics fm = feed_metrics(pf);
    pf = normalize_to_power(std::move(pf), config.power_w);

    ExposureResult res;
    res.impedance = fm.impedance;
    res.raw_accepted_w = fm.accepted_power_w;
    res.periods = pf.periods;
    res.steps_per_period = g.steps_per_period;
    res.trace = std::move(sim.state.trace);

    const std::size_t inset = static_cast<std::size_t>(g.cpml.depth) + 2;
    res.radiated_power_w = poynting_box_power(g, pf, inset);

    // Dissipation summed per edge with the conductivity the update itself
    // used (recovered from ca/cb), so it balances the feed and flux numbers.
    double absorbed = 0.0;
    const double cell = g.delta * g.delta * g.delta;
    auto add_loss = [&](const GridD& ca, const GridD& cb, const GridC& e) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (!(cb[i] > 0.0)) continue;
            const double a = (1.0 - ca[i]) / (1.0 + ca[i]);
            if (a <= 0.0) continue;
            const double sigma_e = 2.0 * a / (cb[i] * (1.0 + a));
            absorbed += 0.5 * sigma_e * std::norm(e[i]) * cell;
        }
    };
    add_loss(g.ca_ex, g.cb_ex, pf.ex_edge);
    add_loss(g.ca_ey, g.cb_ey, pf.ey_edge);
    add_loss(g.ca_ez, g.cb_ez, pf.ez_edge);
    res.absorbed_power_w = absorbed;

    // Crop the voxel-centered phasors and materials to the material box.
    const std::size_t hx0 = g.head_x0, hy0 = g.head_y0, hz0 = g.head_z0;
    const std::size_t hnx = g.head_nx, hny = g.head_ny, hnz = g.head_nz;
    PhasorField cropped;
    cropped.delta = pf.delta;
    cropped.freq = pf.freq;
    cropped.feed_v = pf.feed_v;
    cropped.feed_i = pf.feed_i;
    cropped.accepted_power_w = pf.accepted_power_w;
    cropped.periods = pf.periods;
    cropped.ex = GridC(hnx, hny, hnz);
    cropped.ey = GridC(hnx, hny, hnz);
    cropped.ez = GridC(hnx, hny, hnz);
    res.maps.band = source.band;
    res.maps.voxel_size_mm = config.grid.delta_mm;
    res.maps.sigma = GridD(hnx, hny, hnz);
    res.maps.epsilon = GridD(hnx, hny, hnz);
    res.maps.rho = GridD(hnx, hny, hnz);
    for (std::size_t z = 0; z < hnz; ++z)
        for (std::size_t y = 0; y < hny; ++y)
            for (std::size_t x = 0; x < hnx; ++x) {
                cropped.ex(x, y, z) = pf.ex(hx0 + x, hy0 + y, hz0 + z);
                cropped.ey(x, y, z) = pf.ey(hx0 + x, hy0 + y, hz0 + z);
                cropped.ez(x, y, z) = pf.ez(hx0 + x, hy0 + y, hz0 + z);
                res.maps.sigma(x, y, z) = g.sigma_cell(hx0 + x, hy0 + y, hz0 + z);
                res.maps.epsilon(x, y, z) = g.eps_cell(hx0 + x, hy0 + y, hz0 + z);
                res.maps.rho(x, y, z) = g.rho_cell(hx0 + x, hy0 + y, hz0 + z);
            }
    res.phasors = std::move(cropped);
    return res;
}

} // namespace rfdose
