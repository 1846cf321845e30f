#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "rfdose/fdtd.hpp"
#include "rfdose/tissue.hpp"

using namespace rfdose;

namespace {

// Sub-sample peak time via a parabola through the three samples around the
// discrete maximum of |v| restricted to [lo, hi).
double peak_time(const std::vector<double>& v, double dt, std::size_t lo, std::size_t hi) {
    std::size_t m = lo;
    for (std::size_t n = lo; n < hi; ++n)
        if (std::fabs(v[n]) > std::fabs(v[m])) m = n;
    REQUIRE(m > lo);
    REQUIRE(m + 1 < hi);
    const double a = std::fabs(v[m - 1]), b = std::fabs(v[m]), c = std::fabs(v[m + 1]);
    const double denom = a - 2.0 * b + c;
    const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    return (static_cast<double>(m) + 1.0 + shift) * dt; // sample n is t = (n+1) dt
}

std::function<double(double)> gaussian_pulse(double tau, double t0) {
    return [tau, t0](double t) {
        const double u = (t - t0) / tau;
        return std::exp(-u * u);
    };
}

std::function<double(double)> ramped_sine(double freq, double amp = 1.0) {
    const double w = 2.0 * std::numbers::pi * freq;
    const double t_ramp = 3.0 / freq;
    return [w, t_ramp, amp](double t) {
        const double env = t >= t_ramp
                               ? 1.0
                               : std::sin(0.5 * std::numbers::pi * t / t_ramp) *
                                     std::sin(0.5 * std::numbers::pi * t / t_ramp);
        return amp * env * std::sin(w * t);
    };
}

LabelVolume sphere_labels(std::size_t n, double radius, std::uint8_t label) {
    LabelVolume lv;
    lv.labels = GridU8(n, n, n, 0);
    lv.voxel_size_mm = 1.0;
    const double c = 0.5 * static_cast<double>(n - 1);
    for (std::size_t z = 0; z < n; ++z)
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                const double dx = static_cast<double>(x) - c;
                const double dy = static_cast<double>(y) - c;
                const double dz = static_cast<double>(z) - c;
                if (dx * dx + dy * dy + dz * dz <= radius * radius)
                    lv.labels(x, y, z) = label;
            }
    return lv;
}

} // namespace

TEST_CASE("grid factory validates its inputs") {
    CpmlParams cp;
    CHECK_THROWS_AS(make_grid(1, 8, 8, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp),
                    DomainError);
    CHECK_THROWS_AS(make_grid(8, 8, 8, 0.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp),
                    DomainError);
    CHECK_THROWS_AS(
        make_grid(8, 8, 8, 1.0, -1.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp),
        DomainError);

    CpmlParams bad = cp;
    bad.depth = 0;
    CHECK_THROWS_AS(make_grid(8, 8, 8, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, bad),
                    DomainError);
    // depth 10 wants at least 24 cells along an absorbing axis
    CHECK_THROWS_AS(
        make_grid(8, 40, 40, 1.0, 0.0, AxisMode::cpml, AxisMode::pec, AxisMode::pec, cp),
        DomainError);

    GridD sig(4, 4, 4, 0.0), eps(4, 4, 4, 1.0);
    GridD eps_bad(4, 4, 4, 0.5);
    GridD sig_neg(4, 4, 4, -1.0);
    GridD eps_small(4, 4, 3, 1.0);
    CHECK_THROWS_AS(make_grid(4, 4, 4, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp,
                              sig, eps_bad),
                    DomainError);
    CHECK_THROWS_AS(make_grid(4, 4, 4, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp,
                              sig_neg, eps),
                    DomainError);
    CHECK_THROWS_AS(make_grid(4, 4, 4, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp,
                              sig, eps_small),
                    DomainError);
}

TEST_CASE("time step divides the drive period into whole steps") {
    CpmlParams cp;
    auto g = make_grid(30, 30, 30, 2.0, 3e9, AxisMode::cpml, AxisMode::cpml, AxisMode::cpml, cp);
    const double cfl = 0.99 * g.delta / (kC0 * std::sqrt(3.0));
    CHECK(g.dt <= cfl);
    CHECK(g.steps_per_period * g.dt == doctest::Approx(1.0 / 3e9).epsilon(1e-12));
    CHECK(g.steps_per_period == static_cast<std::size_t>(std::ceil(1.0 / 3e9 / cfl)));

    auto g0 = make_grid(8, 8, 8, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp);
    CHECK(g0.dt == 0.99 * g0.delta / (kC0 * std::sqrt(3.0)));
    CHECK(g0.steps_per_period == 0);
}

TEST_CASE("vacuum and blended edge coefficients") {
    CpmlParams cp;
    auto g = make_grid(8, 8, 8, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp);
    CHECK(g.ca_ex(4, 4, 4) == 1.0);
    CHECK(g.cb_ex(4, 4, 4) == g.dt / kEps0);
    CHECK(g.ca_ez(0, 0, 0) == 1.0);

    const auto mu = lookup_properties(11, Band::f3000MHz);
    GridD sig(8, 8, 8, mu.sigma), eps(8, 8, 8, mu.epsilon);
    auto gm = make_grid(8, 8, 8, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp, sig,
                        eps);
    auto expect = [&](double se, double ee, double& ca, double& cb) {
        const double e = kEps0 * ee;
        const double a = se * gm.dt / (2.0 * e);
        ca = (1.0 - a) / (1.0 + a);
        cb = (gm.dt / e) / (1.0 + a);
    };
    double ca, cb;
    // interior edge: all four surrounding cells are muscle
    expect(mu.sigma, mu.epsilon, ca, cb);
    CHECK(gm.ca_ex(4, 4, 4) == doctest::Approx(ca).epsilon(1e-14));
    CHECK(gm.cb_ex(4, 4, 4) == doctest::Approx(cb).epsilon(1e-14));
    // edge on the j=0 face: two cells of muscle, two of air outside the box
    expect(0.5 * mu.sigma, 0.5 * (mu.epsilon + 1.0), ca, cb);
    CHECK(gm.ca_ex(4, 0, 4) == doctest::Approx(ca).epsilon(1e-14));
    CHECK(gm.cb_ex(4, 0, 4) == doctest::Approx(cb).epsilon(1e-14));
}

TEST_CASE("peak phasor recovery from a sampled sinusoid") {
    const double f = 1e9, amp = 1.7, phase = 0.6;
    const double w = 2.0 * std::numbers::pi * f;
    const std::size_t per = 16, periods = 5;
    const double dt = 1.0 / f / static_cast<double>(per);
    const double t0 = 0.3 * dt;
    std::vector<double> x(per * periods);
    for (std::size_t n = 0; n < x.size(); ++n)
        x[n] = amp * std::cos(w * (t0 + static_cast<double>(n) * dt) + phase);
    const auto got = dft_peak_phasor(x, f, dt, t0);
    const auto want = std::polar(amp, phase);
    CHECK(std::abs(got - want) < 1e-10);
    CHECK_THROWS_AS(dft_peak_phasor({}, f, dt, 0.0), DomainError);
}

TEST_CASE("nearest resampling maps voxel centers") {
    GridD src(8, 1, 1);
    for (std::size_t i = 0; i < 8; ++i) src(i, 0, 0) = static_cast<double>(i);

    GridD same = resample_nearest(src, 1.0, 1.0);
    REQUIRE(same.nx() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(same[i] == src[i]);

    GridD down = resample_nearest(src, 1.0, 2.0);
    REQUIRE(down.nx() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(down(i, 0, 0) == src(2 * i + 1, 0, 0));

    GridD up = resample_nearest(src, 2.0, 1.0);
    REQUIRE(up.nx() == 16);
    for (std::size_t i = 0; i < 16; ++i) CHECK(up(i, 0, 0) == src(i / 2, 0, 0));

    GridD odd = resample_nearest(src, 1.0, 0.75);
    CHECK(odd.nx() == 11); // llround(8 / 0.75)
    CHECK_THROWS_AS(resample_nearest(src, 0.0, 1.0), DomainError);
}

TEST_CASE("plane pulse travels at light speed along the grid") {
    CpmlParams cp;
    auto g = make_grid(4, 4, 400, 1.0, 0.0, AxisMode::periodic, AxisMode::periodic, AxisMode::pec,
                       cp);
    const std::size_t k_src = 50;
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < 4; ++i) g.sources.push_back({FieldComp::ex, i, j, k_src, 1.0});
    g.waveform = gaussian_pulse(40.0 * g.dt, 200.0 * g.dt);

    auto s = make_state(g);
    const std::size_t k1 = 120, k2 = 320;
    std::vector<double> a1, a2;
    for (int n = 0; n < 820; ++n) {
        step(g, s);
        a1.push_back(s.ex(0, 0, k1));
        a2.push_back(s.ex(0, 0, k2));
    }
    // first-arrival peaks; later samples hold wall echoes of equal amplitude
    const double t1 = peak_time(a1, g.dt, 0, 440);
    const double t2 = peak_time(a2, g.dt, 440, 820);
    const double speed = static_cast<double>(k2 - k1) * g.delta / (t2 - t1);
    CHECK(std::fabs(speed - kC0) / kC0 < 0.01);
}

TEST_CASE("sinusoid decays at the analytic rate in lossy muscle") {
    const auto mu = lookup_properties(11, Band::f3000MHz);
    const double freq = band_hz(Band::f3000MHz);
    const std::size_t nz = 350, k_src = 25;
    CpmlParams cp;
    GridD sig(3, 3, nz, mu.sigma), eps(3, 3, nz, mu.epsilon);
    auto g = make_grid(3, 3, nz, 0.5, freq, AxisMode::periodic, AxisMode::periodic, AxisMode::pec,
                       cp, sig, eps);
    for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t i = 0; i < 3; ++i) g.sources.push_back({FieldComp::ex, i, j, k_src, 1.0});
    g.waveform = ramped_sine(freq);

    const double w = 2.0 * std::numbers::pi * freq;
    const std::complex<double> eps_c(mu.epsilon, -mu.sigma / (w * kEps0));
    const double alpha = -(w * std::sqrt(kMu0 * kEps0) * std::sqrt(eps_c)).imag();
    const std::size_t skin_cells = static_cast<std::size_t>(std::lround(1.0 / alpha / 0.5e-3));
    const std::size_t fit_lo = k_src + skin_cells;      // one skin depth in
    const std::size_t fit_hi = k_src + 6 * skin_cells;  // five more to the end

    auto s = make_state(g);
    SteadyStateConfig sc;
    sc.min_periods = 10;
    sc.max_periods = 80;
    sc.has_probe = true;
    sc.probe = {FieldComp::ex, 0, 0, fit_hi, 1.0};
    PhasorField pf = run_to_steady_state(g, s, sc);

    // least-squares slope of ln|Ex| over [1, 6] skin depths
    double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
    for (std::size_t k = fit_lo; k <= fit_hi; ++k) {
        const double z = static_cast<double>(k) * g.delta;
        const double lne = std::log(std::abs(pf.ex_edge(0, 0, k)));
        sx += z;
        sy += lne;
        sxx += z * z;
        sxy += z * lne;
        cnt += 1.0;
    }
    const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
    CHECK(std::fabs(-slope - alpha) / alpha < 0.02);
}

TEST_CASE("absorber reflects less than -40 dB of a pulsed point source") {
    CpmlParams cp;
    auto gt = make_grid(64, 64, 64, 1.0, 0.0, AxisMode::cpml, AxisMode::cpml, AxisMode::cpml, cp);
    auto gr = make_grid(120, 120, 120, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp);
    gt.sources.push_back({FieldComp::ez, 32, 32, 32, 1.0});
    gr.sources.push_back({FieldComp::ez, 60, 60, 60, 1.0});
    gt.waveform = gaussian_pulse(12.0 * gt.dt, 60.0 * gt.dt);
    gr.waveform = gt.waveform;

    auto st = make_state(gt);
    auto sr = make_state(gr);
    double peak = 0.0, err = 0.0;
    // window ends before the reference box walls can reach its probe
    for (int n = 0; n < 185; ++n) {
        step(gt, st);
        step(gr, sr);
        const double at = st.ez(46, 32, 32);
        const double ar = sr.ez(74, 60, 60);
        peak = std::max(peak, std::fabs(ar));
        err = std::max(err, std::fabs(at - ar));
    }
    REQUIRE(peak > 0.0);
    CHECK(err <= 0.01 * peak);
}

TEST_CASE("closed lossless box conserves the discrete field energy") {
    CpmlParams cp;
    auto g = make_grid(40, 40, 40, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp);
    g.sources.push_back({FieldComp::ez, 20, 20, 20, 1.0});
    g.waveform = gaussian_pulse(15.0 * g.dt, 75.0 * g.dt);

    auto s = make_state(g);
    CHECK_THROWS_AS(field_energy(g, s), DomainError);
    for (int n = 0; n < 160; ++n) step(g, s);
    g.waveform = nullptr;
    s.track_energy = true;
    step(g, s);
    const double u0 = field_energy(g, s);
    REQUIRE(u0 > 0.0);
    double lo = u0, hi = u0;
    for (int block = 0; block < 20; ++block) {
        for (int n = 0; n < 50; ++n) step(g, s);
        const double u = field_energy(g, s);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    // The leapfrog conserves this quantity exactly; the bound is rounding
    // noise (measured ~8e-14 over these 1000 steps) with wide headroom.
    CHECK((hi - lo) / u0 < 1e-12);
}

TEST_CASE("half-wave feed sees the textbook resistance in free space") {
    PropertyMaps vacuum;
    DipoleSource src;
    src.band = Band::f3000MHz;
    GridConfig gc;
    gc.delta_mm = 2.0;
    Simulation sim = build_simulation(vacuum, src, gc);
    CHECK(sim.grid.dipole_cells == 23);
    CHECK(sim.grid.has_feed);

    SteadyStateConfig sc;
    PhasorField pf = run_to_steady_state(sim.grid, sim.state, sc);
    const FeedMetrics fm = feed_metrics(pf);
    CHECK(fm.impedance.real() > 73.0 * 0.85);
    CHECK(fm.impedance.real() < 73.0 * 1.15);
    REQUIRE(fm.accepted_power_w > 0.0);

    const double rad = poynting_box_power(sim.grid, pf, 12);
    CHECK(std::fabs(rad - fm.accepted_power_w) <= 0.05 * fm.accepted_power_w);

    CHECK(sim.state.trace.front().step == 1);
    CHECK(sim.state.trace.size() ==
          static_cast<std::size_t>(pf.periods) * sim.grid.steps_per_period);

    PhasorField unit = normalize_to_power(pf, 1.0);
    CHECK(unit.accepted_power_w == doctest::Approx(1.0).epsilon(1e-12));
    const double ratio = std::abs(unit.feed_v) / std::abs(pf.feed_v);
    CHECK(std::abs(unit.feed_v / unit.feed_i - pf.feed_v / pf.feed_i) < 1e-9);
    CHECK(ratio == doctest::Approx(std::sqrt(1.0 / fm.accepted_power_w)).epsilon(1e-12));
}

TEST_CASE("doubling the drive current scales every phasor exactly") {
    PropertyMaps vacuum;
    GridConfig gc;
    gc.delta_mm = 2.0;
    gc.margin_cells = 8;
    SteadyStateConfig sc;

    DipoleSource one;
    one.band = Band::f3000MHz;
    DipoleSource two = one;
    two.amplitude = 2.0;

    Simulation sa = build_simulation(vacuum, one, gc);
    PhasorField pa = run_to_steady_state(sa.grid, sa.state, sc);
    Simulation sb = build_simulation(vacuum, two, gc);
    PhasorField pb = run_to_steady_state(sb.grid, sb.state, sc);

    CHECK(pb.feed_v == 2.0 * pa.feed_v);
    CHECK(pb.feed_i == 2.0 * pa.feed_i);
    CHECK(pb.accepted_power_w == 4.0 * pa.accepted_power_w);
    const FeedMetrics ma = feed_metrics(pa);
    const FeedMetrics mb = feed_metrics(pb);
    CHECK(ma.impedance == mb.impedance);
    REQUIRE(pa.ez_edge.size() == pb.ez_edge.size());
    for (std::size_t i = 0; i < pa.ez_edge.size(); i += 97)
        CHECK(pb.ez_edge[i] == 2.0 * pa.ez_edge[i]);
}

TEST_CASE("identical runs produce identical traces") {
    PropertyMaps vacuum;
    GridConfig gc;
    gc.delta_mm = 2.0;
    gc.margin_cells = 8;
    DipoleSource src;
    src.band = Band::f3000MHz;
    SteadyStateConfig sc;

    Simulation s1 = build_simulation(vacuum, src, gc);
    PhasorField p1 = run_to_steady_state(s1.grid, s1.state, sc);
    Simulation s2 = build_simulation(vacuum, src, gc);
    PhasorField p2 = run_to_steady_state(s2.grid, s2.state, sc);

    CHECK(p1.periods == p2.periods);
    REQUIRE(s1.state.trace.size() == s2.state.trace.size());
    for (std::size_t n = 0; n < s1.state.trace.size(); ++n) {
        CHECK(s1.state.trace[n].v == s2.state.trace[n].v);
        CHECK(s1.state.trace[n].i == s2.state.trace[n].i);
    }
}

TEST_CASE("a silent source converges to zero phasors and a degenerate feed") {
    PropertyMaps vacuum;
    GridConfig gc;
    gc.delta_mm = 2.0;
    gc.margin_cells = 8;
    DipoleSource src;
    src.band = Band::f3000MHz;
    src.amplitude = 0.0;

    Simulation sim = build_simulation(vacuum, src, gc);
    SteadyStateConfig sc;
    PhasorField pf = run_to_steady_state(sim.grid, sim.state, sc);
    CHECK(pf.periods == sc.min_periods + 1);
    CHECK(std::abs(pf.feed_v) == 0.0);
    for (std::size_t i = 0; i < pf.ez_edge.size(); i += 31) CHECK(std::abs(pf.ez_edge[i]) == 0.0);
    CHECK_THROWS_AS(feed_metrics(pf), DomainError);
}

TEST_CASE("a shorted gap reads back as a degenerate feed") {
    PropertyMaps vacuum;
    GridConfig gc;
    gc.delta_mm = 2.0;
    gc.margin_cells = 8;
    DipoleSource src;
    src.band = Band::f3000MHz;

    Simulation sim = build_simulation(vacuum, src, gc);
    SimulationGrid& g = sim.grid;
    g.ca_ez(g.feed_i, g.feed_j, g.feed_k) = 0.0;
    g.cb_ez(g.feed_i, g.feed_j, g.feed_k) = 0.0;
    SteadyStateConfig sc;
    PhasorField pf = run_to_steady_state(g, sim.state, sc);
    CHECK(std::abs(pf.feed_v) == 0.0);
    CHECK_THROWS_AS(feed_metrics(pf), DomainError);
}

TEST_CASE("steady state reports non-convergence with the amplitude trail") {
    PropertyMaps vacuum;
    GridConfig gc;
    gc.delta_mm = 2.0;
    gc.margin_cells = 8;
    DipoleSource src;
    src.band = Band::f3000MHz;

    Simulation sim = build_simulation(vacuum, src, gc);
    SteadyStateConfig sc;
    sc.min_periods = 2;
    sc.max_periods = 2; // still inside the drive ramp
    sc.tol = 1e-12;
    try {
        run_to_steady_state(sim.grid, sim.state, sc);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(std::string(e.what()).find("periods") != std::string::npos);
    }

    auto g0 = make_grid(8, 8, 8, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec,
                        CpmlParams{});
    auto s0 = make_state(g0);
    CHECK_THROWS_AS(run_to_steady_state(g0, s0, SteadyStateConfig{}), DomainError);
}

TEST_CASE("non-finite fields stop the run with the step index") {
    PropertyMaps vacuum;
    GridConfig gc;
    gc.delta_mm = 2.0;
    gc.margin_cells = 8;
    DipoleSource src;
    src.band = Band::f3000MHz;

    Simulation sim = build_simulation(vacuum, src, gc);
    sim.state.ez(sim.grid.feed_i, sim.grid.feed_j, sim.grid.feed_k) =
        std::numeric_limits<double>::quiet_NaN();
    try {
        step(sim.grid, sim.state);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }

    Simulation sim2 = build_simulation(vacuum, src, gc);
    sim2.state.ex(1, 1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(run_to_steady_state(sim2.grid, sim2.state, SteadyStateConfig{}),
                    NumericError);
}

TEST_CASE("antenna sits at the standoff distance off the widest tissue column") {
    LabelVolume lv = sphere_labels(50, 18.0, 11);
    PropertyMaps maps = assign_properties(lv, Band::f900MHz);
    DipoleSource src;
    src.band = Band::f900MHz;
    src.standoff_mm = 20.0;
    GridConfig gc;
    gc.delta_mm = 2.0;

    Simulation sim = build_simulation(maps, src, gc);
    const SimulationGrid& g = sim.grid;
    CHECK(g.dipole_cells == 79);
    CHECK(g.head_x0 == 30);
    CHECK(g.head_nx == 25);

    // recompute the placement from the embedded density map
    std::size_t z0 = g.nz, z1 = 0, y0 = g.ny, y1 = 0;
    for (std::size_t z = 0; z < g.nz; ++z)
        for (std::size_t y = 0; y < g.ny; ++y)
            for (std::size_t x = 0; x < g.nx; ++x)
                if (g.rho_cell(x, y, z) > 0) {
                    z0 = std::min(z0, z);
                    z1 = std::max(z1, z);
                    y0 = std::min(y0, y);
                    y1 = std::max(y1, y);
                }
    REQUIRE(z1 >= z0);
    CHECK(g.feed_k == (z0 + z1) / 2);
    CHECK(g.feed_j == (y0 + y1 + 1) / 2);

    std::size_t x_surf = 0;
    for (std::size_t z = g.feed_k - 1; z <= g.feed_k + 1; ++z)
        for (std::size_t y = 0; y < g.ny; ++y)
            for (std::size_t x = 0; x < g.nx; ++x)
                if (g.rho_cell(x, y, z) > 0) x_surf = std::max(x_surf, x);
    CHECK(g.feed_i == x_surf + 1 + 10); // 20 mm over 2 mm cells

    // the gap edge and both arms run through air
    CHECK(g.rho_cell(g.feed_i, g.feed_j, g.feed_k) == 0.0);
    CHECK(g.pec_ez.size() == g.dipole_cells - 1);
}

TEST_CASE("map and source band disagreement is rejected") {
    LabelVolume lv = sphere_labels(20, 6.0, 11);
    PropertyMaps maps = assign_properties(lv, Band::f900MHz);
    DipoleSource src;
    src.band = Band::f1800MHz;
    CHECK_THROWS_AS(build_simulation(maps, src, GridConfig{}), DomainError);
}

TEST_CASE("maps without tissue are rejected") {
    PropertyMaps maps;
    maps.sigma = GridD(6, 6, 6, 0.0);
    maps.epsilon = GridD(6, 6, 6, 1.0);
    maps.rho = GridD(6, 6, 6, 0.0);
    maps.band = Band::f900MHz;
    DipoleSource src;
    src.band = Band::f900MHz;
    CHECK_THROWS_AS(build_simulation(maps, src, GridConfig{}), DomainError);
}

TEST_CASE("oversized domains are reported instead of allocated") {
    LabelVolume lv = sphere_labels(50, 18.0, 11);
    PropertyMaps maps = assign_properties(lv, Band::f900MHz);
    DipoleSource src;
    src.band = Band::f900MHz;
    GridConfig gc;
    gc.delta_mm = 2.0;
    gc.max_cells_per_axis = 60;
    try {
        build_simulation(maps, src, gc);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("exceeds") != std::string::npos);
    }
}

TEST_CASE("exposure pipeline balances feed, flux, and dissipation") {
    LabelVolume lv = sphere_labels(50, 18.0, 11);
    PropertyMaps maps = assign_properties(lv, Band::f3000MHz);
    DipoleSource src;
    src.band = Band::f3000MHz;
    src.standoff_mm = 20.0;
    ExposureConfig ec;
    ec.grid.delta_mm = 2.0;
    ec.grid.margin_cells = 12;
    ec.power_w = 1.0;

    ExposureResult res = simulate_dipole_exposure(maps, src, ec);
    CHECK(res.maps.sigma.nx() == 25);
    CHECK(res.maps.sigma.ny() == 25);
    CHECK(res.maps.sigma.nz() == 25);
    CHECK(res.phasors.ex.same_shape(res.maps.sigma));
    CHECK(res.maps.voxel_size_mm == 2.0);
    CHECK(res.phasors.accepted_power_w == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.raw_accepted_w > 0.0);
    CHECK(res.impedance.real() > 0.0);
    CHECK(res.periods >= 6);
    CHECK(res.trace.size() ==
          static_cast<std::size_t>(res.periods) * res.steps_per_period);

    // everything the feed accepts either leaves the box or heats the sphere
    CHECK(res.absorbed_power_w > 0.05);
    CHECK(res.radiated_power_w > 0.0);
    CHECK(std::fabs(res.absorbed_power_w + res.radiated_power_w - 1.0) < 0.08);

    // the field reaches the middle of the sphere
    const std::size_t c = 12;
    CHECK(res.maps.rho(c, c, c) > 0.0);
    const double e2 = std::norm(res.phasors.ex(c, c, c)) + std::norm(res.phasors.ey(c, c, c)) +
                      std::norm(res.phasors.ez(c, c, c));
    CHECK(e2 > 0.0);
}

TEST_CASE("flux box rejects cropped phasors and hollow insets") {
    CpmlParams cp;
    auto g = make_grid(30, 30, 30, 1.0, 0.0, AxisMode::pec, AxisMode::pec, AxisMode::pec, cp);
    PhasorField no_edges; // as handed out after cropping
    CHECK_THROWS_AS(poynting_box_power(g, no_edges, 2), DomainError);

    PhasorField pf;
    pf.ex_edge = GridC(30, 31, 31);
    pf.ey_edge = GridC(31, 30, 31);
    pf.ez_edge = GridC(31, 31, 30);
    pf.hx_edge = GridC(31, 30, 30);
    pf.hy_edge = GridC(30, 31, 30);
    pf.hz_edge = GridC(30, 30, 31);
    CHECK_THROWS_AS(poynting_box_power(g, pf, 14), DomainError);
    CHECK(poynting_box_power(g, pf, 5) == 0.0);
}
