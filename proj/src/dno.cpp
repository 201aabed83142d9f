#include "dgw/dno.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace dgw {

namespace {

SpectralField laplacian(const SpectralField& f) {
    const auto& lat = f.lattice();
    return multiplier(f, [&lat](int m1, int m2) {
        double k = lat.kabs(m1, m2);
        return cplx(-k * k, 0.0);
    });
}

// all modes of f as (m1, m2, coeff) including the implied conjugates
struct ModeList {
    std::vector<int> m1, m2;
    std::vector<cplx> c;
};

ModeList full_modes(const SpectralField& f) {
    const auto& lat = f.lattice();
    ModeList L;
    for (int s = 0; s < lat.nmodes(); ++s) {
        int a = lat.modes[s][0], b = lat.modes[s][1];
        cplx v = f.raw()[s];
        if (v == cplx(0, 0)) continue;
        L.m1.push_back(a);
        L.m2.push_back(b);
        L.c.push_back(v);
        if (!(a == 0 && b == 0)) {
            L.m1.push_back(-a);
            L.m2.push_back(-b);
            L.c.push_back(std::conj(v));
        }
    }
    return L;
}

}  // namespace

SpectralField g0(const SpectralField& psi) { return g0_flat(psi); }

SpectralField g1(const SpectralField& eta, const SpectralField& psi) {
    // -G0(eta G0 psi) - div(eta grad psi)
    SpectralField t1 = g0_flat(multiply(eta, g0_flat(psi)));
    SpectralField t2 = d_x1(multiply(eta, d_x1(psi)));
    t2 += d_x2(multiply(eta, d_x2(psi)));
    SpectralField out = t1;
    out *= -1.0;
    out -= t2;
    return out;
}

SpectralField g1_kernel(const SpectralField& eta, const SpectralField& psi) {
    const auto& lat = psi.lattice();
    auto le = full_modes(eta);
    auto lp = full_modes(psi);
    SpectralField out(psi.lattice_ptr());
    double tau = lat.tau;
    for (size_t i = 0; i < lp.c.size(); ++i) {
        double K1x = lp.m1[i], K1y = tau * lp.m2[i];
        double aK1 = std::hypot(K1x, K1y);
        for (size_t j = 0; j < le.c.size(); ++j) {
            int M1 = lp.m1[i] + le.m1[j], M2 = lp.m2[i] + le.m2[j];
            auto [s, cj] = lat.slot(M1, M2);
            if (s < 0 || cj) continue;  // -K contributions are implied by reality
            double Kx = M1, Ky = tau * M2;
            double aK = std::hypot(Kx, Ky);
            double ker = (Kx * K1x + Ky * K1y) - aK * aK1;
            out.raw()[s] += ker * lp.c[i] * le.c[j];
        }
    }
    for (int s = 0; s < lat.nmodes(); ++s)
        if (lat.modes[s][0] == 0 && lat.modes[s][1] == 0)
            out.raw()[s] = cplx(out.raw()[s].real(), 0.0);
    return out;
}

SpectralField g2_bilinear(const SpectralField& eta1, const SpectralField& eta2,
                          const SpectralField& psi) {
    // symmetrization of G0(e1 G0(e2 G0 psi)) + 1/2 G0(e1 e2 Lap psi)
    //                  + 1/2 Lap(e1 e2 G0 psi)
    SpectralField a = g0_flat(multiply(eta1, g0_flat(multiply(eta2, g0_flat(psi)))));
    SpectralField b = g0_flat(multiply(eta2, g0_flat(multiply(eta1, g0_flat(psi)))));
    SpectralField ee = multiply(eta1, eta2);
    SpectralField c = g0_flat(multiply(ee, laplacian(psi)));
    SpectralField d = laplacian(multiply(ee, g0_flat(psi)));
    SpectralField out = a;
    out += b;
    out *= 0.5;
    SpectralField rest = c;
    rest += d;
    rest *= 0.5;
    out += rest;
    return out;
}

SpectralField g2(const SpectralField& eta, const SpectralField& psi) {
    return g2_bilinear(eta, eta, psi);
}

SpectralField g2_kernel(const SpectralField& eta, const SpectralField& psi) {
    const auto& lat = psi.lattice();
    if (lat.trunc > 6)
        throw std::invalid_argument("g2_kernel: O(n^3) path restricted to M <= 6");
    auto le = full_modes(eta);
    auto lp = full_modes(psi);
    SpectralField out(psi.lattice_ptr());
    double tau = lat.tau;
    auto absk = [tau](int a, int b) { return std::hypot(double(a), tau * b); };
    for (size_t i = 0; i < lp.c.size(); ++i) {
        double aK1 = absk(lp.m1[i], lp.m2[i]);
        for (size_t j = 0; j < le.c.size(); ++j)
            for (size_t l = 0; l < le.c.size(); ++l) {
                int M1 = lp.m1[i] + le.m1[j] + le.m1[l];
                int M2 = lp.m2[i] + le.m2[j] + le.m2[l];
                auto [s, cj] = lat.slot(M1, M2);
                if (s < 0 || cj) continue;
                double aK = absk(M1, M2);
                double a12 = absk(lp.m1[i] + le.m1[j], lp.m2[i] + le.m2[j]);
                double a13 = absk(lp.m1[i] + le.m1[l], lp.m2[i] + le.m2[l]);
                double ker = 0.5 * aK * aK1 * (a12 + a13 - aK - aK1);
                out.raw()[s] += ker * lp.c[i] * le.c[j] * le.c[l];
            }
    }
    for (int s = 0; s < lat.nmodes(); ++s)
        if (lat.modes[s][0] == 0 && lat.modes[s][1] == 0)
            out.raw()[s] = cplx(out.raw()[s].real(), 0.0);
    return out;
}

SpectralField dn_taylor(const SpectralField& eta, const SpectralField& psi, int order) {
    if (order < 0 || order > 2)
        throw std::invalid_argument("dn_taylor: order must be 0, 1 or 2");
    SpectralField out = g0_flat(psi);
    if (order >= 1) out += g1(eta, psi);
    if (order >= 2) out += g2(eta, psi);
    return out;
}

void DnOracleConfig::validate() const {
    if (depth < 4.0) throw std::invalid_argument("DnOracleConfig: depth must be >= 4");
    if (ns < 32) throw std::invalid_argument("DnOracleConfig: ns must be >= 32");
    if (!(solver_tol > 0)) throw std::invalid_argument("DnOracleConfig: solver_tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("DnOracleConfig: max_iter must be >= 1");
}

namespace {

// Chebyshev collocation on s in [-depth, 0]; node 0 is the top (s=0).
// The flat half-space decay condition theta_s = |k| theta is imposed exactly
// at the bottom, so the flat problem is solved to spectral accuracy and the
// artificial-bottom error is O(eta * exp(-2|k| depth)).
struct ChebStrip {
    int N;                              // polynomial degree; N+1 nodes
    double depth;
    std::vector<double> s;              // node positions, s[0]=0, s[N]=-depth
    std::vector<double> D;              // (N+1)^2 differentiation matrix d/ds
    ChebStrip(int n, double d) : N(n), depth(d), s(n + 1), D(size_t(n + 1) * (n + 1)) {
        std::vector<double> x(N + 1), c(N + 1, 1.0);
        for (int i = 0; i <= N; ++i) {
            x[i] = std::cos(M_PI * i / N);
            s[i] = 0.5 * depth * (x[i] - 1.0);
        }
        c[0] = c[N] = 2.0;
        for (int i = 0; i <= N; ++i)
            for (int j = 0; j <= N; ++j) {
                if (i == j) continue;
                double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
                D[size_t(i) * (N + 1) + j] = c[i] / c[j] * sign / (x[i] - x[j]);
            }
        for (int i = 0; i <= N; ++i) {
            double acc = 0.0;
            for (int j = 0; j <= N; ++j)
                if (j != i) acc += D[size_t(i) * (N + 1) + j];
            D[size_t(i) * (N + 1) + i] = -acc;
        }
        double scale = 2.0 / depth;  // ds = depth/2 dx
        for (auto& v : D) v *= scale;
    }
};

// dense LU with partial pivoting for the per-mode vertical operator
struct LU {
    int n = 0;
    std::vector<double> a;
    std::vector<int> piv;
    void factor(std::vector<double> m, int dim) {
        n = dim;
        a = std::move(m);
        piv.resize(n);
        for (int k = 0; k < n; ++k) {
            int p = k;
            for (int i = k + 1; i < n; ++i)
                if (std::abs(a[size_t(i) * n + k]) > std::abs(a[size_t(p) * n + k])) p = i;
            piv[k] = p;
            if (p != k)
                for (int j = 0; j < n; ++j)
                    std::swap(a[size_t(k) * n + j], a[size_t(p) * n + j]);
            double d = a[size_t(k) * n + k];
            if (d == 0.0) throw std::runtime_error("dn_oracle: singular vertical operator");
            for (int i = k + 1; i < n; ++i) {
                double f = a[size_t(i) * n + k] / d;
                a[size_t(i) * n + k] = f;
                for (int j = k + 1; j < n; ++j)
                    a[size_t(i) * n + j] -= f * a[size_t(k) * n + j];
            }
        }
    }
    void solve(cplx* b) const {
        // the stored factors refer to the fully permuted matrix PA = LU, so
        // the whole interchange sequence applies before substitution
        for (int k = 0; k < n; ++k)
            if (piv[k] != k) std::swap(b[k], b[piv[k]]);
        for (int k = 0; k < n; ++k)
            for (int i = k + 1; i < n; ++i) b[i] -= a[size_t(i) * n + k] * b[k];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) b[i] -= a[size_t(i) * n + j] * b[j];
            b[i] /= a[size_t(i) * n + i];
        }
    }
};

struct FftPlan2D {
    fftw_plan fwd = nullptr, bwd = nullptr;
    int n1, n2;
    std::vector<cplx> probe;
    FftPlan2D(int a, int b) : n1(a), n2(b), probe(size_t(a) * b) {
        auto* p = reinterpret_cast<fftw_complex*>(probe.data());
        static std::mutex mtx;
        std::lock_guard<std::mutex> lock(mtx);
        fwd = fftw_plan_dft_2d(n1, n2, p, p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd = fftw_plan_dft_2d(n1, n2, p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    ~FftPlan2D() {
        static std::mutex mtx;
        std::lock_guard<std::mutex> lock(mtx);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    void run(std::vector<cplx>& a, bool forward) const {
        auto* p = reinterpret_cast<fftw_complex*>(a.data());
        fftw_execute_dft(forward ? fwd : bwd, p, p);
        if (forward) {
            double sc = 1.0 / (double(n1) * n2);
            for (auto& z : a) z *= sc;
        }
    }
};

}  // namespace

namespace {

// oracle core: Dirichlet data given as raw grid values (full FFT content);
// returns the boundary flux grid (1+|grad eta|^2) theta_s|_0 - grad eta.grad psi
Grid dn_oracle_grid(const SpectralField& eta, const Grid& psi_grid,
                    const DnOracleConfig& cfg, OracleReport* report) {
    cfg.validate();
    const auto lat = eta.lattice_ptr();
    const int n1 = lat->n1, n2 = lat->n2;
    if (psi_grid.n1 != n1 || psi_grid.n2 != n2)
        throw std::invalid_argument("dn_oracle: grid shape mismatch");
    const size_t nb = size_t(n1) * n2;
    const int N = cfg.ns;
    ChebStrip ch(N, cfg.depth);
    FftPlan2D fft(n1, n2);

    // |k| per FFT bin
    std::vector<double> kabs(nb);
    for (int j1 = 0; j1 < n1; ++j1)
        for (int j2 = 0; j2 < n2; ++j2) {
            int f1 = (j1 <= n1 / 2) ? j1 : j1 - n1;
            int f2 = (j2 <= n2 / 2) ? j2 : j2 - n2;
            kabs[size_t(j1) * n2 + j2] = std::hypot(double(f1), lat->tau * f2);
        }

    // LU factors per distinct |k| (rows: Dirichlet top, interior equation,
    // decay Robin bottom)
    std::map<long long, LU> lus;
    auto lu_for = [&](double k) -> const LU& {
        long long key = llround(k * 1e9);
        auto it = lus.find(key);
        if (it != lus.end()) return it->second;
        int dim = N + 1;
        std::vector<double> m(size_t(dim) * dim, 0.0);
        for (int j = 0; j < dim; ++j) m[j] = 0.0;
        m[0] = 1.0;  // theta(0) = top
        for (int i = 1; i < N; ++i) {
            for (int j = 0; j < dim; ++j) {
                double d2 = 0.0;
                for (int l = 0; l < dim; ++l)
                    d2 += ch.D[size_t(i) * dim + l] * ch.D[size_t(l) * dim + j];
                m[size_t(i) * dim + j] = d2;
            }
            m[size_t(i) * dim + i] -= k * k;
        }
        for (int j = 0; j < dim; ++j)
            m[size_t(N) * dim + j] = ch.D[size_t(N) * dim + j];
        m[size_t(N) * dim + N] -= k;  // theta_s - |k| theta = 0 at bottom
        LU lu;
        lu.factor(std::move(m), dim);
        return lus.emplace(key, std::move(lu)).first->second;
    };

    // geometry grids
    Grid gex = inverse_transform(d_x1(eta));
    Grid gey = inverse_transform(d_x2(eta));
    Grid gel = inverse_transform(laplacian(eta));
    std::vector<double> grad2(nb);
    double grad2max = 0.0;
    for (size_t i = 0; i < nb; ++i) {
        grad2[i] = gex.v[i] * gex.v[i] + gey.v[i] * gey.v[i];
        grad2max = std::max(grad2max, grad2[i]);
    }
    if (grad2max > 0.5)
        throw std::runtime_error("dn_oracle: |grad eta|^2 too large for the flattened solve");

    // top Dirichlet data per bin
    std::vector<cplx> top(nb);
    for (size_t i = 0; i < nb; ++i) top[i] = psi_grid.v[i];
    fft.run(top, true);

    const int dim = N + 1;
    // theta[level][bin] spectral-in-X representation
    std::vector<std::vector<cplx>> theta(dim, std::vector<cplx>(nb, cplx(0, 0)));
    std::vector<std::vector<cplx>> rhs(dim, std::vector<cplx>(nb, cplx(0, 0)));
    std::vector<cplx> col(dim);

    auto solve_all = [&]() {
        for (size_t b = 0; b < nb; ++b) {
            col[0] = top[b];
            for (int i = 1; i < N; ++i) col[i] = rhs[i][b];
            col[N] = 0.0;
            lu_for(kabs[b]).solve(col.data());
            for (int i = 0; i < dim; ++i) theta[i][b] = col[i];
        }
    };
    solve_all();

    double base = 0.0;
    for (const auto& row : theta)
        for (const auto& z : row) base += std::norm(z);
    base = std::sqrt(std::max(base, 1e-300));

    std::vector<std::vector<cplx>> ts(dim, std::vector<cplx>(nb)),
        tss(dim, std::vector<cplx>(nb));
    bool converged = false;
    int it = 0;
    for (it = 1; it <= cfg.max_iter; ++it) {
        // vertical derivatives via the differentiation matrix
        for (int i = 0; i < dim; ++i)
            for (size_t b = 0; b < nb; ++b) {
                cplx a1(0, 0);
                for (int l = 0; l < dim; ++l) a1 += ch.D[size_t(i) * dim + l] * theta[l][b];
                ts[i][b] = a1;
            }
        for (int i = 0; i < dim; ++i)
            for (size_t b = 0; b < nb; ++b) {
                cplx a2(0, 0);
                for (int l = 0; l < dim; ++l) a2 += ch.D[size_t(i) * dim + l] * ts[l][b];
                tss[i][b] = a2;
            }
        // rhs rows (interior only used): 2 grad eta . grad ts + ts lap eta
        //                                - tss |grad eta|^2
        std::vector<cplx> dx(nb), dy(nb), tsp(nb), tssp(nb);
        for (int i = 1; i < N; ++i) {
            for (int j1 = 0; j1 < n1; ++j1)
                for (int j2 = 0; j2 < n2; ++j2) {
                    size_t b = size_t(j1) * n2 + j2;
                    int f1 = (j1 <= n1 / 2) ? j1 : j1 - n1;
                    int f2 = (j2 <= n2 / 2) ? j2 : j2 - n2;
                    dx[b] = cplx(0, f1) * ts[i][b];
                    dy[b] = cplx(0, lat->tau * f2) * ts[i][b];
                    tsp[b] = ts[i][b];
                    tssp[b] = tss[i][b];
                }
            fft.run(dx, false);
            fft.run(dy, false);
            fft.run(tsp, false);
            fft.run(tssp, false);
            for (size_t b = 0; b < nb; ++b)
                dx[b] = 2.0 * (gex.v[b] * dx[b] + gey.v[b] * dy[b]) +
                        gel.v[b] * tsp[b] - grad2[b] * tssp[b];
            fft.run(dx, true);
            rhs[i] = dx;
        }
        auto prev = theta;
        solve_all();
        double diff = 0.0;
        for (int i = 0; i < dim; ++i)
            for (size_t b = 0; b < nb; ++b) diff += std::norm(theta[i][b] - prev[i][b]);
        diff = std::sqrt(diff) / base;
        if (report) report->residuals.emplace_back(it, diff);
        if (diff < cfg.solver_tol) {
            converged = true;
            break;
        }
    }
    if (report) {
        report->iterations = it;
        report->converged = converged;
    }
    if (!converged)
        throw std::runtime_error("dn_oracle: fixed-point iteration did not reach tol " +
                                 std::to_string(cfg.solver_tol) + " within " +
                                 std::to_string(cfg.max_iter) + " iterations");

    // G_eta psi = (1+|grad eta|^2) theta_s|_0 - grad eta . grad psi
    std::vector<cplx> tstop(nb);
    for (size_t b = 0; b < nb; ++b) {
        cplx a1(0, 0);
        for (int l = 0; l < dim; ++l) a1 += ch.D[l] * theta[l][b];
        tstop[b] = a1;
    }
    fft.run(tstop, false);
    // grad psi from the full FFT content of the top data
    std::vector<cplx> px(nb), py(nb);
    for (int j1 = 0; j1 < n1; ++j1)
        for (int j2 = 0; j2 < n2; ++j2) {
            size_t b = size_t(j1) * n2 + j2;
            int f1 = (j1 <= n1 / 2) ? j1 : j1 - n1;
            int f2 = (j2 <= n2 / 2) ? j2 : j2 - n2;
            px[b] = cplx(0, f1) * top[b];
            py[b] = cplx(0, lat->tau * f2) * top[b];
        }
    fft.run(px, false);
    fft.run(py, false);
    Grid out(n1, n2);
    for (size_t b = 0; b < nb; ++b)
        out.v[b] = (1.0 + grad2[b]) * tstop[b].real() -
                   (gex.v[b] * px[b].real() + gey.v[b] * py[b].real());
    return out;
}

}  // namespace

SpectralField dn_oracle(const SpectralField& eta, const SpectralField& psi,
                        const DnOracleConfig& cfg, OracleReport* report) {
    Grid out = dn_oracle_grid(eta, inverse_transform(psi), cfg, report);
    return transform(out, psi.lattice_ptr());
}

SpectralField dn_apply(const SpectralField& eta, const SpectralField& psi,
                       DnMode mode, const DnOracleConfig* cfg) {
    if (mode == DnMode::taylor2) return dn_taylor(eta, psi, 2);
    DnOracleConfig c = cfg ? *cfg : DnOracleConfig{};
    return dn_oracle(eta, psi, c);
}

SpectralField dn_differential(const SpectralField& eta, const SpectralField& psi,
                              const SpectralField& h, DnMode mode,
                              const DnOracleConfig* cfg) {
    auto lat = psi.lattice_ptr();
    DnOracleConfig c = cfg ? *cfg : DnOracleConfig{};
    Grid gex = inverse_transform(d_x1(eta)), gey = inverse_transform(d_x2(eta)),
         gpx = inverse_transform(d_x1(psi)), gpy = inverse_transform(d_x2(psi)),
         gh = inverse_transform(h);
    Grid gg = (mode == DnMode::oracle)
                  ? dn_oracle_grid(eta, inverse_transform(psi), c, nullptr)
                  : inverse_transform(dn_taylor(eta, psi, 2));
    // zeta = (G_eta psi + grad eta . grad psi) / (1 + |grad eta|^2)
    Grid hz(gg.n1, gg.n2), f1(gg.n1, gg.n2), f2(gg.n1, gg.n2);
    for (size_t i = 0; i < gg.v.size(); ++i) {
        double g2v = gex.v[i] * gex.v[i] + gey.v[i] * gey.v[i];
        double z = (gg.v[i] + gex.v[i] * gpx.v[i] + gey.v[i] * gpy.v[i]) / (1.0 + g2v);
        hz.v[i] = gh.v[i] * z;
        f1.v[i] = (z * gex.v[i] - gpx.v[i]) * gh.v[i];
        f2.v[i] = (z * gey.v[i] - gpy.v[i]) * gh.v[i];
    }
    SpectralField ghz;
    if (mode == DnMode::oracle) {
        double mean = 0.0;
        for (double v : hz.v) mean += v;
        mean /= double(hz.v.size());
        for (double& v : hz.v) v -= mean;  // G_eta annihilates constants
        ghz = transform(dn_oracle_grid(eta, hz, c, nullptr), lat);
    } else {
        SpectralField hzf = transform(hz, lat);
        hzf.remove_mean();
        ghz = dn_apply(eta, hzf, mode, cfg);
    }
    SpectralField out = d_x1(transform(f1, lat));
    out += d_x2(transform(f2, lat));
    out -= ghz;
    return out;
}

}  // namespace dgw
