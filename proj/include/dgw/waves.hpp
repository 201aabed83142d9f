#pragma once

// Water-wave operator F(U,mu,u), dispersion/resonance analysis, the formal
// Fredholm pseudo-inverse of the linearization at rest, and the explicit
// diamond-wave bifurcation expansion with its printed coefficients.

#include <array>
#include <optional>
#include <string>

#include "dgw/dno.hpp"
#include "dgw/lattice.hpp"

namespace dgw {

struct StateU {
    SpectralField psi;  // zero mean; diamond class (odd x1, even x2)
    SpectralField eta;  // diamond class (even, even)
    StateU() = default;
    StateU(SpectralField p, SpectralField e) : psi(std::move(p)), eta(std::move(e)) {}
    StateU& operator+=(const StateU& o) {
        psi += o.psi;
        eta += o.eta;
        return *this;
    }
    StateU& operator*=(double a) {
        psi *= a;
        eta *= a;
        return *this;
    }
};

struct Params {
    double mu = 1.0;                      // gL/c^2
    double tau = 1.0;
    std::array<double, 2> u_dir{1.0, 0.0};  // unit propagation direction
    double epsilon = 0.0;
    void validate() const;
};

// tau with exact tau^2 = p/q when known (covers "a/b" and "sqrt(a/b)" input)
struct TauValue {
    double value = 1.0;
    bool exact = false;
    long long p = 1, q = 1;  // tau^2 = p/q in lowest terms
    static TauValue from_double(double t);
    static TauValue rational(long long num, long long den);
    static TauValue sqrt_rational(long long num, long long den);
    static TauValue parse(const std::string& text);
};

// Delta(K, mu, u) = mu |K| - (K.u)^2
double dispersion(double kx, double ky, double mu, std::array<double, 2> u);

struct ResonanceReport {
    double tau = 0.0;
    double mu_c = 0.0;
    int search_radius = 0;
    bool exact_arithmetic = false;
    std::vector<std::array<long long, 2>> solutions;  // (n,m) != (1,1)
    bool is_simple = true;
};

// scan n in [1, radius] of n^2 + tau^2 m^2 = (1+tau^2) n^4 for integer m;
// exact rational arithmetic when tau^2 is rational, else float with
// tolerance 1e-9 n^4
ResonanceReport resonance_search(const TauValue& tau, int radius);

// (F1, F2) of the operator equations, products evaluated pointwise on grid
std::pair<SpectralField, SpectralField> evaluate_F(const StateU& U, const Params& p,
                                                   DnMode mode,
                                                   const DnOracleConfig* cfg = nullptr);

// quadratic and cubic terms of F at the origin (u = u0, mu = mu_c):
// 2 N2(U,V) = (G1{eta1}psi2 + G1{eta2}psi1,
//              grad psi1.grad psi2 - d1 eta1 d1 eta2)
StateU n2_bilinear(const StateU& a, const StateU& b);
// N3(U,U,U) = (G2{eta,eta}psi, -d1 eta (grad eta . grad psi))
StateU n3_cubic(const StateU& u);

// L0 U = (G0 psi - d1 eta, d1 psi + mu_c eta)
StateU apply_L0(const StateU& u, double mu_c);

struct PseudoInverseError : std::runtime_error {
    std::array<double, 4> kernel_residuals;  // projections on zeta0, conj, zeta1, conj
    explicit PseudoInverseError(const std::string& what, std::array<double, 4> r)
        : std::runtime_error(what), kernel_residuals(r) {}
};

// unique preimage of L0 orthogonal to the 4-dim kernel; requires the four
// compatibility projections to vanish to tol_rel * |F|
StateU lin_pseudo_inverse(const SpectralField& f, const SpectralField& g,
                          double tau, double tol_rel = 1e-9);

struct BifurcationCoeffs {
    double tau = 0, mu_c = 0;
    double alpha0 = 0, beta0 = 0, mu1 = 0, nu1 = 0;
};
// printed closed forms; mu1 and nu1 are cross-checked against their second
// printed expressions to 1e-12
BifurcationCoeffs bifurcation_coeffs(double tau);

struct ExpansionSeries {
    LatticePtr lat;
    double tau = 0, mu_c = 0, mu1 = 0;
    int order = 0;
    std::vector<StateU> orders;     // U^(1), U^(2), U^(3)
    BifurcationCoeffs coeffs;
    double mu1_solvability = 0.0;   // from the order-3 compatibility condition

    StateU state(double eps) const;
    double mu_of(double eps) const { return mu_c + eps * eps * mu1; }
};

// orders 1 and 2 from the printed closed forms; order 3 by one further
// Lyapunov-Schmidt step (G0..G2 only), with mu1 fixed by solvability
ExpansionSeries diamond_expansion(const TauValue& tau, int N, LatticePtr lat);

struct PatternGrid {
    Grid eta;
    double tau = 0, epsilon = 0;
    double global_max = 0;                    // max |eta|
    double nodal_max = 0;                     // max |eta| on x2 = pi/(2 tau)
    std::vector<std::array<double, 2>> crests;   // maxima locations in the cell
    std::vector<std::array<double, 2>> troughs;  // minima locations
};
PatternGrid pattern_grid(const ExpansionSeries& series, double eps, int resolution);

}  // namespace dgw
