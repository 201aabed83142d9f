#pragma once

// Bi-periodic Fourier lattice generated by K1=(1,tau), K2=(1,-tau):
// admissible wave vectors k=(m1, tau*m2) with m1+m2 even, truncated to
// |m1|,|m2| <= M.  Spectral fields store only representative coefficients
// (m1>0, or m1==0 and m2>=0); the opposite half is implied by reality,
// so real-valuedness cannot be broken by construction.

#include <array>
#include <complex>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgw {

using cplx = std::complex<double>;

enum class Parity { none, even, odd };

struct SymmetryClass {
    Parity x1 = Parity::none;
    Parity x2 = Parity::none;
};

inline Parity parity_mul(Parity a, Parity b) {
    if (a == Parity::none || b == Parity::none) return Parity::none;
    return (a == b) ? Parity::even : Parity::odd;
}

inline const SymmetryClass sym_ee{Parity::even, Parity::even};
inline const SymmetryClass sym_oe{Parity::odd, Parity::even};
inline const SymmetryClass sym_eo{Parity::even, Parity::odd};
inline const SymmetryClass sym_oo{Parity::odd, Parity::odd};
inline const SymmetryClass sym_none{};

struct LatticeSpec {
    double tau = 1.0;
    int trunc = 0;          // M
    int n1 = 0, n2 = 0;     // physical grid, x1 and x2 sampling counts
    bool parity = true;     // m1+m2 even constraint
    bool resonance_warning = false;  // tau equals l or 1/l for integer l

    // representative modes and index tables
    std::vector<std::array<int, 2>> modes;  // (m1,m2), m1>0 or (m1==0, m2>=0)
    std::vector<int> slot_table;            // (2M+1)^2 -> slot, or -2-slot for conj, or -1

    int nmodes() const { return static_cast<int>(modes.size()); }
    bool admissible(int m1, int m2) const {
        if (std::abs(m1) > trunc || std::abs(m2) > trunc) return false;
        return !parity || ((m1 + m2) % 2 == 0);
    }
    // slot lookup: returns {slot, conjugate?}; slot=-1 when out of range
    std::pair<int, bool> slot(int m1, int m2) const {
        if (std::abs(m1) > trunc || std::abs(m2) > trunc) return {-1, false};
        int s = slot_table[(m1 + trunc) * (2 * trunc + 1) + (m2 + trunc)];
        if (s == -1) return {-1, false};
        return (s >= 0) ? std::pair<int, bool>{s, false}
                        : std::pair<int, bool>{-2 - s, true};
    }
    // |k| = sqrt(m1^2 + tau^2 m2^2)
    double kabs(int m1, int m2) const {
        return std::sqrt(double(m1) * m1 + tau * tau * double(m2) * m2);
    }
    bool same_as(const LatticeSpec& o) const {
        return tau == o.tau && trunc == o.trunc && n1 == o.n1 && n2 == o.n2 &&
               parity == o.parity;
    }
};

using LatticePtr = std::shared_ptr<const LatticeSpec>;

// tau > 0, M >= 1, oversample >= 2; grid is FFT-friendly and large enough to
// dealias cubic products (n >= 2(2M+1)).
LatticePtr make_lattice(double tau, int M, int oversample = 4);
// variant without the m1+m2 parity constraint (utility / unit tests)
LatticePtr make_full_lattice(double tau, int M, int oversample = 4);

// real values on the n1 x n2 physical grid, row-major: v[i1*n2+i2],
// x1 = 2*pi*i1/n1, x2 = (2*pi/tau)*i2/n2
struct Grid {
    int n1 = 0, n2 = 0;
    std::vector<double> v;
    Grid() = default;
    Grid(int a, int b) : n1(a), n2(b), v(size_t(a) * b, 0.0) {}
    double& at(int i1, int i2) { return v[size_t(i1) * n2 + i2]; }
    double at(int i1, int i2) const { return v[size_t(i1) * n2 + i2]; }
};

class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(LatticePtr lat, SymmetryClass sym = sym_none)
        : lat_(std::move(lat)), sym_(sym), c_(lat_->nmodes(), cplx(0, 0)) {}

    const LatticeSpec& lattice() const { return *lat_; }
    LatticePtr lattice_ptr() const { return lat_; }
    SymmetryClass symmetry() const { return sym_; }
    void set_symmetry(SymmetryClass s) { sym_ = s; }

    cplx coeff(int m1, int m2) const {
        auto [s, cj] = lat_->slot(m1, m2);
        if (s < 0) return {0, 0};
        return cj ? std::conj(c_[s]) : c_[s];
    }
    // sets c(k) and, implicitly, c(-k)=conj
    void set_coeff(int m1, int m2, cplx v) {
        auto [s, cj] = lat_->slot(m1, m2);
        if (s < 0) throw std::invalid_argument("set_coeff: mode (" +
            std::to_string(m1) + "," + std::to_string(m2) + ") not admissible");
        c_[s] = cj ? std::conj(v) : v;
        if (lat_->modes[s][0] == 0 && lat_->modes[s][1] == 0)
            c_[s] = cplx(c_[s].real(), 0.0);
    }
    const std::vector<cplx>& raw() const { return c_; }
    std::vector<cplx>& raw() { return c_; }

    double mean() const { return coeff(0, 0).real(); }
    void remove_mean() { if (lat_->slot(0, 0).first >= 0) set_coeff(0, 0, 0.0); }

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double a);
    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double a, SpectralField f) { return f *= a; }

private:
    LatticePtr lat_;
    SymmetryClass sym_;
    std::vector<cplx> c_;
};

// ---- transforms ----------------------------------------------------------

struct TransformDiag {
    double leak_abs = 0.0;   // l2 norm of projected-out coefficients
    double input_norm = 0.0;
};

// forward: grid values -> truncated spectral coefficients (plain c_k with
// u = sum c_k exp(i k.X)); out-of-lattice content is measured then dropped
SpectralField transform(const Grid& g, LatticePtr lat, TransformDiag* diag = nullptr);
// inverse: exact evaluation of the truncated series on the lattice grid
Grid inverse_transform(const SpectralField& f);

// pointwise product computed on the (oversampled) grid, truncated back
SpectralField multiply(const SpectralField& a, const SpectralField& b);
// general pointwise operation on grids of the same lattice
Grid grid_apply(const std::vector<const SpectralField*>& fs,
                const std::function<double(const double*)>& op);

// coeff_out(k) = symbol(m1,m2) * coeff_in(k); symbol must satisfy
// symbol(-k) = conj(symbol(k)); throws on non-finite symbol at populated mode
SpectralField multiplier(const SpectralField& f,
                         const std::function<cplx(int, int)>& symbol);

// common multipliers
SpectralField d_x1(const SpectralField& f);
SpectralField d_x2(const SpectralField& f);
SpectralField g0_flat(const SpectralField& f);          // |k| = sqrt(m1^2+tau^2 m2^2)
SpectralField inv_d1(const SpectralField& f, int j = 1); // D1^{-j}, zero x1-mean
SpectralField proj_pi1(const SpectralField& f);          // remove m1=0 modes

// (sum_k (1+|k|)^{2s} |c_k|^2)^{1/2}
double sobolev_norm(const SpectralField& f, double s);

// T_v f(X) = f(X+v)
SpectralField shift(const SpectralField& f, double v1, double v2);

// symmetry handling: projection is idempotent and norm-non-increasing
SpectralField project_symmetry(const SpectralField& f, SymmetryClass sym);
double symmetry_defect(const SpectralField& f, SymmetryClass sym);
void assert_symmetry(const SpectralField& f, SymmetryClass sym, double tol,
                     const std::string& what);

// evaluate the truncated series at an arbitrary point (not necessarily on grid)
double eval_at(const SpectralField& f, double x1, double x2);
// gradient of the truncated series at a point
std::array<double, 2> eval_grad_at(const SpectralField& f, double x1, double x2);

// ---- serialization -------------------------------------------------------

// JSON header {tau, M, symmetry} + CSV rows (m1,m2,Re,Im) over admissible set
void save_field(const SpectralField& f, const std::string& json_path,
                const std::string& csv_path);
SpectralField load_field(const std::string& json_path, const std::string& csv_path);

// physical grid exports
void save_grid_csv(const Grid& g, double tau, const std::string& path);
// binary P5, linear rescale; recorded min/max returned
std::pair<double, double> save_grid_pgm(const Grid& g, const std::string& path);

}  // namespace dgw
