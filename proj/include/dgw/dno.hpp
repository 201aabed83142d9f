#pragma once

// Dirichlet-Neumann operator G_eta: flat symbol |k|, first- and second-order
// Taylor terms in eta (each with a Fourier-kernel and a physical-space
// evaluation path), the shape differential, and a finite-depth elliptic
// oracle on the flattened strip used to validate all of them.

#include <optional>

#include "dgw/lattice.hpp"

namespace dgw {

// G^(0) psi: multiplier |k|
SpectralField g0(const SpectralField& psi);

// G^(1){eta} psi = -G0(eta G0 psi) - div(eta grad psi)
SpectralField g1(const SpectralField& eta, const SpectralField& psi);
// direct convolution of the printed kernel {(K.K1) - |K||K1|}; O(nmodes^2)
SpectralField g1_kernel(const SpectralField& eta, const SpectralField& psi);

// G^(2){eta,eta} psi = G0(eta G0(eta G0 psi)) + 1/2 G0(eta^2 Lap psi)
//                      + 1/2 Lap(eta^2 G0 psi)
SpectralField g2(const SpectralField& eta, const SpectralField& psi);
// bilinear version G^(2){eta1,eta2} psi (symmetric in eta1,eta2)
SpectralField g2_bilinear(const SpectralField& eta1, const SpectralField& eta2,
                          const SpectralField& psi);
// direct convolution of the printed kernel; O(nmodes^3), small M only
SpectralField g2_kernel(const SpectralField& eta, const SpectralField& psi);

// partial sum G0 + G1 + ... up to the requested order (0, 1 or 2)
SpectralField dn_taylor(const SpectralField& eta, const SpectralField& psi, int order);

struct DnOracleConfig {
    double depth = 8.0;      // artificial bottom at s = -depth
    int ns = 512;            // vertical intervals (>= 32)
    double solver_tol = 1e-12;
    int max_iter = 60;
    void validate() const;
};

struct OracleReport {
    std::vector<std::pair<int, double>> residuals;  // (iteration, residual)
    int iterations = 0;
    bool converged = false;
};

// solves the flattened problem
//   Lap theta - 2 grad eta . grad(d_s theta) - (d_s theta) Lap eta
//     + (d_ss theta) |grad eta|^2 = 0   on s in (-depth, 0),
//   theta|_{s=0} = psi,  mode-wise decay closure at the bottom,
// then G_eta psi = (1+|grad eta|^2) d_s theta|_0 - grad eta . grad psi.
SpectralField dn_oracle(const SpectralField& eta, const SpectralField& psi,
                        const DnOracleConfig& cfg, OracleReport* report = nullptr);

enum class DnMode { taylor2, oracle };

// G_eta psi via second-order Taylor or the elliptic oracle
SpectralField dn_apply(const SpectralField& eta, const SpectralField& psi,
                       DnMode mode, const DnOracleConfig* cfg = nullptr);

// shape derivative d/deta G_eta[h] psi = -G_eta(h zeta) + div{(zeta grad eta
// - grad psi) h},  zeta = (G_eta psi + grad eta . grad psi)/(1+|grad eta|^2)
SpectralField dn_differential(const SpectralField& eta, const SpectralField& psi,
                              const SpectralField& h, DnMode mode,
                              const DnOracleConfig* cfg = nullptr);

}  // namespace dgw
