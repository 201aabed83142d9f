#include "dgw/lattice.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace dgw {

namespace {

// plan creation is not thread-safe; executions on distinct buffers are
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

struct PlanPair {
    fftw_plan fwd = nullptr, bwd = nullptr;
};

PlanPair& plans_for(int n1, int n2) {
    static std::map<std::pair<int, int>, PlanPair> cache;
    auto key = std::make_pair(n1, n2);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<cplx> buf(size_t(n1) * n2);
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    PlanPair pp;
    pp.fwd = fftw_plan_dft_2d(n1, n2, p, p, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    pp.bwd = fftw_plan_dft_2d(n1, n2, p, p, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    return cache.emplace(key, pp).first->second;
}

int next_fast_size(int n) {
    // smallest 2^a 3^b 5^c >= n
    for (int m = n;; ++m) {
        int r = m;
        for (int p : {2, 3, 5})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

bool is_near_integer(double x) {
    return std::abs(x - std::round(x)) < 1e-12 && std::round(x) >= 1.0;
}

LatticePtr build_lattice(double tau, int M, int oversample, bool parity) {
    if (!(tau > 0)) throw std::invalid_argument("make_lattice: tau must be positive");
    if (M < 1) throw std::invalid_argument("make_lattice: M must be >= 1");
    if (oversample < 2) throw std::invalid_argument("make_lattice: oversample must be >= 2");
    auto lat = std::make_shared<LatticeSpec>();
    lat->tau = tau;
    lat->trunc = M;
    lat->parity = parity;
    int n = next_fast_size(std::max(oversample * M, 2 * (2 * M + 1)));
    lat->n1 = lat->n2 = n;
    lat->resonance_warning = is_near_integer(tau) || is_near_integer(1.0 / tau);
    int W = 2 * M + 1;
    lat->slot_table.assign(size_t(W) * W, -1);
    for (int m1 = 0; m1 <= M; ++m1)
        for (int m2 = -M; m2 <= M; ++m2) {
            if (parity && (m1 + m2) % 2 != 0) continue;
            if (m1 == 0 && m2 < 0) continue;  // conjugate of (0,-m2)
            int s = int(lat->modes.size());
            lat->modes.push_back({m1, m2});
            lat->slot_table[size_t(m1 + M) * W + (m2 + M)] = s;
            if (!(m1 == 0 && m2 == 0))
                lat->slot_table[size_t(-m1 + M) * W + (-m2 + M)] = -2 - s;
        }
    return lat;
}

void check_compatible(const SpectralField& a, const SpectralField& b, const char* op) {
    if (!a.lattice().same_as(b.lattice()))
        throw std::invalid_argument(std::string(op) + ": lattice mismatch");
}

int wrap_index(int m, int n) { return (m % n + n) % n; }

}  // namespace

LatticePtr make_lattice(double tau, int M, int oversample) {
    return build_lattice(tau, M, oversample, true);
}

LatticePtr make_full_lattice(double tau, int M, int oversample) {
    return build_lattice(tau, M, oversample, false);
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    check_compatible(*this, o, "operator+");
    for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    if (sym_.x1 != o.sym_.x1 || sym_.x2 != o.sym_.x2) sym_ = sym_none;
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    check_compatible(*this, o, "operator-");
    for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    if (sym_.x1 != o.sym_.x1 || sym_.x2 != o.sym_.x2) sym_ = sym_none;
    return *this;
}

SpectralField& SpectralField::operator*=(double a) {
    for (auto& z : c_) z *= a;
    return *this;
}

SpectralField transform(const Grid& g, LatticePtr lat, TransformDiag* diag) {
    if (g.n1 != lat->n1 || g.n2 != lat->n2)
        throw std::invalid_argument("transform: grid shape mismatch");
    int n1 = g.n1, n2 = g.n2;
    std::vector<cplx> buf(size_t(n1) * n2);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = g.v[i];
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        auto& pp = plans_for(n1, n2);
        fftw_execute_dft(pp.fwd, reinterpret_cast<fftw_complex*>(buf.data()),
                         reinterpret_cast<fftw_complex*>(buf.data()));
    }
    double scale = 1.0 / (double(n1) * n2);
    SpectralField f(lat);
    // collect admissible modes; reality enforced by averaging c(k), conj(c(-k))
    std::vector<char> claimed(buf.size(), 0);
    double leak2 = 0.0;
    for (int s = 0; s < lat->nmodes(); ++s) {
        int m1 = lat->modes[s][0], m2 = lat->modes[s][1];
        size_t ip = size_t(wrap_index(m1, n1)) * n2 + wrap_index(m2, n2);
        size_t im = size_t(wrap_index(-m1, n1)) * n2 + wrap_index(-m2, n2);
        cplx cp = buf[ip] * scale;
        cplx cm = buf[im] * scale;
        f.raw()[s] = 0.5 * (cp + std::conj(cm));
        claimed[ip] = claimed[im] = 1;
        leak2 += 0.5 * std::norm(cp - std::conj(cm));
    }
    if (diag) {
        double in2 = 0.0;
        for (size_t i = 0; i < buf.size(); ++i) {
            double m = std::norm(buf[i] * scale);
            in2 += m;
            if (!claimed[i]) leak2 += m;
        }
        diag->leak_abs = std::sqrt(leak2);
        diag->input_norm = std::sqrt(in2);
    }
    return f;
}

Grid inverse_transform(const SpectralField& f) {
    const auto& lat = f.lattice();
    int n1 = lat.n1, n2 = lat.n2;
    std::vector<cplx> buf(size_t(n1) * n2, cplx(0, 0));
    for (int s = 0; s < lat.nmodes(); ++s) {
        int m1 = lat.modes[s][0], m2 = lat.modes[s][1];
        cplx c = f.raw()[s];
        buf[size_t(wrap_index(m1, n1)) * n2 + wrap_index(m2, n2)] += c;
        if (!(m1 == 0 && m2 == 0))
            buf[size_t(wrap_index(-m1, n1)) * n2 + wrap_index(-m2, n2)] += std::conj(c);
    }
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        auto& pp = plans_for(n1, n2);
        fftw_execute_dft(pp.bwd, reinterpret_cast<fftw_complex*>(buf.data()),
                         reinterpret_cast<fftw_complex*>(buf.data()));
    }
    Grid g(n1, n2);
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = buf[i].real();
    return g;
}

SpectralField multiply(const SpectralField& a, const SpectralField& b) {
    check_compatible(a, b, "multiply");
    Grid ga = inverse_transform(a), gb = inverse_transform(b);
    for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] *= gb.v[i];
    auto out = transform(ga, a.lattice_ptr());
    out.set_symmetry({parity_mul(a.symmetry().x1, b.symmetry().x1),
                      parity_mul(a.symmetry().x2, b.symmetry().x2)});
    return out;
}

Grid grid_apply(const std::vector<const SpectralField*>& fs,
                const std::function<double(const double*)>& op) {
    if (fs.empty()) throw std::invalid_argument("grid_apply: no inputs");
    std::vector<Grid> gs;
    gs.reserve(fs.size());
    for (auto* f : fs) {
        check_compatible(*fs[0], *f, "grid_apply");
        gs.push_back(inverse_transform(*f));
    }
    Grid out(gs[0].n1, gs[0].n2);
    std::vector<double> vals(fs.size());
    for (size_t i = 0; i < out.v.size(); ++i) {
        for (size_t j = 0; j < gs.size(); ++j) vals[j] = gs[j].v[i];
        out.v[i] = op(vals.data());
    }
    return out;
}

SpectralField multiplier(const SpectralField& f,
                         const std::function<cplx(int, int)>& symbol) {
    const auto& lat = f.lattice();
    SpectralField out(f.lattice_ptr(), f.symmetry());
    for (int s = 0; s < lat.nmodes(); ++s) {
        cplx m = symbol(lat.modes[s][0], lat.modes[s][1]);
        if (!std::isfinite(m.real()) || !std::isfinite(m.imag())) {
            if (std::abs(f.raw()[s]) > 0)
                throw std::domain_error("multiplier: singular symbol at populated mode (" +
                                        std::to_string(lat.modes[s][0]) + "," +
                                        std::to_string(lat.modes[s][1]) + ")");
            m = 0.0;
        }
        out.raw()[s] = m * f.raw()[s];
    }
    return out;
}

SpectralField d_x1(const SpectralField& f) {
    auto out = multiplier(f, [](int m1, int) { return cplx(0.0, m1); });
    out.set_symmetry({parity_mul(f.symmetry().x1, Parity::odd), f.symmetry().x2});
    return out;
}

SpectralField d_x2(const SpectralField& f) {
    double tau = f.lattice().tau;
    auto out = multiplier(f, [tau](int, int m2) { return cplx(0.0, tau * m2); });
    out.set_symmetry({f.symmetry().x1, parity_mul(f.symmetry().x2, Parity::odd)});
    return out;
}

SpectralField g0_flat(const SpectralField& f) {
    const auto& lat = f.lattice();
    return multiplier(f, [&lat](int m1, int m2) { return cplx(lat.kabs(m1, m2), 0.0); });
}

SpectralField inv_d1(const SpectralField& f, int j) {
    return multiplier(f, [j](int m1, int) -> cplx {
        if (m1 == 0) return 0.0;
        return std::pow(cplx(0.0, m1), -j);
    });
}

SpectralField proj_pi1(const SpectralField& f) {
    return multiplier(f, [](int m1, int) { return cplx(m1 == 0 ? 0.0 : 1.0, 0.0); });
}

double sobolev_norm(const SpectralField& f, double s) {
    if (s < 0) throw std::invalid_argument("sobolev_norm: s must be >= 0");
    const auto& lat = f.lattice();
    double acc = 0.0;
    for (int i = 0; i < lat.nmodes(); ++i) {
        int m1 = lat.modes[i][0], m2 = lat.modes[i][1];
        double w = std::pow(1.0 + lat.kabs(m1, m2), 2.0 * s);
        double mult = (m1 == 0 && m2 == 0) ? 1.0 : 2.0;
        acc += mult * w * std::norm(f.raw()[i]);
    }
    return std::sqrt(acc);
}

SpectralField shift(const SpectralField& f, double v1, double v2) {
    const auto& lat = f.lattice();
    SpectralField out(f.lattice_ptr());
    for (int s = 0; s < lat.nmodes(); ++s) {
        double ph = lat.modes[s][0] * v1 + lat.tau * lat.modes[s][1] * v2;
        out.raw()[s] = f.raw()[s] * std::exp(cplx(0.0, ph));
    }
    return out;
}

namespace {

// parity factors: under x1 -> -x1, c(m1,m2) -> c(-m1,m2)
cplx reflected_coeff(const SpectralField& f, int m1, int m2, bool flip1, bool flip2) {
    return f.coeff(flip1 ? -m1 : m1, flip2 ? -m2 : m2);
}

}  // namespace

SpectralField project_symmetry(const SpectralField& f, SymmetryClass sym) {
    const auto& lat = f.lattice();
    SpectralField out(f.lattice_ptr(), sym);
    for (int s = 0; s < lat.nmodes(); ++s) {
        int m1 = lat.modes[s][0], m2 = lat.modes[s][1];
        cplx acc = f.coeff(m1, m2);
        if (sym.x1 != Parity::none) {
            double s1 = (sym.x1 == Parity::even) ? 1.0 : -1.0;
            acc = 0.5 * (acc + s1 * reflected_coeff(f, m1, m2, true, false));
        }
        if (sym.x2 != Parity::none) {
            double s2 = (sym.x2 == Parity::even) ? 1.0 : -1.0;
            cplx b = acc;
            cplx br;
            // reflect the already-x1-symmetrized object in x2
            if (sym.x1 != Parity::none) {
                double s1 = (sym.x1 == Parity::even) ? 1.0 : -1.0;
                br = 0.5 * (reflected_coeff(f, m1, m2, false, true) +
                            s1 * reflected_coeff(f, m1, m2, true, true));
            } else {
                br = reflected_coeff(f, m1, m2, false, true);
            }
            acc = 0.5 * (b + s2 * br);
        }
        out.raw()[s] = acc;
    }
    return out;
}

double symmetry_defect(const SpectralField& f, SymmetryClass sym) {
    auto p = project_symmetry(f, sym);
    double n = sobolev_norm(f, 0.0);
    SpectralField d = f;
    d -= p;
    double r = sobolev_norm(d, 0.0);
    return n > 0 ? r / n : r;
}

void assert_symmetry(const SpectralField& f, SymmetryClass sym, double tol,
                     const std::string& what) {
    double d = symmetry_defect(f, sym);
    if (d > tol)
        throw std::runtime_error(what + ": symmetry defect " + std::to_string(d) +
                                 " exceeds tolerance " + std::to_string(tol));
}

double eval_at(const SpectralField& f, double x1, double x2) {
    const auto& lat = f.lattice();
    double acc = 0.0;
    for (int s = 0; s < lat.nmodes(); ++s) {
        int m1 = lat.modes[s][0], m2 = lat.modes[s][1];
        double ph = m1 * x1 + lat.tau * m2 * x2;
        cplx c = f.raw()[s];
        double mult = (m1 == 0 && m2 == 0) ? 1.0 : 2.0;
        acc += mult * (c.real() * std::cos(ph) - c.imag() * std::sin(ph));
    }
    return acc;
}

std::array<double, 2> eval_grad_at(const SpectralField& f, double x1, double x2) {
    const auto& lat = f.lattice();
    double a1 = 0.0, a2 = 0.0;
    for (int s = 0; s < lat.nmodes(); ++s) {
        int m1 = lat.modes[s][0], m2 = lat.modes[s][1];
        if (m1 == 0 && m2 == 0) continue;
        double k1 = m1, k2 = lat.tau * m2;
        double ph = k1 * x1 + k2 * x2;
        cplx c = f.raw()[s];
        // d/dx of 2(Re c cos - Im c sin) = -2(Re c sin + Im c cos) * k
        double t = -2.0 * (c.real() * std::sin(ph) + c.imag() * std::cos(ph));
        a1 += t * k1;
        a2 += t * k2;
    }
    return {a1, a2};
}

// ---- serialization ---------------------------------------------------------

namespace {
const char* parity_name(Parity p) {
    switch (p) {
        case Parity::even: return "even";
        case Parity::odd: return "odd";
        default: return "none";
    }
}
Parity parity_from(const std::string& s) {
    if (s == "even") return Parity::even;
    if (s == "odd") return Parity::odd;
    return Parity::none;
}
}  // namespace

void save_field(const SpectralField& f, const std::string& json_path,
                const std::string& csv_path) {
    const auto& lat = f.lattice();
    nlohmann::json j;
    j["tau"] = lat.tau;
    j["M"] = lat.trunc;
    j["grid_n1"] = lat.n1;
    j["grid_n2"] = lat.n2;
    j["parity"] = lat.parity;
    j["symmetry"] = {{"x1", parity_name(f.symmetry().x1)},
                     {"x2", parity_name(f.symmetry().x2)}};
    std::ofstream js(json_path);
    js << j.dump(2) << "\n";

    std::ofstream cs(csv_path);
    cs << "m1,m2,Re,Im\n";
    char buf[96];
    for (int m1 = -lat.trunc; m1 <= lat.trunc; ++m1)
        for (int m2 = -lat.trunc; m2 <= lat.trunc; ++m2) {
            if (!lat.admissible(m1, m2)) continue;
            cplx c = f.coeff(m1, m2);
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", m1, m2, c.real(), c.imag());
            cs << buf;
        }
}

SpectralField load_field(const std::string& json_path, const std::string& csv_path) {
    std::ifstream js(json_path);
    if (!js) throw std::runtime_error("load_field: cannot open " + json_path);
    nlohmann::json j;
    js >> j;
    double tau = j.at("tau");
    int M = j.at("M");
    bool parity = j.value("parity", true);
    auto lat = parity ? make_lattice(tau, M) : make_full_lattice(tau, M);
    SpectralField f(lat, {parity_from(j["symmetry"]["x1"]), parity_from(j["symmetry"]["x2"])});
    std::ifstream cs(csv_path);
    if (!cs) throw std::runtime_error("load_field: cannot open " + csv_path);
    std::string line;
    std::getline(cs, line);  // header
    while (std::getline(cs, line)) {
        if (line.empty()) continue;
        int m1, m2;
        double re, im;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &m1, &m2, &re, &im) != 4)
            throw std::runtime_error("load_field: malformed CSV row: " + line);
        if (m1 > 0 || (m1 == 0 && m2 >= 0)) f.set_coeff(m1, m2, cplx(re, im));
    }
    return f;
}

void save_grid_csv(const Grid& g, double tau, const std::string& path) {
    std::ofstream os(path);
    os << "x1,x2,value\n";
    char buf[96];
    for (int i1 = 0; i1 < g.n1; ++i1)
        for (int i2 = 0; i2 < g.n2; ++i2) {
            double x1 = 2.0 * M_PI * i1 / g.n1;
            double x2 = (2.0 * M_PI / tau) * i2 / g.n2;
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x1, x2, g.at(i1, i2));
            os << buf;
        }
}

std::pair<double, double> save_grid_pgm(const Grid& g, const std::string& path) {
    double lo = g.v.empty() ? 0.0 : g.v[0], hi = lo;
    for (double v : g.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = (hi > lo) ? (hi - lo) : 1.0;
    std::ofstream os(path, std::ios::binary);
    os << "P5\n" << g.n2 << " " << g.n1 << "\n255\n";
    for (int i1 = 0; i1 < g.n1; ++i1)
        for (int i2 = 0; i2 < g.n2; ++i2) {
            int px = int(std::lround(255.0 * (g.at(i1, i2) - lo) / span));
            os.put(char(std::clamp(px, 0, 255)));
        }
    return {lo, hi};
}

}  // namespace dgw
