#include "mapcontent/metric_deriv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mapcontent/threading.hpp"

namespace mapcontent {

// ---------------------------------------------------------------------------
// Seminorm evaluation
// ---------------------------------------------------------------------------

double Seminorm::operator()(std::span<const double> v) const {
    switch (family) {
        case Family::Zero:
            return 0.0;
        case Family::Euclidean: {
            double q = 0;
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) q += v[static_cast<std::size_t>(i)] * quad[static_cast<std::size_t>(i * dim + j)] * v[static_cast<std::size_t>(j)];
            return std::sqrt(std::max(0.0, q));
        }
        case Family::MaxLinear: {
            double best = 0;
            for (const auto& a : covectors) {
                double dot = 0;
                for (int i = 0; i < dim; ++i) dot += a[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
                best = std::max(best, std::abs(dot));
            }
            return best;
        }
        case Family::Tabulated: {
            double len = 0;
            for (int i = 0; i < dim; ++i) len += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
            len = std::sqrt(len);
            if (len == 0 || directions.empty()) return 0.0;
            // nearest stored direction by |cosine|
            double best_dot = -1;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < directions.size(); ++i) {
                double dot = 0;
                for (int a = 0; a < dim; ++a) dot += directions[i][static_cast<std::size_t>(a)] * v[static_cast<std::size_t>(a)];
                dot = std::abs(dot) / len;
                if (dot > best_dot) {
                    best_dot = dot;
                    best_i = i;
                }
            }
            return len * dir_values[best_i];
        }
    }
    return 0.0;
}

Seminorm Seminorm::zero(int dim) {
    Seminorm s;
    s.family = Family::Zero;
    s.dim = dim;
    return s;
}

Seminorm Seminorm::euclidean(int dim, std::vector<double> sym_psd) {
    Seminorm s;
    s.family = Family::Euclidean;
    s.dim = dim;
    s.quad = std::move(sym_psd);
    return s;
}

Seminorm Seminorm::max_linear(int dim, std::vector<std::vector<double>> covectors) {
    Seminorm s;
    s.family = Family::MaxLinear;
    s.dim = dim;
    s.covectors = std::move(covectors);
    return s;
}

Seminorm Seminorm::tabulated(int dim, std::vector<std::array<double, 4>> dirs, std::vector<double> values) {
    Seminorm s;
    s.family = Family::Tabulated;
    s.dim = dim;
    s.directions = std::move(dirs);
    s.dir_values = std::move(values);
    return s;
}

// ---------------------------------------------------------------------------
// Small dense linear algebra (d <= 4)
// ---------------------------------------------------------------------------

namespace {

// Jacobi eigendecomposition of a symmetric d x d matrix.
void jacobi_eigen(int d, std::vector<double> a, std::vector<double>& evals, std::vector<double>& evecs) {
    evecs.assign(static_cast<std::size_t>(d * d), 0.0);
    for (int i = 0; i < d; ++i) evecs[static_cast<std::size_t>(i * d + i)] = 1.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) off += a[static_cast<std::size_t>(i * d + j)] * a[static_cast<std::size_t>(i * d + j)];
        if (off < 1e-24) break;
        for (int p = 0; p < d; ++p)
            for (int q = p + 1; q < d; ++q) {
                double apq = a[static_cast<std::size_t>(p * d + q)];
                if (std::abs(apq) < 1e-18) continue;
                double app = a[static_cast<std::size_t>(p * d + p)];
                double aqq = a[static_cast<std::size_t>(q * d + q)];
                double theta = 0.5 * (aqq - app) / apq;
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < d; ++k) {
                    double akp = a[static_cast<std::size_t>(k * d + p)];
                    double akq = a[static_cast<std::size_t>(k * d + q)];
                    a[static_cast<std::size_t>(k * d + p)] = c * akp - s * akq;
                    a[static_cast<std::size_t>(k * d + q)] = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    double apk = a[static_cast<std::size_t>(p * d + k)];
                    double aqk = a[static_cast<std::size_t>(q * d + k)];
                    a[static_cast<std::size_t>(p * d + k)] = c * apk - s * aqk;
                    a[static_cast<std::size_t>(q * d + k)] = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    double vkp = evecs[static_cast<std::size_t>(k * d + p)];
                    double vkq = evecs[static_cast<std::size_t>(k * d + q)];
                    evecs[static_cast<std::size_t>(k * d + p)] = c * vkp - s * vkq;
                    evecs[static_cast<std::size_t>(k * d + q)] = s * vkp + c * vkq;
                }
            }
    }
    evals.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) evals[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i * d + i)];
}

// Gaussian elimination with partial pivoting; returns false if singular.
bool solve_dense(std::vector<double> a, std::vector<double> b, int n, std::vector<double>& x) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[static_cast<std::size_t>(r * n + col)]) > std::abs(a[static_cast<std::size_t>(piv * n + col)])) piv = r;
        if (std::abs(a[static_cast<std::size_t>(piv * n + col)]) < 1e-14) return false;
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a[static_cast<std::size_t>(piv * n + c)], a[static_cast<std::size_t>(col * n + c)]);
            std::swap(b[static_cast<std::size_t>(piv)], b[static_cast<std::size_t>(col)]);
        }
        for (int r = col + 1; r < n; ++r) {
            double f = a[static_cast<std::size_t>(r * n + col)] / a[static_cast<std::size_t>(col * n + col)];
            for (int c = col; c < n; ++c) a[static_cast<std::size_t>(r * n + c)] -= f * a[static_cast<std::size_t>(col * n + c)];
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
        }
    }
    x.assign(static_cast<std::size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= a[static_cast<std::size_t>(r * n + c)] * x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = s / a[static_cast<std::size_t>(r * n + r)];
    }
    return true;
}

std::vector<double> psd_project(int d, const std::vector<double>& sym) {
    std::vector<double> evals, evecs;
    jacobi_eigen(d, sym, evals, evecs);
    std::vector<double> out(static_cast<std::size_t>(d * d), 0.0);
    for (int e = 0; e < d; ++e) {
        double lam = std::max(0.0, evals[static_cast<std::size_t>(e)]);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<std::size_t>(i * d + j)] += lam * evecs[static_cast<std::size_t>(i * d + e)] * evecs[static_cast<std::size_t>(j * d + e)];
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pair sampling
// ---------------------------------------------------------------------------

namespace {

std::vector<PairSample> pairs_from_lattice_ranges(const SampledMap& map, const std::array<std::int64_t, kMaxDim>& lo,
                                                  const std::array<std::int64_t, kMaxDim>& hi,
                                                  const MdFitOptions& opts);

}  // namespace

std::vector<PairSample> sample_pairs(const SampledMap& map, const CubeId& cube, const MdFitOptions& opts) {
    // even window factors round up to the next odd so the dilation stays a
    // union of same-level cubes
    int factor = opts.c0 % 2 == 0 ? opts.c0 + 1 : opts.c0;
    Region window = dilate(cube, factor, opts.boundary);
    int d = map.dim();
    int shift = map.depth() - cube.level;
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (int a = 0; a < d; ++a) {
        lo[a] = static_cast<std::int64_t>(window.lo[a]) << shift;
        hi[a] = (static_cast<std::int64_t>(window.hi[a]) + 1) << shift;
    }
    return pairs_from_lattice_ranges(map, lo, hi, opts);
}

std::vector<PairSample> sample_pairs_box(const SampledMap& map, std::span<const double> lo_in,
                                         std::span<const double> hi_in, const MdFitOptions& opts) {
    int d = map.dim();
    double scale = std::ldexp(1.0, map.depth());
    std::array<std::int64_t, kMaxDim> lo{}, hi{};
    for (int a = 0; a < d; ++a) {
        lo[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(lo_in[static_cast<std::size_t>(a)] * scale - 1e-9)));
        hi[a] = std::min<std::int64_t>(static_cast<std::int64_t>(scale),
                                       static_cast<std::int64_t>(std::floor(hi_in[static_cast<std::size_t>(a)] * scale + 1e-9)));
        if (lo[a] > hi[a]) throw ResolutionError("box contains no lattice points");
    }
    return pairs_from_lattice_ranges(map, lo, hi, opts);
}

namespace {

std::vector<PairSample> pairs_from_lattice_ranges(const SampledMap& map, const std::array<std::int64_t, kMaxDim>& lo,
                                                  const std::array<std::int64_t, kMaxDim>& hi,
                                                  const MdFitOptions& opts) {
    int d = map.dim();
    double h = std::ldexp(1.0, -map.depth());
    std::vector<LatticePoint> pts;
    std::array<std::int64_t, kMaxDim> c = lo;
    const bool restricted = map.domain().has_value();
    while (true) {
        LatticePoint p{};
        for (int a = 0; a < d; ++a) p[a] = static_cast<std::int32_t>(c[a]);
        bool usable = true;
        if (restricted) {
            LatticePoint clamped = p;
            for (int a = 0; a < d; ++a)
                clamped[a] = std::clamp<std::int32_t>(clamped[a], 0, map.extent() - 1);
            usable = map.in_domain(clamped);
        }
        if (usable) pts.push_back(p);
        int a = 0;
        for (; a < d; ++a) {
            if (++c[a] <= hi[a]) break;
            c[a] = lo[a];
        }
        if (a == d) break;
    }
    if (pts.size() < 2) throw ResolutionError("dilated cube holds fewer than two usable lattice points");

    // Endpoint cap so the all-pairs count stays below pair_cap.
    std::size_t max_pts = 1;
    while ((max_pts + 1) * max_pts / 2 <= opts.pair_cap) ++max_pts;
    if (pts.size() > std::max<std::size_t>(64, max_pts)) {
        // farthest-point selection, seeded by the lexicographically first point
        std::vector<LatticePoint> chosen;
        std::vector<double> mind(pts.size(), std::numeric_limits<double>::infinity());
        std::size_t cur = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (std::lexicographical_compare(pts[i].begin(), pts[i].begin() + d, pts[cur].begin(), pts[cur].begin() + d))
                cur = i;
        std::vector<bool> used(pts.size(), false);
        while (chosen.size() < max_pts) {
            used[cur] = true;
            chosen.push_back(pts[cur]);
            double far = -1;
            std::size_t next = cur;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (used[i]) continue;
                double s = 0;
                for (int a = 0; a < d; ++a) {
                    double delta = static_cast<double>(pts[i][a] - pts[cur][a]);
                    s += delta * delta;
                }
                mind[i] = std::min(mind[i], s);
                if (mind[i] > far) {
                    far = mind[i];
                    next = i;
                }
            }
            if (next == cur) break;
            cur = next;
        }
        pts = std::move(chosen);
    }

    std::vector<PairSample> pairs;
    pairs.reserve(pts.size() * (pts.size() - 1) / 2);
    std::vector<PointId> vals(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = map.value_clamped(pts[i]);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            PairSample ps{};
            double s = 0;
            for (int a = 0; a < d; ++a) {
                double delta = static_cast<double>(pts[i][a] - pts[j][a]) * h;
                ps.delta[static_cast<std::size_t>(a)] = delta;
                s += delta * delta;
            }
            ps.norm = std::sqrt(s);
            if (ps.norm == 0) continue;
            ps.dist = map.target_distance(vals[i], vals[j]);
            pairs.push_back(ps);
        }
    return pairs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Upper bound: minimax fit over the parametric families
// ---------------------------------------------------------------------------

namespace {

double objective_euclidean(std::span<const PairSample> pairs, int d, const std::vector<double>& factor) {
    // factor L (row-major d x d), S = L L^T
    double worst = 0;
    for (const auto& p : pairs) {
        double q = 0;
        for (int r = 0; r < d; ++r) {
            double dot = 0;
            for (int cidx = 0; cidx < d; ++cidx) dot += factor[static_cast<std::size_t>(r * d + cidx)] * p.delta[static_cast<std::size_t>(cidx)];
            q += dot * dot;
        }
        worst = std::max(worst, std::abs(p.dist - std::sqrt(q)));
    }
    return worst;
}

double objective_max_linear(std::span<const PairSample> pairs, int d, const std::vector<std::vector<double>>& cov) {
    double worst = 0;
    for (const auto& p : pairs) {
        double val = 0;
        for (const auto& a : cov) {
            double dot = 0;
            for (int i = 0; i < d; ++i) dot += a[static_cast<std::size_t>(i)] * p.delta[static_cast<std::size_t>(i)];
            val = std::max(val, std::abs(dot));
        }
        worst = std::max(worst, std::abs(p.dist - val));
    }
    return worst;
}

// Coordinate descent with adaptive steps on a flat parameter vector.
template <typename Objective>
double coordinate_descent(std::vector<double>& params, double current, int rounds, const Objective& eval) {
    std::vector<double> steps(params.size(), 0.1);
    for (int round = 0; round < rounds; ++round) {
        bool improved = false;
        for (std::size_t i = 0; i < params.size(); ++i) {
            double& x = params[i];
            double& st = steps[i];
            if (st < 1e-12) continue;
            double orig = x;
            x = orig + st;
            double up = eval(params);
            if (up < current - 1e-15) {
                current = up;
                st *= 1.6;
                improved = true;
                continue;
            }
            x = orig - st;
            double down = eval(params);
            if (down < current - 1e-15) {
                current = down;
                st *= 1.6;
                improved = true;
                continue;
            }
            x = orig;
            st *= 0.5;
        }
        if (!improved && *std::max_element(steps.begin(), steps.end()) < 1e-12) break;
    }
    return current;
}

// Least-squares seed for the quadratic form: fit dist^2 by delta^T S delta.
std::vector<double> least_squares_quad(std::span<const PairSample> pairs, int d) {
    struct Mono {
        int i, j;
    };
    std::vector<Mono> monos;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) monos.push_back({i, j});
    int n = static_cast<int>(monos.size());
    std::vector<double> ata(static_cast<std::size_t>(n * n), 0.0);
    std::vector<double> atb(static_cast<std::size_t>(n), 0.0);
    std::vector<double> phi(static_cast<std::size_t>(n));
    for (const auto& p : pairs) {
        for (int k = 0; k < n; ++k) {
            double v = p.delta[static_cast<std::size_t>(monos[static_cast<std::size_t>(k)].i)] *
                       p.delta[static_cast<std::size_t>(monos[static_cast<std::size_t>(k)].j)];
            phi[static_cast<std::size_t>(k)] = monos[static_cast<std::size_t>(k)].i == monos[static_cast<std::size_t>(k)].j ? v : 2.0 * v;
        }
        double y = p.dist * p.dist;
        for (int r = 0; r < n; ++r) {
            atb[static_cast<std::size_t>(r)] += phi[static_cast<std::size_t>(r)] * y;
            for (int cx = 0; cx < n; ++cx) ata[static_cast<std::size_t>(r * n + cx)] += phi[static_cast<std::size_t>(r)] * phi[static_cast<std::size_t>(cx)];
        }
    }
    // light ridge term keeps degenerate windows solvable
    for (int r = 0; r < n; ++r) ata[static_cast<std::size_t>(r * n + r)] += 1e-12;
    std::vector<double> w;
    if (!solve_dense(ata, atb, n, w)) w.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> sym(static_cast<std::size_t>(d * d), 0.0);
    for (int k = 0; k < n; ++k) {
        sym[static_cast<std::size_t>(monos[static_cast<std::size_t>(k)].i * d + monos[static_cast<std::size_t>(k)].j)] = w[static_cast<std::size_t>(k)];
        sym[static_cast<std::size_t>(monos[static_cast<std::size_t>(k)].j * d + monos[static_cast<std::size_t>(k)].i)] = w[static_cast<std::size_t>(k)];
    }
    return psd_project(d, sym);
}

std::vector<double> factor_of_psd(int d, const std::vector<double>& sym) {
    std::vector<double> evals, evecs;
    jacobi_eigen(d, sym, evals, evecs);
    std::vector<double> f(static_cast<std::size_t>(d * d), 0.0);
    // rows of L^T scaled by sqrt(lambda): S = L L^T with L = V sqrt(Lambda)
    for (int i = 0; i < d; ++i)
        for (int e = 0; e < d; ++e)
            f[static_cast<std::size_t>(e * d + i)] =
                evecs[static_cast<std::size_t>(i * d + e)] * std::sqrt(std::max(0.0, evals[static_cast<std::size_t>(e)]));
    return f;
}

}  // namespace

// ---------------------------------------------------------------------------
// Lower bound: direction LP
// ---------------------------------------------------------------------------

double seminorm_lower_bound(std::span<const PairSample> pairs, int dim, double tol) {
    if (pairs.empty()) return 0.0;

    // Group pairs by primitive integer direction (canonical sign).
    struct DirKey {
        std::array<std::int64_t, kMaxDim> v{};
        bool operator<(const DirKey& o) const { return v < o.v; }
    };
    auto dir_of = [&](const PairSample& p) {
        DirKey k;
        // quantize: the deltas are integer multiples of the lattice step
        double step = std::numeric_limits<double>::infinity();
        for (int a = 0; a < dim; ++a) {
            double x = std::abs(p.delta[static_cast<std::size_t>(a)]);
            if (x > 1e-15) step = std::min(step, x);
        }
        std::array<std::int64_t, kMaxDim> raw{};
        for (int a = 0; a < dim; ++a)
            raw[static_cast<std::size_t>(a)] = static_cast<std::int64_t>(std::llround(p.delta[static_cast<std::size_t>(a)] / step));
        std::int64_t g = 0;
        for (int a = 0; a < dim; ++a) g = std::gcd(g, std::abs(raw[static_cast<std::size_t>(a)]));
        if (g == 0) g = 1;
        for (int a = 0; a < dim; ++a) raw[static_cast<std::size_t>(a)] /= g;
        for (int a = 0; a < dim; ++a) {
            if (raw[static_cast<std::size_t>(a)] > 0) break;
            if (raw[static_cast<std::size_t>(a)] < 0) {
                for (int b = 0; b < dim; ++b) raw[static_cast<std::size_t>(b)] = -raw[static_cast<std::size_t>(b)];
                break;
            }
        }
        k.v = raw;
        return k;
    };

    std::map<DirKey, std::vector<std::pair<double, double>>> groups;  // (norm, dist)
    for (const auto& p : pairs) groups[dir_of(p)].push_back({p.norm, p.dist});

    std::vector<DirKey> dirs;
    std::vector<std::vector<std::pair<double, double>>> obs;
    for (auto& [k, v] : groups) {
        dirs.push_back(k);
        obs.push_back(std::move(v));
    }
    std::size_t nd = dirs.size();

    auto dir_norm = [&](const DirKey& k) {
        double s = 0;
        for (int a = 0; a < dim; ++a) s += static_cast<double>(k.v[static_cast<std::size_t>(a)]) * static_cast<double>(k.v[static_cast<std::size_t>(a)]);
        return std::sqrt(s);
    };

    // Subadditivity constraints: |w| t_w <= |u| t_u + |v| t_v for w = u +/- v.
    struct Constraint {
        std::size_t w, u, v;
        double cw, cu, cv;
    };
    std::vector<Constraint> cons;
    std::map<DirKey, std::size_t> dir_index;
    for (std::size_t i = 0; i < nd; ++i) dir_index[dirs[i]] = i;
    const std::size_t max_cons = 20000;
    for (std::size_t i = 0; i < nd && cons.size() < max_cons; ++i)
        for (std::size_t j = i + 1; j < nd && cons.size() < max_cons; ++j)
            for (int sign = 0; sign < 2; ++sign) {
                DirKey w;
                std::int64_t g = 0;
                bool zero = true;
                for (int a = 0; a < dim; ++a) {
                    std::int64_t s = dirs[i].v[static_cast<std::size_t>(a)] +
                                     (sign ? -1 : 1) * dirs[j].v[static_cast<std::size_t>(a)];
                    w.v[static_cast<std::size_t>(a)] = s;
                    if (s != 0) zero = false;
                    g = std::gcd(g, std::abs(s));
                }
                if (zero) continue;
                double wlen_raw = dir_norm(w);
                for (int a = 0; a < dim; ++a) w.v[static_cast<std::size_t>(a)] /= g;
                for (int a = 0; a < dim; ++a) {
                    if (w.v[static_cast<std::size_t>(a)] > 0) break;
                    if (w.v[static_cast<std::size_t>(a)] < 0) {
                        for (int b = 0; b < dim; ++b) w.v[static_cast<std::size_t>(b)] = -w.v[static_cast<std::size_t>(b)];
                        break;
                    }
                }
                auto it = dir_index.find(w);
                if (it == dir_index.end()) continue;
                cons.push_back({it->second, i, j, wlen_raw, dir_norm(dirs[i]), dir_norm(dirs[j])});
            }

    double s_hi = 0;
    for (const auto& o : obs)
        for (auto [r, c] : o) s_hi = std::max(s_hi, c);
    double s_lo = 0;

    std::vector<double> lo(nd), hi(nd), t(nd);
    auto feasible = [&](double s) {
        for (std::size_t i = 0; i < nd; ++i) {
            double l = 0, hgh = std::numeric_limits<double>::infinity();
            for (auto [r, c] : obs[i]) {
                l = std::max(l, (c - s) / r);
                hgh = std::min(hgh, (c + s) / r);
            }
            if (l > hgh + 1e-15) return false;
            lo[i] = l;
            hi[i] = hgh;
            t[i] = hgh;
        }
        // monotone downward propagation to the greatest solution
        for (int sweep = 0; sweep < 256; ++sweep) {
            bool changed = false;
            for (const auto& cst : cons) {
                double bound = (cst.cu * t[cst.u] + cst.cv * t[cst.v]) / cst.cw;
                if (t[cst.w] > bound + 1e-15) {
                    t[cst.w] = bound;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        for (std::size_t i = 0; i < nd; ++i)
            if (t[i] < lo[i] - 1e-12) return false;
        return true;
    };

    if (feasible(0.0)) return 0.0;
    for (int iter = 0; iter < 80 && s_hi - s_lo > tol; ++iter) {
        double mid = 0.5 * (s_lo + s_hi);
        if (feasible(mid))
            s_hi = mid;
        else
            s_lo = mid;
    }
    return s_hi;
}

// ---------------------------------------------------------------------------

MdResult fit_seminorm(const SampledMap& map, const CubeId& cube, const MdFitOptions& opts) {
    auto pairs = sample_pairs(map, cube, opts);
    MdResult out = fit_seminorm_pairs(pairs, map.dim(), cube.side(), opts);
    out.cube = cube;
    return out;
}

MdResult fit_seminorm_pairs(std::span<const PairSample> pairs, int dim, double side, const MdFitOptions& opts) {
    int d = dim;
    MdResult out;
    out.pair_count = pairs.size();

    // Constant window: exact zero seminorm.
    bool all_zero = std::all_of(pairs.begin(), pairs.end(), [](const PairSample& p) { return p.dist == 0.0; });
    if (all_zero) {
        out.seminorm = Seminorm::zero(d);
        return out;
    }

    // Euclidean family: multi-start coordinate descent on the factor of S.
    auto eval_factor = [&](const std::vector<double>& f) { return objective_euclidean(pairs, d, f); };
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_factor;
    {
        std::vector<std::vector<double>> seeds;
        seeds.push_back(factor_of_psd(d, least_squares_quad(pairs, d)));
        seeds.push_back(std::vector<double>(static_cast<std::size_t>(d * d), 0.0));
        double ratio = 0;
        for (const auto& p : pairs) ratio = std::max(ratio, p.dist / p.norm);
        std::vector<double> diag(static_cast<std::size_t>(d * d), 0.0);
        for (int i = 0; i < d; ++i) diag[static_cast<std::size_t>(i * d + i)] = ratio;
        seeds.push_back(diag);
        for (auto& seed : seeds) {
            double cur = eval_factor(seed);
            cur = coordinate_descent(seed, cur, opts.descent_rounds, eval_factor);
            if (cur < best) {
                best = cur;
                best_factor = seed;
            }
        }
    }

    // MaxLinear family: single covector polish from the dominant direction.
    double best_ml = std::numeric_limits<double>::infinity();
    std::vector<double> ml;
    {
        std::vector<double> sym(static_cast<std::size_t>(d * d), 0.0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0;
                for (int r = 0; r < d; ++r)
                    s += best_factor[static_cast<std::size_t>(r * d + i)] * best_factor[static_cast<std::size_t>(r * d + j)];
                sym[static_cast<std::size_t>(i * d + j)] = s;
            }
        std::vector<double> evals, evecs;
        jacobi_eigen(d, sym, evals, evecs);
        int top = 0;
        for (int e = 1; e < d; ++e)
            if (evals[static_cast<std::size_t>(e)] > evals[static_cast<std::size_t>(top)]) top = e;
        ml.assign(static_cast<std::size_t>(d), 0.0);
        for (int i = 0; i < d; ++i)
            ml[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, evals[static_cast<std::size_t>(top)])) *
                                              evecs[static_cast<std::size_t>(i * d + top)];
        auto eval_ml = [&](const std::vector<double>& a) {
            return objective_max_linear(pairs, d, {a});
        };
        best_ml = eval_ml(ml);
        best_ml = coordinate_descent(ml, best_ml, opts.descent_rounds, eval_ml);
    }

    if (best_ml < best) {
        out.md_upper = best_ml / side;
        out.seminorm = Seminorm::max_linear(d, {ml});
    } else {
        out.md_upper = best / side;
        std::vector<double> sym(static_cast<std::size_t>(d * d), 0.0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0;
                for (int r = 0; r < d; ++r)
                    s += best_factor[static_cast<std::size_t>(r * d + i)] * best_factor[static_cast<std::size_t>(r * d + j)];
                sym[static_cast<std::size_t>(i * d + j)] = s;
            }
        out.seminorm = Seminorm::euclidean(d, sym);
    }

    out.md_lower = seminorm_lower_bound(pairs, d, opts.lp_tol) / side;
    out.md_lower = std::min(out.md_lower, out.md_upper);
    return out;
}

std::vector<MdResult> md_profile(const SampledMap& map, int maxlevel, const MdFitOptions& opts, int threads) {
    if (maxlevel >= map.depth()) throw ArgumentError("md profile level must stay below the lattice depth");
    struct Slot {
        int level;
        std::size_t raster;
    };
    std::vector<Slot> slots;
    for (int level = 0; level <= maxlevel; ++level) {
        std::size_t count = std::size_t{1} << (map.dim() * level);
        for (std::size_t r = 0; r < count; ++r) slots.push_back({level, r});
    }
    std::vector<MdResult> table(slots.size());
    parallel_for(slots.size(), threads, [&](std::size_t i) {
        CubeId cube{slots[i].level, map.dim(), {}};
        std::size_t rest = slots[i].raster;
        int side = 1 << slots[i].level;
        for (int a = 0; a < map.dim(); ++a) {
            cube.index[a] = static_cast<std::int32_t>(rest % static_cast<std::size_t>(side));
            rest /= static_cast<std::size_t>(side);
        }
        table[i] = fit_seminorm(map, cube, opts);
    });
    return table;
}

double exceedance_volume(std::span<const MdResult> table, double eps) {
    double vol = 0;
    for (const auto& r : table)
        if (r.md_upper > eps) vol += cube_measure(r.cube);
    return vol;
}

NormBoundReport norm_bound_check(const SampledMap& map, const MdResult& fit, double eps, const MdFitOptions& opts) {
    if (fit.md_upper >= eps) throw StateError("norm bound check requires md_upper < eps");
    auto pairs = sample_pairs(map, fit.cube, opts);
    double side = fit.cube.side();
    double cap = opts.c0 * side;
    // the unit-Lipschitz bound, rescaled through f / L for L-Lipschitz maps
    double lip = std::max(1.0, map.declared_lipschitz());
    NormBoundReport rep;
    rep.worst_slack = std::numeric_limits<double>::infinity();
    for (const auto& p : pairs) {
        if (p.norm >= cap) continue;
        double val = fit.seminorm(std::span<const double>(p.delta.data(), static_cast<std::size_t>(map.dim())));
        double slack = lip * p.norm + opts.c0 * eps * side - val;
        rep.worst_slack = std::min(rep.worst_slack, slack);
        ++rep.checked;
    }
    if (rep.checked == 0) rep.worst_slack = 0;
    rep.holds = rep.worst_slack >= -1e-12;
    return rep;
}

}  // namespace mapcontent
