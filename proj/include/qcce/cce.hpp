// cce.hpp — The decoherence engine: pulse sequences, per-cluster coherence
// factors, the recursive cluster-correlation expansion, and an exact
// small-bath oracle.
//
// Per-cluster evaluation works in the eigenbasis of the beta-conditioned
// Hamiltonian. With W = Vb^dag Va and diagonal phase matrices Da, Db, the
// k-pulse block propagator is G = (Db Z)^k, Z = W Da W^dag, and for the
// maximally mixed bath state
//   L(t) = (1/d) sum_{pq} |G_qp|^2 exp(i (lb_p - lb_q) tau),
// one small matrix product per time point.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "qcce/effective.hpp"
#include "qcce/errors.hpp"
#include "qcce/model.hpp"
#include "qcce/parallel.hpp"
#include "qcce/spinops.hpp"

namespace qcce::cce {

using cxd = std::complex<double>;
using effective::ConditionalHamiltonian;
using model::Mat3;
using model::Vec3;
using spinops::Matrix;

// --------------------------- pulse sequences ---------------------------------

// k instantaneous pi pulses. The default schedule is the uniform CPMG rule:
// 2k equal free segments of t/(2k), the conditional Hamiltonians alternating
// from H^alpha (for U^alpha). k = 1 is the Hahn echo (free t/2, swap, free
// t/2); k = 0 is a single free evolution. Arbitrary schedules are accepted
// as explicit segment fractions (even count, non-negative, summing to 1).
struct PulseSequence {
    int k = 1;
    std::vector<double> segment_fractions; // empty => uniform

    static PulseSequence free_induction() { return PulseSequence{0, {}}; }
    static PulseSequence hahn() { return PulseSequence{1, {}}; }
    static PulseSequence cpmg(int pulses) {
        if (pulses < 0) throw ConfigError("PulseSequence: k must be >= 0");
        return PulseSequence{pulses, {}};
    }
    static PulseSequence explicit_segments(std::vector<double> fractions) {
        if (fractions.empty() || fractions.size() % 2 != 0) {
            throw ConfigError("PulseSequence: explicit schedules need an even, nonzero segment count");
        }
        double sum = 0.0;
        for (double f : fractions) {
            if (f < 0.0) throw ConfigError("PulseSequence: negative segment fraction");
            sum += f;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw ConfigError("PulseSequence: segment fractions must sum to 1");
        }
        PulseSequence out;
        out.k = static_cast<int>(fractions.size() / 2);
        out.segment_fractions = std::move(fractions);
        return out;
    }

    bool uniform() const { return segment_fractions.empty(); }

    // Segment lengths for total time t; they sum to t exactly.
    std::vector<double> segments(double t) const {
        if (k == 0) return {t};
        const size_t n = static_cast<size_t>(2 * k);
        std::vector<double> out(n);
        double used = 0.0;
        for (size_t j = 0; j + 1 < n; ++j) {
            out[j] = uniform() ? t / static_cast<double>(n) : segment_fractions[j] * t;
            used += out[j];
        }
        out[n - 1] = t - used;
        return out;
    }
};

// --------------------------- clusters and bath states ------------------------

struct Cluster {
    std::vector<int> members; // strictly ascending

    int order() const { return static_cast<int>(members.size()); }

    bool operator==(const Cluster& other) const { return members == other.members; }
    bool operator<(const Cluster& other) const {
        if (members.size() != other.members.size()) return members.size() < other.members.size();
        return members < other.members;
    }
};

inline void validate_cluster(const Cluster& c, int n_bath) {
    for (size_t i = 0; i < c.members.size(); ++i) {
        if (c.members[i] < 0 || c.members[i] >= n_bath) {
            throw ConfigError("Cluster: member index out of range");
        }
        if (i > 0 && c.members[i] <= c.members[i - 1]) {
            throw ConfigError("Cluster: members must be strictly ascending");
        }
    }
}

// Product state of the bath. Empty per-site list means maximally mixed
// (identity / dim on every site).
struct BathState {
    std::vector<Matrix> site_density;

    static BathState maximally_mixed() { return {}; }
    bool is_maximally_mixed() const { return site_density.empty(); }

    void validate(const std::vector<model::SpinSite>& sites) const {
        if (is_maximally_mixed()) return;
        if (site_density.size() != sites.size()) {
            throw ConfigError("BathState: one density matrix per bath site required");
        }
        for (size_t j = 0; j < sites.size(); ++j) {
            const Matrix& rho = site_density[j];
            if (rho.rows() != rho.cols() || rho.rows() != sites[j].dim()) {
                throw ShapeError("BathState: density matrix dimension mismatch at site " +
                                 std::to_string(j));
            }
            spinops::require_hermitian(rho, 1e-10, "BathState");
            if (std::abs(rho.trace().real() - 1.0) > 1e-12 || std::abs(rho.trace().imag()) > 1e-12) {
                throw NumericalError("BathState: density matrix at site " + std::to_string(j) +
                                     " is not unit trace");
            }
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()));
            if (es.eigenvalues().minCoeff() < -1e-12) {
                throw NumericalError("BathState: density matrix at site " + std::to_string(j) +
                                     " is not positive semidefinite");
            }
        }
    }

    // <I^mu> on site j.
    Vec3 site_mean(int j, const spinops::SpinMatrixSet& spins) const {
        if (is_maximally_mixed()) return Vec3::Zero();
        const Matrix& rho = site_density[static_cast<size_t>(j)];
        Vec3 out;
        const Matrix* axes[3] = {&spins.sx, &spins.sy, &spins.sz};
        for (int mu = 0; mu < 3; ++mu) out(mu) = (rho * *axes[mu]).trace().real();
        return out;
    }
};

// --------------------------- coherence trace ---------------------------------

struct TraceMeta {
    int cce_order = 0;
    double pair_cutoff = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
    int pulses_k = 0;
    long division_guards = 0;   // recursion denominators replaced by 1
    double max_overshoot = 0.0; // max(|L|) - 1 when positive: truncation artifact
};

struct CoherenceTrace {
    std::vector<double> times; // us, ascending
    std::vector<cxd> values;   // L(t)
    std::pair<int, int> pair{0, 0};
    TraceMeta meta;
};

// Exact traces are contractive and must stay inside the unit disk to
// rounding; a truncated cluster product is not a traced unitary and can
// transiently overshoot 1 where a strongly-coupled sub-cluster loses
// coherence. Callers pass the bound appropriate to the regime; the
// overshoot, if any, is recorded in the metadata.
inline CoherenceTrace make_trace(std::vector<double> times, std::vector<cxd> values,
                                 std::pair<int, int> pair, TraceMeta meta,
                                 double magnitude_tolerance = 1e-9) {
    if (times.size() != values.size() || times.empty()) {
        throw ConfigError("CoherenceTrace: times/values size mismatch");
    }
    for (size_t i = 1; i < times.size(); ++i) {
        if (times[i] <= times[i - 1]) throw ConfigError("CoherenceTrace: times must be ascending");
    }
    double max_mag = 0.0;
    for (const cxd& v : values) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
            throw NumericalError("CoherenceTrace: non-finite value");
        }
        max_mag = std::max(max_mag, std::abs(v));
    }
    if (max_mag > 1.0 + magnitude_tolerance) {
        throw NumericalError("CoherenceTrace: |L| exceeds 1 beyond tolerance (" +
                             std::to_string(max_mag) + ")");
    }
    meta.max_overshoot = std::max(0.0, max_mag - 1.0);
    if (times.front() == 0.0 && std::abs(values.front() - 1.0) > 1e-12) {
        throw NumericalError("CoherenceTrace: L(0) deviates from 1");
    }
    CoherenceTrace out;
    out.times = std::move(times);
    out.values = std::move(values);
    out.pair = pair;
    out.meta = meta;
    return out;
}

// --------------------------- cluster enumeration -----------------------------

struct PairCutoff {
    double distance = std::numeric_limits<double>::infinity(); // Angstrom
    double min_coupling = 0.0; // rad/us; 0 disables the coupling criterion
};

// All singletons, all pairs passing the cutoff, and for higher orders every
// connected subset of the cutoff adjacency graph (ESU enumeration, each
// subset exactly once). Deterministic: sorted by (order, members).
inline std::vector<Cluster> enumerate_clusters(const model::SpinModel& m, int order,
                                               PairCutoff cutoff = {}) {
    if (order < 1) throw ConfigError("enumerate_clusters: order must be >= 1");
    const auto n = static_cast<int>(m.bath_sites.size());

    std::vector<std::vector<int>> adjacency(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dist = (m.bath_sites[static_cast<size_t>(i)].position -
                                 m.bath_sites[static_cast<size_t>(j)].position).norm();
            if (dist > cutoff.distance) continue;
            if (cutoff.min_coupling > 0.0) {
                const Mat3 coupling = model::bath_pair_tensor(m, i, j);
                if (coupling.cwiseAbs().maxCoeff() < cutoff.min_coupling) continue;
            }
            adjacency[static_cast<size_t>(i)].push_back(j);
            adjacency[static_cast<size_t>(j)].push_back(i);
        }
    }

    constexpr std::size_t max_clusters = 5'000'000;
    std::vector<Cluster> out;
    std::vector<int> subset;
    // cover[u] > 0 while u is in the subset or adjacent to it; candidates for
    // extension must be uncovered when first seen (Wernicke's exclusive
    // neighborhood), which guarantees each connected subset appears once.
    std::vector<int> cover(static_cast<size_t>(n), 0);

    auto emit = [&](const std::vector<int>& members) {
        if (out.size() >= max_clusters) {
            throw ConfigError("enumerate_clusters: more than 5e6 clusters; tighten the cutoff");
        }
        Cluster c;
        c.members = members;
        std::sort(c.members.begin(), c.members.end());
        out.push_back(std::move(c));
    };

    auto mark = [&](int w, int delta) {
        cover[static_cast<size_t>(w)] += delta;
        for (int u : adjacency[static_cast<size_t>(w)]) cover[static_cast<size_t>(u)] += delta;
    };

    auto extend = [&](auto&& self, int root, std::vector<int> ext) -> void {
        if (static_cast<int>(subset.size()) >= order) return;
        while (!ext.empty()) {
            const int w = ext.back();
            ext.pop_back();
            // candidates beyond w: the remaining extension plus w's exclusive
            // neighbors (uncovered, above the root)
            std::vector<int> next_ext = ext;
            for (int u : adjacency[static_cast<size_t>(w)]) {
                if (u > root && cover[static_cast<size_t>(u)] == 0) next_ext.push_back(u);
            }
            subset.push_back(w);
            mark(w, +1);
            emit(subset);
            self(self, root, next_ext);
            mark(w, -1);
            subset.pop_back();
        }
    };

    for (int v = 0; v < n; ++v) {
        subset.assign(1, v);
        std::fill(cover.begin(), cover.end(), 0);
        mark(v, +1);
        emit(subset);
        std::vector<int> ext;
        for (int u : adjacency[static_cast<size_t>(v)]) {
            if (u > v) ext.push_back(u);
        }
        extend(extend, v, ext);
        mark(v, -1);
    }

    std::sort(out.begin(), out.end());
    return out;
}

// --------------------------- cluster Hamiltonians ----------------------------

namespace detail {

// Aggregated mean-field data for one conditional Hamiltonian; trivial for
// the maximally mixed bath state.
struct MeanField {
    bool trivial = true;
    std::vector<Vec3> mean;   // <I_j>
    std::vector<Vec3> g;      // sum_{m != j} K^{jm} <I_m>
    double total_scalar = 0.0; // all-site scalar contraction
    double pair_scalar = 0.0;  // sum_{m<m'} <I_m>.K.<I_m'>
};

inline MeanField build_mean_field(const ConditionalHamiltonian& ch, const BathState& state) {
    MeanField mf;
    if (state.is_maximally_mixed()) return mf;
    mf.trivial = false;
    const int n = ch.n_bath();
    const auto& sites = ch.bath->sites;
    mf.mean.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const auto spins = spinops::spin_matrices(sites[static_cast<size_t>(j)].s);
        mf.mean[static_cast<size_t>(j)] = state.site_mean(j, spins);
    }
    mf.g.assign(static_cast<size_t>(n), Vec3::Zero());
    for (int j = 0; j < n; ++j) {
        for (int l = 0; l < n; ++l) {
            if (l == j) continue;
            const Mat3 k = j < l ? ch.pair_coupling_full(j, l)
                                 : ch.pair_coupling_full(l, j).transpose();
            mf.g[static_cast<size_t>(j)] += k * mf.mean[static_cast<size_t>(l)];
        }
    }
    double scalar = 0.0, pair_scalar = 0.0;
    for (int j = 0; j < n; ++j) {
        const Vec3 f = ch.bath->zeeman[static_cast<size_t>(j)] +
                       ch.first_order_fields[static_cast<size_t>(j)];
        scalar += f.dot(mf.mean[static_cast<size_t>(j)]);
        scalar += ch.on_site_quadratic_scalar(j, mf.mean[static_cast<size_t>(j)]);
    }
    for (int j = 0; j < n; ++j) {
        for (int l = j + 1; l < n; ++l) {
            pair_scalar += mf.mean[static_cast<size_t>(j)].dot(
                ch.pair_coupling_full(j, l) * mf.mean[static_cast<size_t>(l)]);
        }
    }
    mf.total_scalar = scalar + pair_scalar;
    mf.pair_scalar = pair_scalar;
    return mf;
}

} // namespace detail

// Conditional Hamiltonian restricted to a cluster: out-of-cluster spins are
// replaced by their mean-field averages (identically zero for the maximally
// mixed state), all scalar offsets included.
Matrix materialize_cluster(const ConditionalHamiltonian& ch, const Cluster& cluster,
                           const detail::MeanField& mf);

inline std::pair<Matrix, Matrix> cluster_hamiltonians(const ConditionalHamiltonian& ha,
                                                      const ConditionalHamiltonian& hb,
                                                      const Cluster& cluster,
                                                      const BathState& bath_state) {
    validate_cluster(cluster, ha.n_bath());
    bath_state.validate(ha.bath->sites);
    const auto mfa = detail::build_mean_field(ha, bath_state);
    const auto mfb = detail::build_mean_field(hb, bath_state);
    return {materialize_cluster(ha, cluster, mfa), materialize_cluster(hb, cluster, mfb)};
}

// --------------------------- evolution kernel --------------------------------

namespace detail {

template <int N>
void kernel_run(const Matrix& ha, const Matrix& hb, const PulseSequence& pulses,
                const std::vector<double>& times, const Matrix* rho, int time_threads,
                cxd* out) {
    using Mat = Eigen::Matrix<cxd, N, N>;
    using RMat = Eigen::Matrix<double, N, N>;
    using CVec = Eigen::Matrix<cxd, N, 1>;
    using RVec = Eigen::Matrix<double, N, 1>;
    const Eigen::Index d = ha.rows();

    Eigen::SelfAdjointEigenSolver<Mat> esa(Mat(0.5 * (ha + ha.adjoint())));
    Eigen::SelfAdjointEigenSolver<Mat> esb(Mat(0.5 * (hb + hb.adjoint())));
    if (esa.info() != Eigen::Success || esb.info() != Eigen::Success) {
        throw NumericalError("cluster kernel: eigensolver failed");
    }
    const auto& la = esa.eigenvalues();
    const auto& lb = esb.eigenvalues();
    const Mat w = esb.eigenvectors().adjoint() * esa.eigenvectors();

    const bool mixed = (rho == nullptr);
    Mat rho_w;
    if (!mixed) rho_w = esb.eigenvectors().adjoint() * (*rho) * esb.eigenvectors();

    RMat w_abs2;
    if (pulses.k == 0 && mixed) w_abs2 = w.cwiseAbs2();

    const int k = pulses.k;
    const double inv_d = 1.0 / static_cast<double>(d);

    // Per-worker scratch; one matrix product per time point dominates, so
    // temporaries are reused across the grid.
    struct Scratch {
        Mat scaled, z, g, tmp;
        RMat g2;
        CVec pa, pb;
        RVec ar, ai, sr, si;

        explicit Scratch(Eigen::Index dim)
            : scaled(dim, dim), z(dim, dim), g(dim, dim), tmp(dim, dim), g2(dim, dim), pa(dim),
              pb(dim), ar(dim), ai(dim), sr(dim), si(dim) {}
    };

    auto fill_phases = [&](const auto& evals, double dt, CVec& v) {
        for (Eigen::Index i = 0; i < d; ++i) v(i) = std::polar(1.0, -evals(i) * dt);
    };

    auto eval_point = [&](std::size_t ti, Scratch& s) {
        const double t = times[ti];
        if (t == 0.0) {
            out[ti] = cxd(1.0, 0.0);
            return;
        }
        if (k == 0) {
            fill_phases(la, t, s.pa);
            fill_phases(lb, t, s.pb);
            if (mixed) {
                // L = (1/d) sum_{p,r} |W_pr|^2 e^{i lb_p t} e^{-i la_r t}
                s.sr.noalias() = w_abs2 * s.pa.real();
                s.si.noalias() = w_abs2 * s.pa.imag();
                double re = 0.0, im = 0.0;
                for (Eigen::Index p = 0; p < d; ++p) {
                    const double br = s.pb(p).real(), bi = -s.pb(p).imag(); // e^{+i lb_p t}
                    re += br * s.sr(p) - bi * s.si(p);
                    im += br * s.si(p) + bi * s.sr(p);
                }
                out[ti] = cxd(re, im) * inv_d;
            } else {
                s.scaled.noalias() = w * s.pa.asDiagonal();
                s.z.noalias() = s.scaled * w.adjoint();
                s.tmp.noalias() = s.z * rho_w;
                cxd acc(0.0, 0.0);
                for (Eigen::Index p = 0; p < d; ++p) acc += std::conj(s.pb(p)) * s.tmp(p, p);
                out[ti] = acc;
            }
            return;
        }

        if (pulses.uniform()) {
            const double tau = t / static_cast<double>(2 * k);
            fill_phases(la, tau, s.pa);
            fill_phases(lb, tau, s.pb);
            s.scaled.noalias() = w * s.pa.asDiagonal();
            s.z.noalias() = s.scaled * w.adjoint();
            // G = (Db Z)^k; for k = 1 the row phases have unit modulus and
            // drop out of |G_qp|^2, so Z itself carries the reduction.
            const Mat* g_ptr = &s.z;
            if (k > 1) {
                s.g = s.pb.asDiagonal() * s.z; // single block Db Z
                s.tmp = s.g;                   // accumulator
                for (int rep = 1; rep < k; ++rep) {
                    s.scaled.noalias() = s.g * s.tmp;
                    std::swap(s.scaled, s.tmp);
                }
                std::swap(s.g, s.tmp); // g := (Db Z)^k
                g_ptr = &s.g;
            }
            if (mixed) {
                // L = (1/d) sum_{pq} |G_qp|^2 e^{i(lb_p - lb_q) tau}
                s.g2 = g_ptr->cwiseAbs2();
                s.ar = s.pb.real();
                s.ai = -s.pb.imag(); // conj(pb) = e^{+i lb tau}
                s.sr.noalias() = s.g2 * s.ar;
                s.si.noalias() = s.g2 * s.ai;
                double re = 0.0, im = 0.0;
                for (Eigen::Index q = 0; q < d; ++q) {
                    re += s.ar(q) * s.sr(q) + s.ai(q) * s.si(q);
                    im += s.ar(q) * s.si(q) - s.ai(q) * s.sr(q);
                }
                out[ti] = cxd(re, im) * inv_d;
                return;
            }
            // General state: L = tr(conj(Db) G^dag Db G rho_w) with
            // G = (Db Z)^k, held in s.g (reconstructed for k = 1).
            if (k == 1) {
                s.g = s.pb.asDiagonal() * s.z;
            }
            s.tmp.noalias() = s.g * rho_w;
            cxd acc(0.0, 0.0);
            for (Eigen::Index q = 0; q < d; ++q) {
                for (Eigen::Index p = 0; p < d; ++p) {
                    // tr(conj(Db) G^dag Db  G rho) with phases folded in
                    const cxd phase = std::conj(s.pb(p)) * s.pb(q);
                    acc += phase * std::conj(s.g(q, p)) * s.tmp(q, p);
                }
            }
            out[ti] = acc;
            return;
        }

        // explicit segment schedule
        const std::vector<double> segs = pulses.segments(t);
        Mat ua_w = Mat::Identity(d, d);
        Mat ub_w = Mat::Identity(d, d);
        for (size_t j = 0; j < segs.size(); ++j) {
            fill_phases(la, segs[j], s.pa);
            fill_phases(lb, segs[j], s.pb);
            s.scaled.noalias() = w * s.pa.asDiagonal();
            s.z.noalias() = s.scaled * w.adjoint();
            if (j % 2 == 0) { // alpha segment for U^alpha, beta for U^beta
                s.tmp.noalias() = s.z * ua_w;
                ua_w = s.tmp;
                ub_w = s.pb.asDiagonal() * ub_w;
            } else {
                ua_w = s.pb.asDiagonal() * ua_w;
                s.tmp.noalias() = s.z * ub_w;
                ub_w = s.tmp;
            }
        }
        if (mixed) {
            out[ti] = (ub_w.conjugate().cwiseProduct(ua_w)).sum() * inv_d;
        } else {
            s.tmp.noalias() = ua_w * rho_w;
            out[ti] = (ub_w.conjugate().cwiseProduct(s.tmp)).sum();
        }
    };

    const int workers = std::min<int>(std::max(time_threads, 1),
                                      static_cast<int>(times.size()));
    if (workers <= 1) {
        Scratch scratch(d);
        for (std::size_t ti = 0; ti < times.size(); ++ti) eval_point(ti, scratch);
        return;
    }
    // static split: per-point cost is uniform
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    std::mutex error_mutex;
    std::exception_ptr error;
    for (int wk = 0; wk < workers; ++wk) {
        pool.emplace_back([&, wk]() {
            try {
                Scratch scratch(d);
                for (std::size_t ti = static_cast<size_t>(wk); ti < times.size();
                     ti += static_cast<size_t>(workers)) {
                    eval_point(ti, scratch);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

// Coherence factor list for one pair of cluster-restricted Hamiltonians.
// rho_cluster is the bath state restricted to the cluster space; nullptr
// means maximally mixed.
inline std::vector<cxd> cluster_coherence(const Matrix& ha, const Matrix& hb,
                                          const PulseSequence& pulses,
                                          const std::vector<double>& times,
                                          const Matrix* rho_cluster = nullptr,
                                          int time_threads = 1) {
    if (ha.rows() != ha.cols() || hb.rows() != hb.cols() || ha.rows() != hb.rows()) {
        throw ShapeError("cluster_coherence: Hamiltonian dimensions disagree");
    }
    std::vector<cxd> out(times.size());
    switch (ha.rows()) {
        case 1: detail::kernel_run<1>(ha, hb, pulses, times, rho_cluster, time_threads, out.data()); break;
        case 2: detail::kernel_run<2>(ha, hb, pulses, times, rho_cluster, time_threads, out.data()); break;
        case 4: detail::kernel_run<4>(ha, hb, pulses, times, rho_cluster, time_threads, out.data()); break;
        default:
            detail::kernel_run<Eigen::Dynamic>(ha, hb, pulses, times, rho_cluster, time_threads,
                                               out.data());
    }
    return out;
}

// --------------------------- CCE product -------------------------------------

struct CceOptions {
    int threads = 0; // 0 = auto
    // Recursion denominators with |L~_sub| below the guard mark the cluster's
    // contribution as 1. Negative = automatic: 1e-12 when the truncation
    // order covers the whole bath (the expansion telescopes exactly and
    // large intermediate factors cancel), 5e-2 for truncated runs, where a
    // sub-cluster coherence zero leaves an uncancelled, meaningless ratio.
    double division_guard = -1.0;
    double pair_cutoff = std::numeric_limits<double>::infinity(); // provenance only
    std::uint64_t seed = 0;                                       // provenance only
    std::size_t chunk_clusters = 4096;
};

CoherenceTrace cce_coherence(const ConditionalHamiltonian& ha, const ConditionalHamiltonian& hb,
                             const std::vector<Cluster>& clusters, const PulseSequence& pulses,
                             const std::vector<double>& times, const BathState& bath_state,
                             int order, const CceOptions& options = {});

// Direct evaluation on the full bath product space; the validation oracle.
CoherenceTrace exact_coherence(const ConditionalHamiltonian& ha, const ConditionalHamiltonian& hb,
                               const model::SpinModel& m, const PulseSequence& pulses,
                               const std::vector<double>& times, const BathState& bath_state,
                               int threads = 0);

} // namespace qcce::cce
