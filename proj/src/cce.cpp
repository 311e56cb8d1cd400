// cce.cpp — Cluster materialization, the recursive CCE product, and the
// exact full-bath oracle.

#include "qcce/cce.hpp"

#include <map>

namespace qcce::cce {

namespace {

using detail::MeanField;

std::vector<int> cluster_dims(const ConditionalHamiltonian& ch, const Cluster& cluster) {
    std::vector<int> dims;
    dims.reserve(cluster.members.size());
    for (int j : cluster.members) {
        dims.push_back(ch.bath->sites[static_cast<size_t>(j)].dim());
    }
    return dims;
}

std::int64_t total_dim(const std::vector<int>& dims) {
    std::int64_t total = 1;
    for (int d : dims) {
        total *= d;
        if (total > 16384) {
            throw ConfigError("cluster dimension exceeds the 2^14 guard");
        }
    }
    return total;
}

// Oriented in-cluster coupling tensor, I_j on the left.
Mat3 oriented_pair_coupling(const ConditionalHamiltonian& ch, int j, int l) {
    return j < l ? ch.pair_coupling_full(j, l) : Mat3(ch.pair_coupling_full(l, j).transpose());
}

// Tensor-index strides: site 0 is the most significant digit, matching the
// Kronecker convention in spinops.
std::vector<std::int64_t> strides_for(const std::vector<int>& dims) {
    std::vector<std::int64_t> strides(dims.size(), 1);
    for (std::size_t k = dims.size(); k-- > 1;) {
        strides[k - 1] = strides[k] * dims[k];
    }
    return strides;
}

// Base indices with the given sites' digits zeroed: every other site's digit
// runs over its full range.
std::vector<std::int64_t> environment_bases(const std::vector<int>& dims,
                                            const std::vector<std::int64_t>& strides,
                                            std::initializer_list<std::size_t> active) {
    std::vector<std::int64_t> bases{0};
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (std::find(active.begin(), active.end(), k) != active.end()) continue;
        std::vector<std::int64_t> next;
        next.reserve(bases.size() * static_cast<std::size_t>(dims[k]));
        for (std::int64_t b : bases) {
            for (int digit = 0; digit < dims[k]; ++digit) next.push_back(b + digit * strides[k]);
        }
        bases = std::move(next);
    }
    return bases;
}

void add_one_site(Matrix& h, const Matrix& op, std::size_t p, const std::vector<int>& dims,
                  const std::vector<std::int64_t>& strides) {
    const int d = dims[p];
    const auto bases = environment_bases(dims, strides, {p});
    for (std::int64_t base : bases) {
        for (int r = 0; r < d; ++r) {
            for (int c = 0; c < d; ++c) {
                const cxd v = op(r, c);
                if (v != cxd(0.0, 0.0)) h(base + r * strides[p], base + c * strides[p]) += v;
            }
        }
    }
}

// op acts on the joint (dims[p] * dims[q]) space with p's digit most
// significant.
void add_two_site(Matrix& h, const Matrix& op, std::size_t p, std::size_t q,
                  const std::vector<int>& dims, const std::vector<std::int64_t>& strides) {
    const int dp = dims[p], dq = dims[q];
    const auto bases = environment_bases(dims, strides, {p, q});
    for (std::int64_t base : bases) {
        for (int rp = 0; rp < dp; ++rp) {
            for (int rq = 0; rq < dq; ++rq) {
                const std::int64_t row = base + rp * strides[p] + rq * strides[q];
                for (int cp = 0; cp < dp; ++cp) {
                    for (int cq = 0; cq < dq; ++cq) {
                        const cxd v = op(rp * dq + rq, cp * dq + cq);
                        if (v != cxd(0.0, 0.0)) {
                            h(row, base + cp * strides[p] + cq * strides[q]) += v;
                        }
                    }
                }
            }
        }
    }
}

Matrix cluster_density(const BathState& state, const Cluster& cluster) {
    Matrix rho = Matrix::Identity(1, 1);
    for (int j : cluster.members) {
        rho = spinops::kron(rho, state.site_density[static_cast<size_t>(j)]);
    }
    return rho;
}

} // namespace

Matrix materialize_cluster(const ConditionalHamiltonian& ch, const Cluster& cluster,
                           const detail::MeanField& mf) {
    const std::vector<int> dims = cluster_dims(ch, cluster);
    const std::int64_t total = total_dim(dims);
    const auto& sites = ch.bath->sites;

    double offset = ch.offset;
    if (!mf.trivial) {
        // Keep only the scalar terms with no in-cluster participant.
        double in_cluster = 0.0, cross = 0.0, in_pairs = 0.0;
        for (int j : cluster.members) {
            in_cluster += ch.site_field(j).dot(mf.mean[static_cast<size_t>(j)]) +
                          ch.on_site_quadratic_scalar(j, mf.mean[static_cast<size_t>(j)]);
            cross += mf.mean[static_cast<size_t>(j)].dot(mf.g[static_cast<size_t>(j)]);
        }
        for (size_t p = 0; p < cluster.members.size(); ++p) {
            for (size_t q = p + 1; q < cluster.members.size(); ++q) {
                const int j = cluster.members[p], l = cluster.members[q];
                in_pairs += mf.mean[static_cast<size_t>(j)].dot(
                    ch.pair_coupling_full(j, l) * mf.mean[static_cast<size_t>(l)]);
            }
        }
        offset += mf.total_scalar - in_cluster - cross + in_pairs;
    }

    Matrix h = offset * Matrix::Identity(total, total);
    const auto strides = strides_for(dims);

    std::vector<spinops::SpinMatrixSet> spins;
    spins.reserve(cluster.members.size());
    for (int j : cluster.members) spins.push_back(spinops::spin_matrices(sites[static_cast<size_t>(j)].s));
    auto axis = [&](std::size_t p, int mu) -> const Matrix& {
        return mu == 0 ? spins[p].sx : mu == 1 ? spins[p].sy : spins[p].sz;
    };

    for (size_t p = 0; p < cluster.members.size(); ++p) {
        const int j = cluster.members[p];

        Vec3 f = ch.site_field(j);
        if (!mf.trivial) {
            f += mf.g[static_cast<size_t>(j)];
            for (size_t q = 0; q < cluster.members.size(); ++q) {
                if (q == p) continue;
                const int l = cluster.members[q];
                f -= oriented_pair_coupling(ch, j, l) * mf.mean[static_cast<size_t>(l)];
            }
        }

        Matrix on_site = Matrix::Zero(dims[p], dims[p]);
        for (int mu = 0; mu < 3; ++mu) on_site += f(mu) * axis(p, mu);
        const effective::Mat3c quad = ch.on_site_quadratic(j);
        if (quad.cwiseAbs().maxCoeff() > 0.0) {
            for (int mu = 0; mu < 3; ++mu)
                for (int nu = 0; nu < 3; ++nu)
                    if (quad(mu, nu) != cxd(0.0, 0.0)) on_site += quad(mu, nu) * axis(p, mu) * axis(p, nu);
        }
        add_one_site(h, on_site, p, dims, strides);
    }

    for (size_t p = 0; p < cluster.members.size(); ++p) {
        const int j = cluster.members[p];
        for (size_t q = p + 1; q < cluster.members.size(); ++q) {
            const int l = cluster.members[q];
            const Mat3 k = ch.pair_coupling_full(j, l);
            Matrix joint = Matrix::Zero(dims[p] * dims[q], dims[p] * dims[q]);
            for (int mu = 0; mu < 3; ++mu) {
                for (int nu = 0; nu < 3; ++nu) {
                    if (k(mu, nu) == 0.0) continue;
                    joint += k(mu, nu) * spinops::kron(axis(p, mu), axis(q, nu));
                }
            }
            add_two_site(h, joint, p, q, dims, strides);
        }
    }

    const double resid = (h - h.adjoint()).norm();
    if (resid > 1e-12 * std::max(h.norm(), 1.0)) {
        throw NumericalError("materialize_cluster: assembled bath operator is not Hermitian");
    }
    return 0.5 * (h + h.adjoint());
}

namespace {

// Binary search in the canonically sorted cluster list.
std::ptrdiff_t find_cluster(const std::vector<Cluster>& clusters, const Cluster& target) {
    const auto it = std::lower_bound(clusters.begin(), clusters.end(), target);
    if (it != clusters.end() && it->members == target.members) {
        return it - clusters.begin();
    }
    return -1;
}

void check_closure(const std::vector<Cluster>& clusters) {
    Cluster sub;
    for (const Cluster& c : clusters) {
        if (c.order() < 2) continue;
        sub.members.resize(c.members.size() - 1);
        for (size_t skip = 0; skip < c.members.size(); ++skip) {
            size_t w = 0;
            for (size_t r = 0; r < c.members.size(); ++r) {
                if (r != skip) sub.members[w++] = c.members[r];
            }
            if (find_cluster(clusters, sub) < 0) {
                std::string what = "cce_coherence: cluster family is not closed under subsets; {";
                for (size_t r = 0; r < sub.members.size(); ++r) {
                    what += (r ? "," : "") + std::to_string(sub.members[r]);
                }
                throw ClusterClosureError(what + "} is missing");
            }
        }
    }
}

// Proper nonempty subsets of a cluster, as indices into the sorted list.
std::vector<std::size_t> subset_indices(const std::vector<Cluster>& clusters, const Cluster& c) {
    std::vector<std::size_t> out;
    const int n = c.order();
    Cluster sub;
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        sub.members.clear();
        for (int b = 0; b < n; ++b) {
            if (mask & (1u << b)) sub.members.push_back(c.members[static_cast<size_t>(b)]);
        }
        const std::ptrdiff_t idx = find_cluster(clusters, sub);
        if (idx < 0) throw ClusterClosureError("cce_coherence: missing sub-cluster");
        out.push_back(static_cast<std::size_t>(idx));
    }
    return out;
}

} // namespace

CoherenceTrace cce_coherence(const ConditionalHamiltonian& ha, const ConditionalHamiltonian& hb,
                             const std::vector<Cluster>& clusters_in, const PulseSequence& pulses,
                             const std::vector<double>& times, const BathState& bath_state,
                             int order, const CceOptions& options) {
    if (ha.n_bath() != hb.n_bath()) {
        throw ShapeError("cce_coherence: conditional Hamiltonians disagree on bath size");
    }
    if (order < 1) throw ConfigError("cce_coherence: order must be >= 1");
    if (times.empty()) throw ConfigError("cce_coherence: empty time grid");
    bath_state.validate(ha.bath->sites);

    const int n_bath = ha.n_bath();
    std::vector<Cluster> clusters;
    clusters.reserve(clusters_in.size());
    for (const Cluster& c : clusters_in) {
        validate_cluster(c, n_bath);
        if (c.order() >= 1 && c.order() <= order) clusters.push_back(c);
    }
    std::sort(clusters.begin(), clusters.end());
    clusters.erase(std::unique(clusters.begin(), clusters.end()), clusters.end());
    check_closure(clusters);

    const MeanField mfa = detail::build_mean_field(ha, bath_state);
    const MeanField mfb = detail::build_mean_field(hb, bath_state);
    const bool mixed = bath_state.is_maximally_mixed();
    const int threads = parallel::resolve_threads(options.threads);
    const std::size_t n_times = times.size();
    const double division_guard =
        options.division_guard >= 0.0 ? options.division_guard
                                      : (order >= n_bath ? 1e-12 : 5e-2);

    // Empty-cluster factor.
    const Cluster empty{};
    const std::vector<cxd> tilde0 =
        cluster_coherence(materialize_cluster(ha, empty, mfa), materialize_cluster(hb, empty, mfb),
                          pulses, times, nullptr, 1);

    std::vector<cxd> product = tilde0;
    std::vector<std::vector<cxd>> tilde(clusters.size());
    long guards = 0;

    struct Slot {
        std::vector<cxd> contribution;
        long guards = 0;
    };

    auto evaluate_cluster = [&](std::size_t idx, Slot& slot, int inner_threads) {
        const Cluster& c = clusters[idx];
        const Matrix h_alpha = materialize_cluster(ha, c, mfa);
        const Matrix h_beta = materialize_cluster(hb, c, mfb);
        Matrix rho;
        const Matrix* rho_ptr = nullptr;
        if (!mixed) {
            rho = cluster_density(bath_state, c);
            rho_ptr = &rho;
        }
        std::vector<cxd> l_c = cluster_coherence(h_alpha, h_beta, pulses, times, rho_ptr,
                                                 inner_threads);
        const std::vector<std::size_t> subs = subset_indices(clusters, c);
        slot.contribution.resize(n_times);
        slot.guards = 0;
        for (std::size_t t = 0; t < n_times; ++t) {
            cxd den = tilde0[t];
            bool guarded = std::abs(den) < division_guard;
            if (!guarded) {
                for (std::size_t s : subs) {
                    const cxd factor = tilde[s][t];
                    if (std::abs(factor) < division_guard) {
                        guarded = true;
                        break;
                    }
                    den *= factor;
                }
            }
            if (guarded || std::abs(den) < division_guard) {
                slot.contribution[t] = cxd(1.0, 0.0);
                ++slot.guards;
            } else {
                slot.contribution[t] = l_c[t] / den;
            }
        }
    };

    std::size_t begin = 0;
    while (begin < clusters.size()) {
        std::size_t end = begin;
        while (end < clusters.size() && clusters[end].order() == clusters[begin].order()) ++end;
        const int size_order = clusters[begin].order();
        const bool keep = size_order < order; // needed as a future denominator

        for (std::size_t chunk_begin = begin; chunk_begin < end;
             chunk_begin += options.chunk_clusters) {
            const std::size_t chunk_end = std::min(end, chunk_begin + options.chunk_clusters);
            std::vector<Slot> slots(chunk_end - chunk_begin);

            // Parallelize across clusters whenever the chunk keeps every
            // worker busy; only leftover large clusters switch to a parallel
            // time loop.
            std::vector<std::size_t> across_clusters, across_time;
            for (std::size_t i = chunk_begin; i < chunk_end; ++i) {
                (total_dim(cluster_dims(ha, clusters[i])) >= 64 ? across_time : across_clusters)
                    .push_back(i);
            }
            if (across_time.size() >= static_cast<std::size_t>(threads)) {
                across_clusters.insert(across_clusters.end(), across_time.begin(),
                                       across_time.end());
                across_time.clear();
            }
            parallel::parallel_for(
                across_clusters.size(),
                [&](std::size_t w) {
                    evaluate_cluster(across_clusters[w], slots[across_clusters[w] - chunk_begin], 1);
                },
                threads);
            for (std::size_t i : across_time) {
                evaluate_cluster(i, slots[i - chunk_begin], threads);
            }

            // Deterministic fold in canonical cluster order.
            for (std::size_t i = chunk_begin; i < chunk_end; ++i) {
                Slot& slot = slots[i - chunk_begin];
                for (std::size_t t = 0; t < n_times; ++t) product[t] *= slot.contribution[t];
                guards += slot.guards;
                if (keep) tilde[i] = std::move(slot.contribution);
            }
        }
        begin = end;
    }

    TraceMeta meta;
    meta.cce_order = order;
    meta.pair_cutoff = options.pair_cutoff;
    meta.seed = options.seed;
    meta.pulses_k = pulses.k;
    meta.division_guards = guards;
    // Truncated products can overshoot 1 without bound where a
    // strongly-coupled sub-cluster loses coherence (the expansion is not
    // valid there); only the exact regime is held to the contractive bound.
    const double magnitude_tolerance =
        order >= n_bath ? 1e-9 : std::numeric_limits<double>::infinity();
    return make_trace(times, std::move(product), {ha.state_index, hb.state_index}, meta,
                      magnitude_tolerance);
}

CoherenceTrace exact_coherence(const ConditionalHamiltonian& ha, const ConditionalHamiltonian& hb,
                               const model::SpinModel& m, const PulseSequence& pulses,
                               const std::vector<double>& times, const BathState& bath_state,
                               int threads) {
    const auto n = static_cast<int>(m.bath_sites.size());
    if (ha.n_bath() != n || hb.n_bath() != n) {
        throw ShapeError("exact_coherence: model and conditional Hamiltonians disagree");
    }
    bath_state.validate(ha.bath->sites);

    Cluster all;
    all.members.resize(static_cast<size_t>(n));
    std::iota(all.members.begin(), all.members.end(), 0);
    total_dim(cluster_dims(ha, all)); // dimension guard

    // No out-of-cluster spins, so the mean field never enters.
    const MeanField trivial;
    const Matrix h_alpha = materialize_cluster(ha, all, trivial);
    const Matrix h_beta = materialize_cluster(hb, all, trivial);
    Matrix rho;
    const Matrix* rho_ptr = nullptr;
    if (!bath_state.is_maximally_mixed()) {
        rho = cluster_density(bath_state, all);
        rho_ptr = &rho;
    }
    std::vector<cxd> values = cluster_coherence(h_alpha, h_beta, pulses, times, rho_ptr,
                                                parallel::resolve_threads(threads));

    TraceMeta meta;
    meta.cce_order = n;
    meta.pulses_k = pulses.k;
    return make_trace(times, std::move(values), {ha.state_index, hb.state_index}, meta);
}

} // namespace qcce::cce
