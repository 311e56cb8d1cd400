// model.hpp — Central system + bath domain model: spin sites, pairwise
// interaction tables, point-dipole tensors, and Hamiltonian assembly.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qcce/constants.hpp"
#include "qcce/errors.hpp"
#include "qcce/spinops.hpp"

namespace qcce::model {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using spinops::Matrix;

// --------------------------- sites ------------------------------------------

// One spin, system or bath. `gamma` is the gyromagnetic tensor in
// rad/(us*T); `self_tensor` is the zero-field-splitting (electronic) or
// quadrupole (nuclear) tensor in rad/us, symmetric when present.
struct SpinSite {
    Vec3 position = Vec3::Zero(); // Angstrom
    double s = 0.5;
    Mat3 gamma = Mat3::Zero();
    std::optional<Mat3> self_tensor;
    std::string species_label;

    int dim() const { return static_cast<int>(std::lround(2.0 * s)) + 1; }
};

inline SpinSite proton_site(const Vec3& position) {
    SpinSite site;
    site.position = position;
    site.s = 0.5;
    site.gamma = units::gamma_proton * Mat3::Identity();
    site.species_label = "1H";
    return site;
}

// --------------------------- interaction table ------------------------------

// Pairwise 3x3 coupling tensors in rad/us. The stored tensor multiplies the
// first index's spin on the left and the second's on the right. Same-space
// tables normalize to i < j (transposing on swap) and reject self-pairs;
// cross-space tables (system -> bath) keep indices as given.
class InteractionTable {
public:
    explicit InteractionTable(bool cross_space = false) : cross_space_(cross_space) {}

    static std::uint64_t key(int i, int j) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
               static_cast<std::uint32_t>(j);
    }

    void set(int i, int j, const Mat3& tensor) {
        if (i < 0 || j < 0) throw ConfigError("InteractionTable: negative site index");
        if (!cross_space_) {
            if (i == j) throw ConfigError("InteractionTable: self-pairs live in SpinSite::self_tensor");
            if (i > j) {
                entries_[key(j, i)] = tensor.transpose();
                return;
            }
        }
        entries_[key(i, j)] = tensor;
    }

    // Oriented lookup: get(i, j) multiplies S_i on the left.
    std::optional<Mat3> get(int i, int j) const {
        if (!cross_space_ && i > j) {
            if (auto it = entries_.find(key(j, i)); it != entries_.end()) {
                return it->second.transpose();
            }
            return std::nullopt;
        }
        if (auto it = entries_.find(key(i, j)); it != entries_.end()) return it->second;
        return std::nullopt;
    }

    bool contains(int i, int j) const { return get(i, j).has_value(); }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    bool cross_space() const { return cross_space_; }

    struct Entry {
        int i, j;
        Mat3 tensor;
    };

    // Entries sorted by (i, j); the only sanctioned iteration order.
    std::vector<Entry> sorted_entries() const {
        std::vector<Entry> out;
        out.reserve(entries_.size());
        for (const auto& [k, tensor] : entries_) {
            out.push_back(Entry{static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu), tensor});
        }
        std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        return out;
    }

    void validate_indices(int n_first, int n_second) const {
        for (const auto& [k, tensor] : entries_) {
            const int i = static_cast<int>(k >> 32);
            const int j = static_cast<int>(k & 0xffffffffu);
            if (i >= n_first || j >= n_second) {
                throw ConfigError("InteractionTable: pair (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") references a missing site");
            }
        }
    }

private:
    bool cross_space_;
    std::unordered_map<std::uint64_t, Mat3> entries_;
};

// --------------------------- point-dipole tensor ----------------------------

inline Mat3 dipolar_tensor(const Vec3& pos_i, const Vec3& pos_j, const Mat3& g_i, const Mat3& g_j) {
    const Vec3 r = pos_j - pos_i;
    const double dist = r.norm();
    if (dist < 1e-9) {
        throw SingularityError("dipolar_tensor: coincident spin positions");
    }
    const Vec3 gi_r = g_i * r;
    const Vec3 gj_r = g_j * r;
    const Mat3 tensor = g_i * g_j - 3.0 / (dist * dist) * (gi_r * gj_r.transpose());
    return units::dipole_prefactor / (dist * dist * dist) * tensor;
}

// --------------------------- spin model -------------------------------------

struct SpinModel {
    std::vector<SpinSite> system_sites;
    std::vector<SpinSite> bath_sites;
    InteractionTable system_couplings{false};      // D^{ij}
    InteractionTable bath_couplings{false};        // J^{ij}; auto entries filled on demand
    InteractionTable system_bath_couplings{true};  // A^{ij}, explicit overrides only
    bool auto_bath_couplings = true;
    bool auto_system_bath = true;
    Vec3 field = Vec3::Zero(); // Tesla
    double min_distance = 3.0; // Angstrom

    std::vector<int> system_dims() const {
        std::vector<int> dims;
        dims.reserve(system_sites.size());
        for (const auto& site : system_sites) dims.push_back(site.dim());
        return dims;
    }

    std::vector<int> bath_dims() const {
        std::vector<int> dims;
        dims.reserve(bath_sites.size());
        for (const auto& site : bath_sites) dims.push_back(site.dim());
        return dims;
    }
};

inline void validate_sites(const std::vector<SpinSite>& sites, const char* what) {
    for (size_t i = 0; i < sites.size(); ++i) {
        if (!spinops::is_half_integer(sites[i].s) || sites[i].s > 20.0) {
            throw InvalidSpinError(std::string(what) + " site " + std::to_string(i) +
                                   ": invalid spin quantum number");
        }
        if (sites[i].self_tensor) {
            const Mat3& d = *sites[i].self_tensor;
            if ((d - d.transpose()).norm() > 1e-12 * std::max(d.norm(), 1.0)) {
                throw ConfigError(std::string(what) + " site " + std::to_string(i) +
                                  ": self-interaction tensor must be symmetric");
            }
        }
    }
}

inline void validate(const SpinModel& model) {
    validate_sites(model.system_sites, "system");
    validate_sites(model.bath_sites, "bath");
    model.system_couplings.validate_indices(static_cast<int>(model.system_sites.size()),
                                            static_cast<int>(model.system_sites.size()));
    model.bath_couplings.validate_indices(static_cast<int>(model.bath_sites.size()),
                                          static_cast<int>(model.bath_sites.size()));
    model.system_bath_couplings.validate_indices(static_cast<int>(model.system_sites.size()),
                                                 static_cast<int>(model.bath_sites.size()));

    const double min_d = model.min_distance;
    auto check = [min_d](const SpinSite& a, const SpinSite& b, const std::string& label) {
        const double d = (a.position - b.position).norm();
        if (d < min_d - 1e-9) {
            throw ConfigError("SpinModel: sites " + label + " are " + std::to_string(d) +
                              " A apart, below the minimum distance " + std::to_string(min_d));
        }
    };
    for (size_t i = 0; i < model.system_sites.size(); ++i)
        for (size_t j = i + 1; j < model.system_sites.size(); ++j)
            check(model.system_sites[i], model.system_sites[j],
                  "S" + std::to_string(i) + "/S" + std::to_string(j));
    for (size_t i = 0; i < model.bath_sites.size(); ++i)
        for (size_t j = 0; j < model.system_sites.size(); ++j)
            check(model.bath_sites[i], model.system_sites[j],
                  "B" + std::to_string(i) + "/S" + std::to_string(j));
    for (size_t i = 0; i < model.bath_sites.size(); ++i)
        for (size_t j = i + 1; j < model.bath_sites.size(); ++j)
            check(model.bath_sites[i], model.bath_sites[j],
                  "B" + std::to_string(i) + "/B" + std::to_string(j));
}

// --------------------------- Hamiltonian assembly ---------------------------

// Zeeman + pairwise + self terms over the system product space, in the basis
// fixed by spinops (m descending per site, sites in declaration order).
inline Matrix build_system_hamiltonian(const SpinModel& model) {
    if (model.system_sites.empty()) {
        throw ConfigError("build_system_hamiltonian: no system sites");
    }
    const std::vector<int> dims = model.system_dims();
    std::int64_t total = 1;
    for (int d : dims) {
        total *= d;
        if (total > 4096) {
            throw ConfigError("build_system_hamiltonian: system dimension exceeds 4096");
        }
    }
    const auto n = static_cast<int>(model.system_sites.size());
    std::vector<spinops::SpinMatrixSet> spins;
    spins.reserve(model.system_sites.size());
    for (const auto& site : model.system_sites) spins.push_back(spinops::spin_matrices(site.s));

    auto site_axis = [&](int site, int axis) -> const Matrix& {
        return axis == 0 ? spins[static_cast<size_t>(site)].sx
             : axis == 1 ? spins[static_cast<size_t>(site)].sy
                         : spins[static_cast<size_t>(site)].sz;
    };

    Matrix h = Matrix::Zero(total, total);

    // Zeeman and on-site tensors, one embed per site.
    for (int i = 0; i < n; ++i) {
        const SpinSite& site = model.system_sites[static_cast<size_t>(i)];
        const Vec3 b_eff = site.gamma.transpose() * model.field;
        Matrix on_site = Matrix::Zero(dims[static_cast<size_t>(i)], dims[static_cast<size_t>(i)]);
        for (int mu = 0; mu < 3; ++mu) on_site += b_eff(mu) * site_axis(i, mu);
        if (site.self_tensor) {
            const Mat3& d = *site.self_tensor;
            for (int mu = 0; mu < 3; ++mu)
                for (int nu = 0; nu < 3; ++nu)
                    if (d(mu, nu) != 0.0) on_site += d(mu, nu) * site_axis(i, mu) * site_axis(i, nu);
        }
        h += spinops::embed(on_site, i, dims).matrix;
    }

    // Pairwise couplings, one two-site embed per tensor component.
    for (const auto& entry : model.system_couplings.sorted_entries()) {
        for (int mu = 0; mu < 3; ++mu) {
            for (int nu = 0; nu < 3; ++nu) {
                const double c = entry.tensor(mu, nu);
                if (c == 0.0) continue;
                h += c * spinops::embed_two(site_axis(entry.i, mu), entry.i,
                                            site_axis(entry.j, nu), entry.j, dims).matrix;
            }
        }
    }

    const double resid = (h - h.adjoint()).norm();
    if (resid > 1e-12 * std::max(h.norm(), 1.0)) {
        throw NumericalError("build_system_hamiltonian: assembled matrix is not Hermitian");
    }
    return h;
}

inline Mat3 bath_pair_tensor(const SpinModel& model, int i, int j) {
    if (auto t = model.bath_couplings.get(i, j)) return *t;
    if (!model.auto_bath_couplings) return Mat3::Zero();
    const auto& a = model.bath_sites[static_cast<size_t>(i)];
    const auto& b = model.bath_sites[static_cast<size_t>(j)];
    return dipolar_tensor(a.position, b.position, a.gamma, b.gamma);
}

// The bath Hamiltonian is never materialized globally; callers get the
// per-site effective Zeeman vectors plus the pairwise coupling table. The
// table holds explicit entries and the auto point-dipole pairs within the
// cutoff; pair_tensor falls back to an on-demand dipole for auto models so
// a distance cutoff truncates the cluster family, never the physics inside
// a cluster.
struct BathTerms {
    std::vector<SpinSite> sites;
    std::vector<Vec3> zeeman; // b_j = gamma_j^T B
    InteractionTable couplings{false};
    bool auto_couplings = true;
    double pair_cutoff = std::numeric_limits<double>::infinity();

    Mat3 pair_tensor(int i, int j) const {
        if (auto t = couplings.get(i, j)) return *t;
        if (!auto_couplings) return Mat3::Zero();
        const auto& a = sites[static_cast<size_t>(i)];
        const auto& b = sites[static_cast<size_t>(j)];
        return dipolar_tensor(a.position, b.position, a.gamma, b.gamma);
    }
};

inline BathTerms build_bath_hamiltonian_terms(
    const SpinModel& model,
    double pair_cutoff = std::numeric_limits<double>::infinity()) {
    if (model.bath_sites.empty()) {
        throw ConfigError("build_bath_hamiltonian_terms: empty bath");
    }
    BathTerms out;
    out.sites = model.bath_sites;
    out.auto_couplings = model.auto_bath_couplings;
    out.pair_cutoff = pair_cutoff;
    out.zeeman.reserve(model.bath_sites.size());
    for (const auto& site : model.bath_sites) {
        out.zeeman.push_back(site.gamma.transpose() * model.field);
    }
    const auto n = static_cast<int>(model.bath_sites.size());
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dist = (model.bath_sites[static_cast<size_t>(i)].position -
                                 model.bath_sites[static_cast<size_t>(j)].position).norm();
            if (dist > pair_cutoff) {
                // keep explicit entries even beyond the cutoff
                if (auto t = model.bath_couplings.get(i, j)) out.couplings.set(i, j, *t);
                continue;
            }
            out.couplings.set(i, j, bath_pair_tensor(model, i, j));
        }
    }
    return out;
}

// A^{ij} for every (system, bath) pair: explicit entries override the
// point-dipole default.
inline InteractionTable system_bath_couplings(const SpinModel& model) {
    InteractionTable out{true};
    const auto ns = static_cast<int>(model.system_sites.size());
    const auto nb = static_cast<int>(model.bath_sites.size());
    for (int i = 0; i < ns; ++i) {
        for (int j = 0; j < nb; ++j) {
            if (auto t = model.system_bath_couplings.get(i, j)) {
                out.set(i, j, *t);
            } else if (model.auto_system_bath) {
                const auto& s = model.system_sites[static_cast<size_t>(i)];
                const auto& b = model.bath_sites[static_cast<size_t>(j)];
                out.set(i, j, dipolar_tensor(s.position, b.position, s.gamma, b.gamma));
            }
        }
    }
    return out;
}

} // namespace qcce::model
