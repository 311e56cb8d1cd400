// effective.hpp — Schrieffer-Wolff conditional bath Hamiltonians: system
// eigenbasis with local spin expectations, first-order effective fields, and
// second-order induced bath-bath tensors in factorized form.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "qcce/errors.hpp"
#include "qcce/model.hpp"
#include "qcce/spinops.hpp"

namespace qcce::effective {

using cxd = std::complex<double>;
using model::Mat3;
using model::Vec3;
using spinops::Matrix;
using Mat3c = Eigen::Matrix3cd;
using Vec3c = Eigen::Vector3cd;

// --------------------------- system eigenbasis ------------------------------

struct SystemEigenbasis {
    Eigen::VectorXd energies;                          // ascending, rad/us
    Matrix states;                                     // eigenvector columns
    std::vector<Eigen::MatrixX3d> local_expectations;  // [psi](site, axis)
    std::vector<std::array<Matrix, 3>> site_ops;       // S_k^mu in the eigenbasis
    std::vector<Mat3> site_gammas;                     // rad/(us*T)

    int n_states() const { return static_cast<int>(energies.size()); }
    int n_sites() const { return static_cast<int>(site_gammas.size()); }

    Vec3 expectation(int psi, int site) const {
        return local_expectations[static_cast<size_t>(psi)].row(site).transpose();
    }

    // <psi| S_site |psi'> as a complex 3-vector.
    Vec3c matrix_element(int psi, int site, int psi_prime) const {
        Vec3c out;
        for (int mu = 0; mu < 3; ++mu) {
            out(mu) = site_ops[static_cast<size_t>(site)][static_cast<size_t>(mu)](psi, psi_prime);
        }
        return out;
    }
};

inline SystemEigenbasis diagonalize_system(const model::SpinModel& m) {
    const Matrix h = model::build_system_hamiltonian(m);
    const spinops::EighResult es = spinops::eigh(h);

    SystemEigenbasis basis;
    basis.energies = es.eigenvalues;
    basis.states = es.eigenvectors;

    const std::vector<int> dims = m.system_dims();
    const auto n_sites = static_cast<int>(m.system_sites.size());
    const int n_states = static_cast<int>(basis.energies.size());

    basis.site_ops.resize(static_cast<size_t>(n_sites));
    basis.site_gammas.reserve(static_cast<size_t>(n_sites));
    for (int k = 0; k < n_sites; ++k) {
        const auto spins = spinops::spin_matrices(m.system_sites[static_cast<size_t>(k)].s);
        const Matrix* axes[3] = {&spins.sx, &spins.sy, &spins.sz};
        for (int mu = 0; mu < 3; ++mu) {
            const Matrix full = spinops::embed(*axes[mu], k, dims).matrix;
            basis.site_ops[static_cast<size_t>(k)][static_cast<size_t>(mu)] =
                basis.states.adjoint() * full * basis.states;
        }
        basis.site_gammas.push_back(m.system_sites[static_cast<size_t>(k)].gamma);
    }

    basis.local_expectations.resize(static_cast<size_t>(n_states));
    for (int psi = 0; psi < n_states; ++psi) {
        Eigen::MatrixX3d exp_val(n_sites, 3);
        for (int k = 0; k < n_sites; ++k) {
            for (int mu = 0; mu < 3; ++mu) {
                const cxd v = basis.site_ops[static_cast<size_t>(k)][static_cast<size_t>(mu)](psi, psi);
                if (std::abs(v.imag()) > 1e-10) {
                    throw NumericalError("diagonalize_system: complex local expectation value");
                }
                exp_val(k, mu) = v.real();
            }
        }
        basis.local_expectations[static_cast<size_t>(psi)] = exp_val;
    }
    return basis;
}

// Default near-degeneracy threshold: 1e-3 of the median nearest-neighbor
// level spacing.
inline double default_gap_floor(const SystemEigenbasis& basis) {
    const int n = basis.n_states();
    if (n < 2) return 0.0;
    std::vector<double> gaps;
    gaps.reserve(static_cast<size_t>(n) - 1);
    for (int i = 0; i + 1 < n; ++i) gaps.push_back(basis.energies(i + 1) - basis.energies(i));
    std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
    return 1e-3 * gaps[gaps.size() / 2];
}

// --------------------------- validity report --------------------------------

struct SwValidityReport {
    double gap_floor = 0.0;
    struct Entry {
        int psi, psi_prime;
        double gap;
    };
    std::vector<Entry> violations;

    bool clean() const { return violations.empty(); }
};

inline SwValidityReport sw_validity_report(const SystemEigenbasis& basis,
                                           const std::vector<int>& states, double gap_floor) {
    SwValidityReport report;
    report.gap_floor = gap_floor;
    const int n = basis.n_states();
    std::set<std::pair<int, int>> seen;
    for (int psi : states) {
        if (psi < 0 || psi >= n) {
            throw ConfigError("sw_validity_report: state index " + std::to_string(psi) +
                              " outside the spectrum");
        }
        for (int other = 0; other < n; ++other) {
            if (other == psi) continue;
            const double gap = std::abs(basis.energies(psi) - basis.energies(other));
            if (gap < gap_floor) {
                const auto key = std::minmax(psi, other);
                if (seen.insert(key).second) {
                    report.violations.push_back({key.first, key.second, gap});
                }
            }
        }
    }
    std::sort(report.violations.begin(), report.violations.end(),
              [](const auto& a, const auto& b) {
                  return a.psi != b.psi ? a.psi < b.psi : a.psi_prime < b.psi_prime;
              });
    return report;
}

// --------------------------- conditional Hamiltonian -------------------------

// Effective bath Hamiltonian conditioned on the system occupying eigenstate
// psi:
//   H_psi = E_psi + sum_j (b_j + h_j).I_j + sum_{j<=l} I_j.(J+T)^{jl}.I_l
// The second-order tensors are kept factorized over intermediate states:
//   T^{jl} = sum_{psi'} v_j(psi') conj(v_l(psi'))^T / (E_psi - E_psi'),
// with v_j(psi') = sum_i A^{ij T} <psi|S_i|psi'>. For j != l only the
// Hermitian combination 2 Re T^{jl} enters the bath operator; for j = l the
// complex Hermitian T^{jj} contributes an on-site quadratic term whose
// antisymmetric imaginary part acts as an induced field.
struct ConditionalHamiltonian {
    int state_index = 0;
    double offset = 0.0;                  // E_psi, rad/us
    std::vector<Vec3> first_order_fields; // h_j per bath site
    bool includes_second_order = false;

    struct Factor {
        double inv_gap = 0.0;      // 1 / (E_psi - E_psi')
        Eigen::MatrixX3cd v;       // per bath site
    };
    std::vector<Factor> factors;
    std::vector<Mat3c> site_tensors; // cached T^{jj}

    std::shared_ptr<const model::BathTerms> bath;
    std::shared_ptr<const model::InteractionTable> system_bath; // A^{ij}

    int n_bath() const { return static_cast<int>(first_order_fields.size()); }

    // T^{jl} for j != l (complex; callers usually want pair_coupling_full).
    Mat3c second_order_tensor(int j, int l) const {
        Mat3c t = Mat3c::Zero();
        for (const auto& f : factors) {
            t += f.inv_gap * (f.v.row(j).transpose() * f.v.row(l).conjugate());
        }
        return t;
    }

    // Full pairwise bath coupling J^{jl} + 2 Re T^{jl}, oriented j < l.
    Mat3 pair_coupling_full(int j, int l) const {
        Mat3 k = bath->pair_tensor(j, l);
        if (includes_second_order && !factors.empty()) {
            k += 2.0 * second_order_tensor(j, l).real();
        }
        return k;
    }

    // Effective field plus first-order shift on bath site j.
    Vec3 site_field(int j) const {
        return bath->zeeman[static_cast<size_t>(j)] + first_order_fields[static_cast<size_t>(j)];
    }

    // On-site quadratic tensor: quadrupole J^{jj} plus the induced T^{jj}.
    Mat3c on_site_quadratic(int j) const {
        Mat3c q = Mat3c::Zero();
        if (const auto& self = bath->sites[static_cast<size_t>(j)].self_tensor) {
            q += self->cast<cxd>();
        }
        if (includes_second_order && !site_tensors.empty()) {
            q += site_tensors[static_cast<size_t>(j)];
        }
        return q;
    }

    // Mean-field contraction m^T Q m of the on-site quadratic tensor; the
    // antisymmetric imaginary part of a Hermitian Q drops out for real m.
    double on_site_quadratic_scalar(int j, const Vec3& m) const {
        return m.dot(on_site_quadratic(j).real() * m);
    }
};

inline ConditionalHamiltonian conditional_hamiltonian(
    const SystemEigenbasis& basis, const model::SpinModel& m, int psi, int order,
    double gap_floor, const std::set<int>& excluded = {},
    std::shared_ptr<const model::BathTerms> bath = nullptr,
    std::shared_ptr<const model::InteractionTable> system_bath = nullptr) {
    if (psi < 0 || psi >= basis.n_states()) {
        throw ConfigError("conditional_hamiltonian: state index out of range");
    }
    if (order != 1 && order != 2) {
        throw ConfigError("conditional_hamiltonian: order must be 1 or 2");
    }
    if (!bath) {
        bath = std::make_shared<const model::BathTerms>(model::build_bath_hamiltonian_terms(m));
    }
    if (!system_bath) {
        system_bath = std::make_shared<const model::InteractionTable>(model::system_bath_couplings(m));
    }

    const auto n_sites = basis.n_sites();
    const auto n_bath = static_cast<int>(m.bath_sites.size());

    ConditionalHamiltonian out;
    out.state_index = psi;
    out.offset = basis.energies(psi);
    out.includes_second_order = (order == 2);
    out.bath = bath;
    out.system_bath = system_bath;

    // First order: h_j = sum_i A^{ij T} <psi|S_i|psi>.
    out.first_order_fields.assign(static_cast<size_t>(n_bath), Vec3::Zero());
    for (int i = 0; i < n_sites; ++i) {
        const Vec3 m_i = basis.expectation(psi, i);
        if (m_i.norm() == 0.0) continue;
        for (int j = 0; j < n_bath; ++j) {
            if (auto a = system_bath->get(i, j)) {
                out.first_order_fields[static_cast<size_t>(j)] += a->transpose() * m_i;
            }
        }
    }
    if (order == 1) return out;

    // Second order: one factor per intermediate state.
    for (int other = 0; other < basis.n_states(); ++other) {
        if (other == psi) continue;
        const double gap = basis.energies(psi) - basis.energies(other);
        std::vector<Vec3c> elements(static_cast<size_t>(n_sites));
        double element_scale = 0.0;
        for (int i = 0; i < n_sites; ++i) {
            elements[static_cast<size_t>(i)] = basis.matrix_element(psi, i, other);
            element_scale = std::max(element_scale, elements[static_cast<size_t>(i)].norm());
        }
        if (std::abs(gap) < gap_floor || gap == 0.0) {
            if (excluded.count(other)) continue;
            if (element_scale < 1e-10) continue; // does not contribute
            throw SwValidityError(
                "conditional_hamiltonian: states " + std::to_string(psi) + " and " +
                std::to_string(other) + " are separated by " + std::to_string(std::abs(gap)) +
                " rad/us, below the gap floor " + std::to_string(gap_floor) +
                "; exclude the state explicitly or lower the floor");
        }
        if (element_scale == 0.0) continue;

        ConditionalHamiltonian::Factor factor;
        factor.inv_gap = 1.0 / gap;
        factor.v = Eigen::MatrixX3cd::Zero(n_bath, 3);
        for (int i = 0; i < n_sites; ++i) {
            const Vec3c m_i = elements[static_cast<size_t>(i)];
            if (m_i.norm() == 0.0) continue;
            for (int j = 0; j < n_bath; ++j) {
                if (auto a = system_bath->get(i, j)) {
                    factor.v.row(j) += (a->transpose() * m_i).transpose();
                }
            }
        }
        out.factors.push_back(std::move(factor));
    }

    out.site_tensors.assign(static_cast<size_t>(n_bath), Mat3c::Zero());
    for (const auto& f : out.factors) {
        for (int j = 0; j < n_bath; ++j) {
            out.site_tensors[static_cast<size_t>(j)] +=
                f.inv_gap * (f.v.row(j).transpose() * f.v.row(j).conjugate());
        }
    }
    return out;
}

} // namespace qcce::effective
