// test_support.hpp — shared fixtures for the unit suites

#pragma once

#include <complex>
#include <random>

#include <Eigen/Dense>

#include "qcce/bench.hpp"
#include "qcce/model.hpp"

namespace test_support {

using qcce::model::Mat3;
using qcce::model::SpinModel;
using qcce::model::SpinSite;
using qcce::model::Vec3;

inline Eigen::MatrixXcd random_hermitian(int dim, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd m(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            m(i, j) = std::complex<double>(gauss(rng), gauss(rng));
        }
    }
    return scale * 0.5 * (m + m.adjoint());
}

// Single giant-spin system in a small axial field, matching the built-in
// scenario parameters.
inline SpinModel giant_spin_model() {
    using namespace qcce;
    SpinModel m;
    SpinSite site;
    site.position = Vec3::Zero();
    site.s = 10.0;
    site.gamma = 2.0 * units::bohr_magneton * Mat3::Identity();
    const double d = 0.025 * units::meV, e = 0.02 * d;
    Mat3 zfs = Mat3::Zero();
    zfs(0, 0) = -d / 3.0 + e;
    zfs(1, 1) = -d / 3.0 - e;
    zfs(2, 2) = 2.0 * d / 3.0;
    site.self_tensor = zfs;
    m.system_sites.push_back(site);
    m.field = Vec3(0.0, 0.0, 0.07);
    return m;
}

// Attach a deterministic proton bath to a model.
inline void attach_bath(SpinModel& m, int n, double radius, std::uint64_t seed,
                        double min_dist = 3.0) {
    qcce::bench::BathSpec spec;
    spec.n = n;
    spec.radius = radius;
    spec.min_dist = min_dist;
    spec.seed = seed;
    for (const auto& site : m.system_sites) spec.exclusion.push_back(site.position);
    m.bath_sites = qcce::bench::generate_bath(spec);
}

} // namespace test_support
