#ifndef ACTRACK_MODEL_HPP
#define ACTRACK_MODEL_HPP

#include <Eigen/Dense>
#include <Eigen/Cholesky>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace actrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Hidden finite-state Markov chain. P is column-stochastic: column i holds
/// the distribution of the next state given the current state is i, so one
/// prediction step is P * p.
struct MarkovModel {
    Matrix P;
    Vector pi;

    int n() const { return static_cast<int>(pi.size()); }
};

/// A sensing action. `samples` holds per-sensor sample counts when the
/// control was built from sensor specs; it is empty for controls given
/// directly as per-state Gaussians.
struct Control {
    int id = 0;
    std::string label;
    int dim = 0;
    std::vector<int> samples;
};

/// Per-sensor statistics of the AR(1)-correlated feature stream: per-state
/// feature means and variances, AR parameter phi, and the additive
/// sensing/communication noise variance.
struct SensorSpec {
    std::string name;
    Vector mu;
    Vector sigma2;
    double phi = 0.0;
    double noise_var = 0.0;
};

namespace detail {

inline Matrix regularize_once(const Matrix& cov) {
    const double d = static_cast<double>(cov.rows());
    const double eps = 1e-10 * cov.trace() / d;
    return cov + eps * Matrix::Identity(cov.rows(), cov.cols());
}

}  // namespace detail

/// One conditional Gaussian y | state, control with its Cholesky factor
/// precomputed. Construction regularizes a failed factorization once
/// (eps = 1e-10 * trace / d) and throws if the covariance is still not
/// positive definite.
struct StateGaussian {
    Vector mean;
    Matrix cov;
    Matrix chol_lower;
    double log_norm = 0.0;  // -0.5 * (d*log(2*pi) + log det cov)

    StateGaussian() = default;
    StateGaussian(Vector m, Matrix q) : mean(std::move(m)), cov(std::move(q)) {
        if (cov.rows() != cov.cols() || cov.rows() != mean.size())
            throw std::invalid_argument("StateGaussian: dimension mismatch");
        Eigen::LLT<Matrix> llt(cov);
        if (llt.info() != Eigen::Success) {
            llt.compute(detail::regularize_once(cov));
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("StateGaussian: covariance not positive definite");
        }
        chol_lower = llt.matrixL();
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < chol_lower.rows(); ++i)
            logdet += 2.0 * std::log(chol_lower(i, i));
        const double d = static_cast<double>(mean.size());
        log_norm = -0.5 * (d * std::log(2.0 * M_PI) + logdet);
    }

    double logpdf(const Vector& y) const {
        Vector r = chol_lower.triangularView<Eigen::Lower>().solve(y - mean);
        return log_norm - 0.5 * r.squaredNorm();
    }
};

/// All per-state Gaussians of one control, plus the mean matrix
/// M(u) = [m_1 ... m_n] used by the filter.
struct ControlModel {
    Control control;
    std::vector<StateGaussian> states;
    Matrix mean_matrix;  // dim x n

    int dim() const { return control.dim; }
    int n() const { return static_cast<int>(states.size()); }
};

class ObservationModel {
public:
    ObservationModel() = default;
    explicit ObservationModel(std::vector<ControlModel> controls)
        : controls_(std::move(controls)) {}

    int num_controls() const { return static_cast<int>(controls_.size()); }
    const ControlModel& at(int control_id) const {
        if (control_id < 0 || control_id >= num_controls())
            throw std::invalid_argument("ObservationModel: unknown control id");
        return controls_[static_cast<std::size_t>(control_id)];
    }
    const std::vector<ControlModel>& controls() const { return controls_; }

private:
    std::vector<ControlModel> controls_;
};

/// Exact multivariate normal log-density. Covariance is factorized per call;
/// prefer StateGaussian::logpdf for repeated evaluations of one model.
inline double gaussian_logpdf(const Vector& y, const Vector& mean, const Matrix& cov) {
    return StateGaussian(mean, cov).logpdf(y);
}

/// Log-likelihoods log f(y | e_i, u) for all states under one control.
inline Vector log_likelihoods(const ControlModel& cm, const Vector& y) {
    if (y.size() != cm.dim())
        throw std::invalid_argument("log_likelihoods: observation dimension mismatch");
    Vector out(cm.n());
    for (int i = 0; i < cm.n(); ++i) out(i) = cm.states[static_cast<std::size_t>(i)].logpdf(y);
    return out;
}

/// Diagonal of r(y, u) up to a positive scale: exponentiated after
/// subtracting the max log-density, so the largest entry is exactly 1 and
/// long trajectories cannot underflow every entry at once. All uses of r
/// normalize, so the scale cancels.
inline Vector likelihood_diag_scaled(const ControlModel& cm, const Vector& y) {
    Vector lp = log_likelihoods(cm, y);
    const double m = lp.maxCoeff();
    Vector r(lp.size());
    // scalar std::exp: Eigen's vectorized exp clamps very negative inputs to
    // a denormal instead of underflowing to zero
    for (Eigen::Index i = 0; i < lp.size(); ++i) r(i) = std::exp(lp(i) - m);
    return r;
}

/// All per-sensor count tuples with 1 <= total <= budget, ordered by total
/// and then lexicographically descending, e.g. 3 sensors, budget 2:
/// (1,0,0),(0,1,0),(0,0,1),(2,0,0),(1,1,0),(1,0,1),(0,2,0),(0,1,1),(0,0,2).
inline std::vector<std::vector<int>> enumerate_sample_allocations(int num_sensors, int budget) {
    if (num_sensors < 1 || budget < 1)
        throw std::invalid_argument("enumerate_sample_allocations: need >= 1 sensor and budget >= 1");
    std::vector<std::vector<int>> out;
    std::vector<int> cur(static_cast<std::size_t>(num_sensors), 0);
    auto rec = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == num_sensors - 1) {
            cur[static_cast<std::size_t>(pos)] = remaining;
            out.push_back(cur);
            return;
        }
        for (int c = remaining; c >= 0; --c) {
            cur[static_cast<std::size_t>(pos)] = c;
            self(self, pos + 1, remaining - c);
        }
    };
    for (int total = 1; total <= budget; ++total) rec(rec, 0, total);
    return out;
}

namespace detail {

inline std::string allocation_label(const std::vector<SensorSpec>& sensors,
                                    const std::vector<int>& counts) {
    std::string label;
    for (std::size_t l = 0; l < counts.size(); ++l) {
        if (counts[l] == 0) continue;
        if (!label.empty()) label += "+";
        label += sensors[l].name + "x" + std::to_string(counts[l]);
    }
    return label;
}

}  // namespace detail

/// Covariance block of one sensor contributing N samples for state i:
/// sigma2/(1-phi^2) * T + noise_var * I, with T Toeplitz on powers of phi.
inline Matrix ar1_block(double sigma2, double phi, double noise_var, int n_samples) {
    if (std::abs(phi) >= 1.0) throw std::invalid_argument("ar1_block: |phi| must be < 1");
    if (n_samples < 1) throw std::invalid_argument("ar1_block: need at least one sample");
    Matrix t(n_samples, n_samples);
    for (int r = 0; r < n_samples; ++r)
        for (int c = 0; c < n_samples; ++c) t(r, c) = std::pow(phi, std::abs(r - c));
    return (sigma2 / (1.0 - phi * phi)) * t +
           noise_var * Matrix::Identity(n_samples, n_samples);
}

/// Observation model entry for one sample allocation: per-state mean is the
/// concatenation over sensors with positive counts of the sensor's state
/// mean repeated count times; the covariance is block-diagonal in the
/// matching AR(1) blocks.
inline ControlModel build_ar1_control(const std::vector<SensorSpec>& sensors,
                                      const std::vector<int>& counts, int control_id) {
    if (counts.size() != sensors.size())
        throw std::invalid_argument("build_ar1_control: one count per sensor required");
    int dim = 0;
    for (std::size_t l = 0; l < counts.size(); ++l) {
        if (counts[l] < 0) throw std::invalid_argument("build_ar1_control: negative sample count");
        dim += counts[l];
    }
    if (dim == 0) throw std::invalid_argument("build_ar1_control: at least one sample required");
    const int n = sensors.empty() ? 0 : static_cast<int>(sensors.front().mu.size());

    ControlModel cm;
    cm.control = Control{control_id, detail::allocation_label(sensors, counts), dim,
                         counts};
    cm.mean_matrix.resize(dim, n);
    cm.states.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Vector mean(dim);
        Matrix cov = Matrix::Zero(dim, dim);
        int off = 0;
        for (std::size_t l = 0; l < sensors.size(); ++l) {
            const int nl = counts[l];
            if (nl == 0) continue;
            const SensorSpec& s = sensors[l];
            if (s.mu.size() != n || s.sigma2.size() != n)
                throw std::invalid_argument("build_ar1_control: sensor state dimension mismatch");
            mean.segment(off, nl).setConstant(s.mu(i));
            cov.block(off, off, nl, nl) = ar1_block(s.sigma2(i), s.phi, s.noise_var, nl);
            off += nl;
        }
        cm.mean_matrix.col(i) = mean;
        cm.states.emplace_back(std::move(mean), std::move(cov));
    }
    return cm;
}

/// The full budgeted control space over a sensor suite.
inline ObservationModel build_ar1_observation_model(const std::vector<SensorSpec>& sensors,
                                                    int budget) {
    const auto allocations = enumerate_sample_allocations(static_cast<int>(sensors.size()), budget);
    std::vector<ControlModel> controls;
    controls.reserve(allocations.size());
    for (std::size_t a = 0; a < allocations.size(); ++a)
        controls.push_back(build_ar1_control(sensors, allocations[a], static_cast<int>(a)));
    return ObservationModel(std::move(controls));
}

/// Structural validation of a chain + observation model pair. Returns one
/// message per violation; an empty report means the model is usable.
inline std::vector<std::string> validate_model(const MarkovModel& mm,
                                               const ObservationModel& om) {
    std::vector<std::string> report;
    const int n = mm.n();
    if (mm.P.rows() != n || mm.P.cols() != n)
        report.push_back("transition matrix is " + std::to_string(mm.P.rows()) + "x" +
                         std::to_string(mm.P.cols()) + ", expected " + std::to_string(n) + "x" +
                         std::to_string(n));
    else {
        for (int j = 0; j < n; ++j) {
            const double s = mm.P.col(j).sum();
            if (std::abs(s - 1.0) > 1e-12)
                report.push_back("column " + std::to_string(j) + " sum " + std::to_string(s));
            for (int i = 0; i < n; ++i)
                if (mm.P(i, j) < 0.0 || mm.P(i, j) > 1.0)
                    report.push_back("P(" + std::to_string(i) + "," + std::to_string(j) +
                                     ") = " + std::to_string(mm.P(i, j)) + " outside [0,1]");
        }
    }
    double pisum = 0.0;
    for (int i = 0; i < n; ++i) {
        pisum += mm.pi(i);
        if (mm.pi(i) < 0.0 || mm.pi(i) > 1.0)
            report.push_back("pi(" + std::to_string(i) + ") outside [0,1]");
    }
    if (std::abs(pisum - 1.0) > 1e-9)
        report.push_back("pi sums to " + std::to_string(pisum));

    for (const ControlModel& cm : om.controls()) {
        const std::string tag = "control " + std::to_string(cm.control.id);
        if (cm.n() != n) {
            report.push_back(tag + ": has " + std::to_string(cm.n()) + " state models, expected " +
                             std::to_string(n));
            continue;
        }
        for (int i = 0; i < n; ++i) {
            const StateGaussian& g = cm.states[static_cast<std::size_t>(i)];
            const std::string stag = tag + ", state " + std::to_string(i);
            if (g.mean.size() != cm.dim() || g.cov.rows() != cm.dim())
                report.push_back(stag + ": dimension mismatch with control dim " +
                                 std::to_string(cm.dim()));
            if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
                report.push_back(stag + ": covariance not symmetric");
            Eigen::SelfAdjointEigenSolver<Matrix> es(g.cov);
            if (es.eigenvalues().minCoeff() < -1e-10)
                report.push_back(stag + ": covariance has negative eigenvalue " +
                                 std::to_string(es.eigenvalues().minCoeff()));
        }
    }
    return report;
}

}  // namespace actrack

#endif  // ACTRACK_MODEL_HPP
