#include "pcl/fkpde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcl/errors.hpp"
#include "pcl/matrix.hpp"

namespace pcl {

bool BoundarySet::contains(std::span<const double> x) const {
    for (const auto& c : centers)
        if (squared_distance(x, c) <= epsilon * epsilon) return true;
    return false;
}

void BoundarySet::validate() const {
    if (epsilon <= 0.0) throw param_error("BoundarySet: epsilon must be positive");
    if (centers.empty()) throw param_error("BoundarySet: no centers");
}

namespace {

struct FdSetup {
    std::vector<double> src;    // source at every node
    std::vector<double> mu;     // drift at every node (zeros when inactive)
    std::vector<bool> clamped;  // held at source value
};

FdSetup prepare_fd(const Grid1D& grid, double sigma, const ScalarField& source,
                   const BoundarySet& boundary, double t_final, double dt,
                   const DriftDescriptor& drift) {
    if (grid.n < 3) throw param_error("solve_fd: need at least 3 interior nodes");
    if (grid.lo >= grid.hi) throw param_error("solve_fd: lo must be below hi");
    if (t_final <= 0.0 || dt <= 0.0) throw param_error("solve_fd: t_final and dt must be positive");
    boundary.validate();
    drift.validate(1);

    FdSetup s;
    s.src.resize(grid.nodes());
    s.mu.assign(grid.nodes(), 0.0);
    s.clamped.assign(grid.nodes(), false);
    double max_mu = 0.0;
    for (int i = 0; i < grid.nodes(); ++i) {
        const double x = grid.node(i);
        s.src[i] = source(std::span<const double>(&x, 1));
        if (!std::isfinite(s.src[i])) throw param_error("solve_fd: source not finite on grid");
        if (drift.active()) {
            s.mu[i] = drift.mu(std::span<const double>(&x, 1))[0];
            max_mu = std::max(max_mu, std::abs(s.mu[i]));
        }
        s.clamped[i] = boundary.contains(std::span<const double>(&x, 1));
    }
    s.clamped.front() = true;  // domain endpoints are boundary data
    s.clamped.back() = true;

    const double dx = grid.dx();
    const double cfl = dt * (sigma * sigma / (dx * dx) + max_mu / dx);
    if (cfl > 1.0 + 1e-12)
        throw param_error("solve_fd: explicit stability violated (dt too large for dx)");
    return s;
}

}  // namespace

FdSeries solve_fd_series(const Grid1D& grid, double sigma, const ScalarField& source,
                         const BoundarySet& boundary, double t_final, double dt,
                         const DriftDescriptor& drift, int record_every,
                         const ScalarField& initial) {
    const FdSetup setup = prepare_fd(grid, sigma, source, boundary, t_final, dt, drift);
    if (record_every < 1) throw param_error("solve_fd_series: record_every must be >= 1");

    const int nn = grid.nodes();
    const double dx = grid.dx();
    const double nu = 0.5 * sigma * sigma;

    std::vector<double> u = setup.src;  // u(.,0) = source unless overridden
    if (initial) {
        for (int i = 0; i < nn; ++i) {
            const double x = grid.node(i);
            u[i] = setup.clamped[i] ? setup.src[i] : initial(std::span<const double>(&x, 1));
            if (!std::isfinite(u[i])) throw param_error("solve_fd: initial data not finite");
        }
    }
    std::vector<double> unew(nn);

    FdSeries series;
    series.grid = grid;
    series.clamped = setup.clamped;
    series.times.push_back(0.0);
    series.states.push_back(u);

    double t = 0.0;
    long step = 0;
    while (t < t_final - 1e-12) {
        const double h = std::min(dt, t_final - t);
        for (int i = 1; i + 1 < nn; ++i) {
            if (setup.clamped[i]) {
                unew[i] = setup.src[i];
                continue;
            }
            const double diffusion = nu * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
            double advection = 0.0;
            if (setup.mu[i] > 0.0)
                advection = setup.mu[i] * (u[i + 1] - u[i]) / dx;
            else if (setup.mu[i] < 0.0)
                advection = setup.mu[i] * (u[i] - u[i - 1]) / dx;
            unew[i] = u[i] + h * (diffusion + advection + setup.src[i]);
        }
        unew.front() = setup.src.front();
        unew.back() = setup.src.back();
        u.swap(unew);
        t += h;
        ++step;
        if (step % record_every == 0 || t >= t_final - 1e-12) {
            series.times.push_back(t);
            series.states.push_back(u);
        }
    }
    return series;
}

std::vector<double> solve_fd(const Grid1D& grid, double sigma, const ScalarField& source,
                             const BoundarySet& boundary, double t_final, double dt,
                             const DriftDescriptor& drift, const ScalarField& initial) {
    return solve_fd_series(grid, sigma, source, boundary, t_final, dt, drift,
                           std::numeric_limits<int>::max(), initial)
        .states.back();
}

FkEstimate estimate_fk(const std::vector<double>& x0, double t, double sigma,
                       const ScalarField& source, const BoundarySet& boundary,
                       const DriftDescriptor& drift, const FkOptions& options, Rng rng) {
    if (options.n_paths == 0) throw param_error("estimate_fk: n_paths must be positive");
    if (options.dt <= 0.0 || t < 0.0) throw param_error("estimate_fk: bad time parameters");
    boundary.validate();
    drift.validate(x0.size());
    const bool boxed = !options.box_lo.empty();
    if (boxed && (options.box_lo.size() != x0.size() || options.box_hi.size() != x0.size()))
        throw param_error("estimate_fk: box dimensions disagree with x0");

    const std::size_t d = x0.size();
    const bool reweight = drift.active() && options.drift_mode == FkDriftMode::ReweightDriftless;
    const bool drift_step = drift.active() && options.drift_mode == FkDriftMode::SimulateWithDrift;
    const double inv_sigma2 = 1.0 / (sigma * sigma);

    double sum = 0.0;
    double sum_sq = 0.0;
    double sum_tau = 0.0;
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -std::numeric_limits<double>::infinity();
    std::vector<double> xcur(d), mu(d);
    for (std::size_t p = 0; p < options.n_paths; ++p) {
        Rng path_rng = rng.fork(p);
        xcur = x0;
        double time = 0.0;
        double integral = 0.0;
        double log_weight = 0.0;
        while (true) {
            if (boundary.contains(xcur)) break;
            if (boxed) {
                bool outside = false;
                for (std::size_t c = 0; c < d; ++c)
                    if (xcur[c] < options.box_lo[c] || xcur[c] > options.box_hi[c]) outside = true;
                if (outside) {
                    for (std::size_t c = 0; c < d; ++c)
                        xcur[c] = std::clamp(xcur[c], options.box_lo[c], options.box_hi[c]);
                    break;
                }
            }
            if (time >= t - 1e-12) break;
            const double h = std::min(options.dt, t - time);
            integral += source(xcur) * h;  // left-point quadrature
            if (drift.active()) mu = drift.mu(xcur);
            const double noise_sd = sigma * std::sqrt(h);
            double ito = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                double dxc = noise_sd * path_rng.normal();
                if (drift_step) dxc += mu[c] * h;
                if (reweight) ito += mu[c] * dxc;
                xcur[c] += dxc;
            }
            if (reweight) {
                double msq = 0.0;
                for (double m : mu) msq += m * m;
                // Girsanov exponent for dX = sigma dW: (mu/sigma^2).dX - 1/2 |mu|^2/sigma^2 dt
                log_weight += (ito - 0.5 * msq * h) * inv_sigma2;
            }
            time += h;
        }
        double value = source(xcur) + integral;
        if (reweight) value *= std::exp(std::min(log_weight, 30.0));
        sum += value;
        sum_sq += value * value;
        sum_tau += time;
        vmin = std::min(vmin, value);
        vmax = std::max(vmax, value);
    }

    FkEstimate est;
    est.n_paths = options.n_paths;
    est.value = sum / options.n_paths;
    est.mean_hitting_time = sum_tau / options.n_paths;
    if (vmin == vmax) {
        est.std_error = 0.0;  // degenerate ensemble (e.g. x0 already absorbed)
    } else if (options.n_paths > 1) {
        const double var =
            std::max(0.0, (sum_sq - sum * sum / options.n_paths) / (options.n_paths - 1));
        est.std_error = std::sqrt(var / options.n_paths);
    } else {
        est.std_error = std::numeric_limits<double>::infinity();
    }
    return est;
}

MaxPrincipleReport check_maximum_principle(const FdSeries& series) {
    MaxPrincipleReport report;
    if (series.states.empty()) throw param_error("check_maximum_principle: empty series");
    const int nn = series.grid.nodes();

    double bound = -std::numeric_limits<double>::infinity();
    for (double v : series.states.front()) bound = std::max(bound, v);  // initial/terminal data
    for (const auto& state : series.states)
        for (int i = 0; i < nn; ++i)
            if (series.clamped[i]) bound = std::max(bound, state[i]);

    double interior = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 1; s < series.states.size(); ++s)
        for (int i = 0; i < nn; ++i)
            if (!series.clamped[i]) interior = std::max(interior, series.states[s][i]);

    report.bound = bound;
    report.interior_max = interior;
    report.margin = bound - interior;
    return report;
}

namespace {

double bump(double x, double center, double width) {
    const double z = (x - center) / width;
    return std::exp(-0.5 * z * z);
}

ScalarField field_1d(std::function<double(double)> f) {
    return [f = std::move(f)](std::span<const double> x) { return f(x[0]); };
}

}  // namespace

std::vector<PdeProblem> builtin_pde_suite() {
    std::vector<PdeProblem> suite;

    {
        PdeProblem p;
        p.id = "zero_source";
        p.grid = {0.0, 1.0, 199};
        p.sigma = 1.0;
        p.source = field_1d([](double) { return 0.0; });
        p.boundary = {{{0.0}, {1.0}}, 0.05};
        p.x0 = 0.5;
        p.t = 1.0;
        p.fd_dt = 1e-5;
        suite.push_back(std::move(p));
    }
    {
        // Steady state solves (sigma^2/2) u'' + 1 = 0 with u = 1 at both
        // ends: u(x) = 1 + x(1-x)/sigma^2. Tiny epsilon so only the domain
        // endpoints clamp; paths stop on box exit.
        PdeProblem p;
        p.id = "const_source_steady";
        p.grid = {0.0, 1.0, 199};
        p.sigma = 1.0;
        p.source = field_1d([](double) { return 1.0; });
        p.boundary = {{{0.0}, {1.0}}, 1e-6};
        p.x0 = 0.5;
        p.t = 3.0;
        p.fd_dt = 1e-5;
        suite.push_back(std::move(p));
    }
    {
        PdeProblem p;
        p.id = "bump_center";
        p.grid = {0.0, 1.0, 199};
        p.sigma = 1.0;
        p.source = field_1d([](double x) { return bump(x, 0.5, 0.15); });
        p.boundary = {{{0.0}, {1.0}}, 0.05};
        p.x0 = 0.5;
        p.t = 1.0;
        p.fd_dt = 1e-5;
        suite.push_back(std::move(p));
    }
    {
        PdeProblem p;
        p.id = "bump_offcenter";
        p.grid = {0.0, 1.0, 199};
        p.sigma = 1.0;
        p.source = field_1d([](double x) { return 0.5 + bump(x, 0.35, 0.1); });
        p.boundary = {{{0.0}, {1.0}}, 0.05};
        p.x0 = 0.7;
        p.t = 1.0;
        p.fd_dt = 1e-5;
        suite.push_back(std::move(p));
    }
    {
        PdeProblem p;
        p.id = "drift_simulated";
        p.grid = {0.0, 1.0, 199};
        p.sigma = 1.0;
        p.source = field_1d([](double x) { return bump(x, 0.5, 0.15); });
        p.boundary = {{{0.0}, {1.0}}, 0.05};
        p.x0 = 0.5;
        p.t = 1.0;
        p.drift = {DriftDescriptor::Kind::GaussianPrior, {0.5}, 1.0};
        p.drift_mode = FkDriftMode::SimulateWithDrift;
        p.fd_dt = 1e-5;
        p.rel_tol = 0.10;
        suite.push_back(std::move(p));
    }
    {
        PdeProblem p;
        p.id = "drift_reweighted";
        p.grid = {0.0, 1.0, 199};
        p.sigma = 1.0;
        p.source = field_1d([](double x) { return bump(x, 0.5, 0.15); });
        p.boundary = {{{0.0}, {1.0}}, 0.05};
        p.x0 = 0.4;
        p.t = 1.0;
        p.drift = {DriftDescriptor::Kind::GaussianPrior, {0.5}, 1.0};
        p.drift_mode = FkDriftMode::ReweightDriftless;
        p.fd_dt = 1e-5;
        p.rel_tol = 0.10;
        suite.push_back(std::move(p));
    }
    return suite;
}

const char* PdeCheckRow::status_name(Status s) {
    switch (s) {
        case Status::Pass: return "pass";
        case Status::Fail: return "fail";
        case Status::Inconclusive: return "inconclusive";
    }
    return "?";
}

PdeCheckRow run_pde_check(const PdeProblem& problem, std::size_t n_paths, double fk_dt,
                          std::uint64_t seed) {
    const auto u = solve_fd(problem.grid, problem.sigma, problem.source, problem.boundary,
                            problem.t, problem.fd_dt, problem.drift);
    // Nearest grid node to x0.
    const double pos = (problem.x0 - problem.grid.lo) / problem.grid.dx();
    const int node = std::clamp(static_cast<int>(std::lround(pos)), 0, problem.grid.nodes() - 1);
    const double fd_value = u[node];

    FkOptions opt;
    opt.n_paths = n_paths;
    opt.dt = fk_dt;
    opt.drift_mode = problem.drift_mode;
    opt.box_lo = {problem.grid.lo};
    opt.box_hi = {problem.grid.hi};
    const auto fk = estimate_fk({problem.grid.node(node)}, problem.t, problem.sigma,
                                problem.source, problem.boundary, problem.drift, opt,
                                Rng::seeded(seed));

    PdeCheckRow row;
    row.problem_id = problem.id;
    row.x0 = problem.grid.node(node);
    row.t = problem.t;
    row.fd_value = fd_value;
    row.fk_value = fk.value;
    row.std_error = fk.std_error;
    row.abs_diff = std::abs(fk.value - fd_value);
    row.tolerance = std::max(3.0 * fk.std_error, problem.rel_tol * std::abs(fd_value));
    // With too few paths the band is all noise; report inconclusive rather
    // than a fake pass/fail.
    const double scale = std::max(std::abs(fd_value), 1e-3);
    if (n_paths < 2 || 3.0 * fk.std_error > 0.5 * scale)
        row.status = PdeCheckRow::Status::Inconclusive;
    else
        row.status = row.abs_diff <= row.tolerance ? PdeCheckRow::Status::Pass
                                                   : PdeCheckRow::Status::Fail;
    return row;
}

}  // namespace pcl
