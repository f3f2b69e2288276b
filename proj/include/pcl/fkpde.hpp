#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pcl/parabolic.hpp"
#include "pcl/rng.hpp"

namespace pcl {

/// 1D grid: n interior nodes plus the two domain endpoints.
struct Grid1D {
    double lo = 0.0;
    double hi = 1.0;
    int n = 199;  // interior node count

    double dx() const { return (hi - lo) / (n + 1); }
    int nodes() const { return n + 2; }
    double node(int i) const { return lo + i * dx(); }
};

/// Union of epsilon-balls around buffer points: the PDE's boundary set.
/// epsilon is the ball radius.
struct BoundarySet {
    std::vector<std::vector<double>> centers;
    double epsilon = 0.0;

    bool contains(std::span<const double> x) const;
    void validate() const;
};

using ScalarField = std::function<double(std::span<const double>)>;

/// Explicit central-difference march of du/dt = (sigma^2/2) u'' [+ mu u'] + source
/// with u(.,0) = source, u clamped to the source value on every node inside
/// the boundary set (and at the domain endpoints) at every step. The drift
/// term, when active, is discretized upwind. Returns u at t_final on all
/// nodes() grid points.
///
/// `initial`, when given, overrides the starting state (the terminal-value
/// data of the backward/forgetting form); clamped nodes still hold the
/// source value.
///
/// Stability precondition: dt * (sigma^2/dx^2 + max|mu|/dx) <= 1, i.e. the
/// usual FTCS limit nu*dt/dx^2 <= 1/2 with nu = sigma^2/2 plus the advection
/// CFL. Violations throw param_error.
std::vector<double> solve_fd(const Grid1D& grid, double sigma, const ScalarField& source,
                             const BoundarySet& boundary, double t_final, double dt,
                             const DriftDescriptor& drift = {},
                             const ScalarField& initial = {});

/// Time series of the same march (recorded every `record_every` steps plus
/// the initial and final states). `clamped[i]` marks nodes held at the source
/// value (boundary-set membership or domain endpoint).
struct FdSeries {
    Grid1D grid;
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<bool> clamped;
};
FdSeries solve_fd_series(const Grid1D& grid, double sigma, const ScalarField& source,
                         const BoundarySet& boundary, double t_final, double dt,
                         const DriftDescriptor& drift = {}, int record_every = 1,
                         const ScalarField& initial = {});

/// Monte Carlo estimate of u(x0, t) via the stopped-path expectation
/// E[source(X_{t ^ tau}) + int_0^{t ^ tau} source(X_s) ds], tau = first entry
/// into the boundary set (checked per step, no crossing correction).
struct FkEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double mean_hitting_time = 0.0;
};

enum class FkDriftMode {
    SimulateWithDrift,  // Euler-Maruyama with mu in the step
    ReweightDriftless,  // driftless paths, Girsanov reweighting
};

struct FkOptions {
    std::size_t n_paths = 10000;
    double dt = 1e-3;
    FkDriftMode drift_mode = FkDriftMode::SimulateWithDrift;
    // Optional absorbing box (per-dimension bounds); paths leaving it stop at
    // the projected exit point. Keeps grid solves and path ensembles on the
    // same domain.
    std::vector<double> box_lo;
    std::vector<double> box_hi;
};

FkEstimate estimate_fk(const std::vector<double>& x0, double t, double sigma,
                       const ScalarField& source, const BoundarySet& boundary,
                       const DriftDescriptor& drift, const FkOptions& options, Rng rng);

/// Maximum-principle audit of an FD series: interior values at positive times
/// must not exceed the maximum over the initial state and the clamped nodes.
struct MaxPrincipleReport {
    double bound = 0.0;         // max over initial data and clamped nodes
    double interior_max = 0.0;  // max over free nodes at t > 0
    double margin = 0.0;        // bound - interior_max

    bool holds(double tol = 1e-6) const { return margin >= -tol; }
};
MaxPrincipleReport check_maximum_principle(const FdSeries& series);

/// Built-in 1D verification problems (verify-pde and the acceptance suite).
struct PdeProblem {
    std::string id;
    Grid1D grid;
    double sigma = 1.0;
    ScalarField source;
    BoundarySet boundary;
    double x0 = 0.5;
    double t = 1.0;
    DriftDescriptor drift;
    FkDriftMode drift_mode = FkDriftMode::SimulateWithDrift;
    double fd_dt = 1e-5;
    double rel_tol = 0.05;
};
std::vector<PdeProblem> builtin_pde_suite();

struct PdeCheckRow {
    std::string problem_id;
    double x0 = 0.0;
    double t = 0.0;
    double fd_value = 0.0;
    double fk_value = 0.0;
    double std_error = 0.0;
    double abs_diff = 0.0;
    double tolerance = 0.0;
    enum class Status { Pass, Fail, Inconclusive } status = Status::Pass;

    static const char* status_name(Status s);
};
PdeCheckRow run_pde_check(const PdeProblem& problem, std::size_t n_paths, double fk_dt,
                          std::uint64_t seed);

}  // namespace pcl
