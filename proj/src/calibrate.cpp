#include "dtmc/calibrate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "dtmc/csv.hpp"
#include "dtmc/errors.hpp"
#include "dtmc/kernels.hpp"

namespace dtmc {

namespace {

constexpr double kArmijoSlope = 1e-4;
constexpr double kStepMin = 1e-10;   // Barzilai-Borwein clamp
constexpr double kStepMax = 1e10;
constexpr double kNearAbsorbingTol = 1e-4;

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (const double x : v) m = std::max(m, std::abs(x));
    return m;
}

/// Euclidean projection of x onto {x >= 0, sum x = 1}.
void project_simplex(double* x, std::size_t n) {
    std::vector<double> u(x, x + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0;
    double tau = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        css += u[j];
        const double candidate = (css - 1.0) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) tau = candidate;
    }
    for (std::size_t i = 0; i < n; ++i) x[i] = std::max(x[i] - tau, 0.0);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const std::size_t n = sorted.size();
    const double h = static_cast<double>(n - 1) * q;
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

void CalibrationConfig::validate() const {
    if (topology.num_states < 2) {
        throw ConfigError("calibration needs at least 2 states");
    }
    if (max_iterations < 1) {
        throw ConfigError("max_iterations must be >= 1");
    }
    if (!(convergence_tol > 0.0)) {
        throw ConfigError("convergence_tol must be > 0");
    }
    if (replicas < 1) {
        throw ConfigError("replicas must be >= 1");
    }
}

double error(const StateVector& s0, const TransitionMatrix& matrix,
             const DiscretizedTable& table, const std::vector<double>& w) {
    const int k = matrix.size();
    if (static_cast<int>(s0.probs.size()) != k || table.num_states != k) {
        throw std::invalid_argument("error(): dimension mismatch between chain and table");
    }
    if (w.size() != table.rows.size() || table.rows.empty()) {
        throw std::invalid_argument("error(): one weight per table row required");
    }

    std::vector<std::size_t> order(table.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return table.rows[a].step < table.rows[b].step;
    });

    const kernels::Backend& kb = kernels::active();
    const auto ks = static_cast<std::size_t>(k);
    std::vector<double> v = s0.probs;
    std::vector<double> next(ks);
    double sse = 0.0;
    int step = 0;
    for (const std::size_t r : order) {
        const TableRow& row = table.rows[r];
        while (step < row.step) {
            kb.vec_mat(v.data(), matrix.entries.data(), ks, next.data());
            v.swap(next);
            step += 1;
        }
        sse += w[r] * kb.sq_dist(v.data(), row.freqs.data(), ks);
    }
    const double denom = static_cast<double>(table.rows.size()) * static_cast<double>(k);
    return std::sqrt(sse / denom);
}

// --- CalibrationProblem ---------------------------------------------------

CalibrationProblem::CalibrationProblem(const DiscretizedTable& table,
                                       const CalibrationConfig& config) {
    config.validate();
    topology_ = config.topology;
    fit_initial_vector_ = config.fit_initial_vector;
    num_states_ = topology_.num_states;
    if (table.num_states != num_states_) {
        throw std::invalid_argument("table and topology disagree on the number of states");
    }
    if (table.rows.empty()) {
        throw EmptyDataError("cannot calibrate against an empty table");
    }

    std::vector<std::size_t> order(table.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return table.rows[a].step < table.rows[b].step;
    });

    const std::vector<double> w = weights(table);
    const auto ks = static_cast<std::size_t>(num_states_);
    for (const std::size_t r : order) {
        const TableRow& row = table.rows[r];
        row_step_.push_back(row.step);
        weights_.push_back(w[r]);
        observed_.insert(observed_.end(), row.freqs.begin(), row.freqs.end());
    }
    max_step_ = row_step_.back();

    std::size_t offset = 0;
    if (fit_initial_vector_) {
        Block b{offset, -1, {}};
        for (int j = 0; j < num_states_; ++j) b.cols.push_back(j);
        offset += ks;
        blocks_.push_back(std::move(b));
    }
    for (int i = 0; i < num_states_ - 1; ++i) {
        Block b{offset, i, topology_.row_support(i)};
        offset += b.cols.size();
        blocks_.push_back(std::move(b));
    }
    dimension_ = offset;
}

std::vector<double> CalibrationProblem::initial() const {
    std::vector<double> theta(dimension_, 0.0);
    for (const Block& b : blocks_) {
        const int diag = b.row < 0 ? 0 : b.row;
        for (std::size_t p = 0; p < b.cols.size(); ++p) {
            if (b.cols[p] == diag) theta[b.offset + p] = 1.0;
        }
    }
    return theta;
}

void CalibrationProblem::make_feasible(std::vector<double>& theta) const {
    if (theta.size() != dimension_) {
        throw std::invalid_argument("theta has the wrong dimension");
    }
    for (const Block& b : blocks_) {
        project_simplex(theta.data() + b.offset, b.cols.size());
    }
}

void CalibrationProblem::unpack(const std::vector<double>& theta, std::vector<double>& s0,
                                TransitionMatrix& matrix) const {
    if (theta.size() != dimension_) {
        throw std::invalid_argument("theta has the wrong dimension");
    }
    const auto ks = static_cast<std::size_t>(num_states_);
    s0.assign(ks, 0.0);
    s0[0] = 1.0;
    matrix.topology = topology_;
    matrix.entries.assign(ks * ks, 0.0);
    matrix.entries[ks * ks - 1] = 1.0;
    for (const Block& b : blocks_) {
        if (b.row < 0) {
            for (std::size_t p = 0; p < b.cols.size(); ++p) {
                s0[static_cast<std::size_t>(b.cols[p])] = theta[b.offset + p];
            }
        } else {
            double* row = matrix.row(b.row);
            for (std::size_t p = 0; p < b.cols.size(); ++p) {
                row[b.cols[p]] = theta[b.offset + p];
            }
        }
    }
}

double CalibrationProblem::forward(const std::vector<double>& theta,
                                   std::vector<double>* trajectory) const {
    std::vector<double> s0;
    TransitionMatrix matrix;
    unpack(theta, s0, matrix);

    const kernels::Backend& kb = kernels::active();
    const auto ks = static_cast<std::size_t>(num_states_);
    if (trajectory != nullptr) {
        trajectory->assign(static_cast<std::size_t>(max_step_ + 1) * ks, 0.0);
    }

    std::vector<double> v = s0;
    std::vector<double> next(ks);
    double sse = 0.0;
    std::size_t r = 0;
    for (int n = 0; n <= max_step_; ++n) {
        if (trajectory != nullptr) {
            std::memcpy(trajectory->data() + static_cast<std::size_t>(n) * ks, v.data(),
                        ks * sizeof(double));
        }
        while (r < row_step_.size() && row_step_[r] == n) {
            sse += weights_[r] * kb.sq_dist(v.data(), observed_.data() + r * ks, ks);
            r += 1;
        }
        if (n < max_step_) {
            kb.vec_mat(v.data(), matrix.entries.data(), ks, next.data());
            v.swap(next);
        }
    }
    return sse;
}

double CalibrationProblem::weighted_sse(const std::vector<double>& theta) const {
    return forward(theta, nullptr);
}

double CalibrationProblem::err(const std::vector<double>& theta) const {
    const double denom =
        static_cast<double>(row_step_.size()) * static_cast<double>(num_states_);
    return std::sqrt(forward(theta, nullptr) / denom);
}

std::vector<double> CalibrationProblem::sse_gradient(const std::vector<double>& theta) const {
    std::vector<double> trajectory;
    forward(theta, &trajectory);

    std::vector<double> s0;
    TransitionMatrix matrix;
    unpack(theta, s0, matrix);

    const kernels::Backend& kb = kernels::active();
    const auto ks = static_cast<std::size_t>(num_states_);

    // dW/dv_m enters directly at steps carrying a table row.
    std::vector<int> row_at_step(static_cast<std::size_t>(max_step_) + 1, -1);
    for (std::size_t r = 0; r < row_step_.size(); ++r) {
        row_at_step[static_cast<std::size_t>(row_step_[r])] = static_cast<int>(r);
    }
    auto direct = [&](int m, std::vector<double>& out) {
        const int r = row_at_step[static_cast<std::size_t>(m)];
        if (r < 0) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        const double* v = trajectory.data() + static_cast<std::size_t>(m) * ks;
        const double* obs = observed_.data() + static_cast<std::size_t>(r) * ks;
        const double w2 = 2.0 * weights_[static_cast<std::size_t>(r)];
        for (std::size_t i = 0; i < ks; ++i) out[i] = w2 * (v[i] - obs[i]);
    };

    // Adjoint sweep: g_m = P g_{m+1} + direct(m); dP += v_m (x) g_{m+1}.
    std::vector<double> g(ks), tmp(ks), d(ks);
    std::vector<double> d_matrix(ks * ks, 0.0);
    direct(max_step_, g);
    for (int m = max_step_ - 1; m >= 0; --m) {
        kb.outer_acc(trajectory.data() + static_cast<std::size_t>(m) * ks, g.data(), ks,
                     d_matrix.data());
        kb.mat_vec(matrix.entries.data(), g.data(), ks, tmp.data());
        direct(m, d);
        for (std::size_t i = 0; i < ks; ++i) g[i] = tmp[i] + d[i];
    }

    std::vector<double> grad(dimension_, 0.0);
    for (const Block& b : blocks_) {
        for (std::size_t p = 0; p < b.cols.size(); ++p) {
            const auto col = static_cast<std::size_t>(b.cols[p]);
            grad[b.offset + p] = b.row < 0
                                     ? g[col]
                                     : d_matrix[static_cast<std::size_t>(b.row) * ks + col];
        }
    }
    return grad;
}

std::vector<double> CalibrationProblem::err_gradient(const std::vector<double>& theta) const {
    std::vector<double> grad = sse_gradient(theta);
    const double denom =
        static_cast<double>(row_step_.size()) * static_cast<double>(num_states_);
    const double e = std::sqrt(forward(theta, nullptr) / denom);
    if (e == 0.0) {
        std::fill(grad.begin(), grad.end(), 0.0);
        return grad;
    }
    const double scale = 1.0 / (2.0 * e * denom);
    for (double& x : grad) x *= scale;
    return grad;
}

// --- fit --------------------------------------------------------------------

CalibratedChain fit(const DiscretizedTable& table, const CalibrationConfig& config) {
    const CalibrationProblem problem(table, config);
    const kernels::Backend& kb = kernels::active();
    const std::size_t dim = problem.dimension();
    const double denom =
        static_cast<double>(table.rows.size()) * static_cast<double>(table.num_states);

    std::vector<double> theta = problem.initial();
    double sse = problem.weighted_sse(theta);
    if (!std::isfinite(sse)) {
        throw CalibrationError("calibration failed: non-finite objective at the start");
    }
    std::vector<double> grad = problem.sse_gradient(theta);
    double err_value = std::sqrt(sse / denom);

    CalibratedChain out;
    bool converged = false;

    const double grad_scale = max_abs(grad);
    double lambda =
        grad_scale > 0.0 ? std::clamp(1.0 / grad_scale, kStepMin, kStepMax) : kStepMax;
    if (grad_scale == 0.0) converged = true;

    std::vector<double> trial(dim), direction(dim), candidate(dim), grad_new(dim), y(dim);
    for (int it = 1; it <= config.max_iterations && !converged; ++it) {
        for (std::size_t i = 0; i < dim; ++i) trial[i] = theta[i] - lambda * grad[i];
        problem.make_feasible(trial);
        for (std::size_t i = 0; i < dim; ++i) direction[i] = trial[i] - theta[i];

        const double slope = kb.dot(grad.data(), direction.data(), dim);
        if (max_abs(direction) <= 1e-15 || slope >= 0.0) {
            converged = true;
            break;
        }

        double alpha = 1.0;
        double sse_new = 0.0;
        bool accepted = false;
        while (alpha >= 1e-20) {
            for (std::size_t i = 0; i < dim; ++i) candidate[i] = theta[i] + alpha * direction[i];
            sse_new = problem.weighted_sse(candidate);
            if (!std::isfinite(sse_new)) {
                throw CalibrationError("calibration failed: non-finite objective");
            }
            if (sse_new <= sse + kArmijoSlope * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            converged = true;  // no decrease within machine precision
            break;
        }

        grad_new = problem.sse_gradient(candidate);
        for (std::size_t i = 0; i < dim; ++i) y[i] = grad_new[i] - grad[i];
        const double dy = kb.dot(direction.data(), y.data(), dim);
        const double dd = kb.dot(direction.data(), direction.data(), dim);
        lambda = dy > 0.0 ? std::clamp(alpha * dd / dy, kStepMin, kStepMax) : kStepMax;

        theta.swap(candidate);
        sse = sse_new;
        grad.swap(grad_new);
        const double err_new = std::sqrt(sse / denom);
        const double improvement = err_value - err_new;
        err_value = err_new;
        out.iterations_used = it;
        if (improvement < config.convergence_tol) {
            converged = true;
        }
    }

    problem.unpack(theta, out.s0, out.matrix);
    out.err = err_value;
    out.converged = converged;
    const ValidationReport report = validate(out.matrix);
    if (!report.pass() || !is_distribution(out.s0)) {
        throw CalibrationError("calibration produced an invalid chain: " + report.describe());
    }
    return out;
}

// --- bootstrap ----------------------------------------------------------------

std::vector<std::size_t> half_sample(std::size_t n, rng::Stream& stream) {
    if (n < 2) {
        throw EmptyDataError("cohort too small to half-sample (need at least 2 pipes)");
    }
    const std::size_t m = n / 2;
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(stream.next_below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
}

Ensemble bootstrap(const std::vector<PipeRecord>& pipes,
                   const std::vector<InspectionRecord>& inspections,
                   const DiscretizationConfig& disc, const CalibrationConfig& config,
                   int threads) {
    disc.validate();
    config.validate();
    const std::vector<PipeObservations> frame = collect_observations(pipes, inspections, disc);
    if (frame.size() < 2) {
        throw EmptyDataError("cohort too small to half-sample (need at least 2 pipes)");
    }

    const int replicas = config.replicas;
    std::vector<CalibratedChain> results(static_cast<std::size_t>(replicas));
    std::vector<char> succeeded(static_cast<std::size_t>(replicas), 0);

    std::atomic<int> cursor{0};
    auto worker = [&]() {
        while (true) {
            const int r = cursor.fetch_add(1);
            if (r >= replicas) break;
            rng::Stream stream(rng::child_seed(config.rng_seed, static_cast<std::uint64_t>(r)));
            const std::vector<std::size_t> chosen = half_sample(frame.size(), stream);
            std::vector<const PipeObservations*> subset;
            subset.reserve(chosen.size());
            for (const std::size_t idx : chosen) subset.push_back(&frame[idx]);
            try {
                const DiscretizedTable table =
                    table_from_observations(subset, disc, config.topology.num_states);
                results[static_cast<std::size_t>(r)] = fit(table, config);
                succeeded[static_cast<std::size_t>(r)] = 1;
            } catch (const Error&) {
                // empty replica table or failed fit: recorded, not fatal
            }
        }
    };

    const int workers = std::clamp(threads, 1, replicas);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    Ensemble ensemble;
    ensemble.config = config;
    ensemble.disc = disc;
    ensemble.replicas_requested = replicas;
    for (int r = 0; r < replicas; ++r) {
        if (succeeded[static_cast<std::size_t>(r)]) {
            ensemble.members.push_back(std::move(results[static_cast<std::size_t>(r)]));
        } else {
            ensemble.failed_replicas.push_back(r);
        }
    }
    const auto failures = static_cast<long>(ensemble.failed_replicas.size());
    if (failures * 5 > static_cast<long>(replicas)) {
        throw CalibrationError("bootstrap failed: " + std::to_string(failures) + " of " +
                               std::to_string(replicas) + " replicas did not fit");
    }
    return ensemble;
}

// --- bands ----------------------------------------------------------------

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("quantile level outside [0, 1]");
    }
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, q);
}

std::vector<BandRow> bands(const Ensemble& ensemble, int horizon_steps,
                           const BandQuantity& quantity) {
    if (ensemble.members.empty()) {
        throw EmptyDataError("ensemble has no usable members");
    }
    if (horizon_steps < 0) {
        throw std::invalid_argument("horizon must be >= 0 steps");
    }
    const int k = ensemble.members.front().matrix.size();
    if (quantity.kind == BandQuantity::Kind::StateProb &&
        (quantity.state < 1 || quantity.state > k)) {
        throw std::invalid_argument("band state index outside 1..K");
    }

    const kernels::Backend& kb = kernels::active();
    const auto ks = static_cast<std::size_t>(k);
    std::vector<double> classes(ks);
    for (std::size_t i = 0; i < ks; ++i) classes[i] = static_cast<double>(i + 1);

    const std::size_t steps = static_cast<std::size_t>(horizon_steps) + 1;
    std::vector<std::vector<double>> samples(steps);
    for (auto& s : samples) s.reserve(ensemble.members.size());

    std::vector<double> v(ks), next(ks);
    for (const CalibratedChain& member : ensemble.members) {
        v = member.s0;
        for (std::size_t n = 0; n < steps; ++n) {
            if (n > 0) {
                kb.vec_mat(v.data(), member.matrix.entries.data(), ks, next.data());
                v.swap(next);
            }
            samples[n].push_back(quantity.kind == BandQuantity::Kind::Expectation
                                     ? kb.dot(v.data(), classes.data(), ks)
                                     : v[static_cast<std::size_t>(quantity.state - 1)]);
        }
    }

    std::vector<BandRow> rows(steps);
    for (std::size_t n = 0; n < steps; ++n) {
        std::sort(samples[n].begin(), samples[n].end());
        rows[n].step = static_cast<int>(n);
        rows[n].lower = quantile_sorted(samples[n], 0.025);
        rows[n].median = quantile_sorted(samples[n], 0.5);
        rows[n].upper = quantile_sorted(samples[n], 0.975);
    }
    return rows;
}

std::string bands_to_csv(const std::vector<BandRow>& rows, int delta_t) {
    std::string out;
    csv::append_line(out, {"step", "t_years", "lower", "median", "upper"});
    for (const BandRow& row : rows) {
        const double t_years = row.step * static_cast<double>(delta_t) + delta_t / 2.0;
        csv::append_line(out, {std::to_string(row.step), csv::format_double(t_years),
                               csv::format_double(row.lower), csv::format_double(row.median),
                               csv::format_double(row.upper)});
    }
    return out;
}

std::vector<int> near_absorbing_states(const TransitionMatrix& matrix) {
    std::vector<int> flagged;
    for (int i = 0; i < matrix.size() - 1; ++i) {
        if (matrix.at(i, i) > 1.0 - kNearAbsorbingTol) flagged.push_back(i + 1);
    }
    return flagged;
}

// --- serialization ----------------------------------------------------------

nlohmann::json ensemble_to_json(const Ensemble& ensemble) {
    nlohmann::json doc;
    doc["config"] = {{"topology", to_string(ensemble.config.topology.kind)},
                     {"K", ensemble.config.topology.num_states},
                     {"max_iterations", ensemble.config.max_iterations},
                     {"convergence_tol", ensemble.config.convergence_tol},
                     {"replicas", ensemble.config.replicas},
                     {"rng_seed", ensemble.config.rng_seed},
                     {"fit_initial_vector", ensemble.config.fit_initial_vector}};
    doc["discretization"] = {{"delta_t", ensemble.disc.delta_t},
                             {"damage_code", ensemble.disc.damage_code},
                             {"max_age", ensemble.disc.max_age}};
    doc["source_fingerprint"] = ensemble.source_fingerprint;
    doc["replicas_requested"] = ensemble.replicas_requested;
    doc["failed_replicas"] = ensemble.failed_replicas;
    nlohmann::json members = nlohmann::json::array();
    for (const CalibratedChain& m : ensemble.members) {
        nlohmann::json member = chain_to_json(StateVector{m.s0, 0}, m.matrix);
        member["err"] = m.err;
        member["iterations_used"] = m.iterations_used;
        member["converged"] = m.converged;
        member["near_absorbing"] = near_absorbing_states(m.matrix);
        members.push_back(std::move(member));
    }
    doc["members"] = std::move(members);
    return doc;
}

Ensemble ensemble_from_json(const nlohmann::json& doc) {
    try {
        Ensemble out;
        const nlohmann::json& config = doc.at("config");
        out.config.topology =
            ChainTopology{topology_from_string(config.at("topology").get<std::string>()),
                          config.at("K").get<int>()};
        out.config.max_iterations = config.at("max_iterations").get<int>();
        out.config.convergence_tol = config.at("convergence_tol").get<double>();
        out.config.replicas = config.at("replicas").get<int>();
        out.config.rng_seed = config.at("rng_seed").get<std::uint64_t>();
        out.config.fit_initial_vector = config.at("fit_initial_vector").get<bool>();

        const nlohmann::json& disc = doc.at("discretization");
        out.disc.delta_t = disc.at("delta_t").get<int>();
        out.disc.damage_code = disc.at("damage_code").get<std::string>();
        out.disc.max_age = disc.at("max_age").get<int>();

        out.source_fingerprint = doc.at("source_fingerprint").get<std::string>();
        out.replicas_requested = doc.at("replicas_requested").get<int>();
        out.failed_replicas = doc.at("failed_replicas").get<std::vector<int>>();

        for (const nlohmann::json& member : doc.at("members")) {
            ParsedChain parsed = chain_from_json(member);
            if (parsed.matrix.topology.kind != out.config.topology.kind ||
                parsed.matrix.size() != out.config.topology.num_states) {
                throw IoError("ensemble member disagrees with the config topology");
            }
            CalibratedChain m;
            m.s0 = std::move(parsed.s0.probs);
            m.matrix = std::move(parsed.matrix);
            m.err = member.at("err").get<double>();
            m.iterations_used = member.at("iterations_used").get<int>();
            m.converged = member.at("converged").get<bool>();
            if (!(m.err >= 0.0)) {
                throw IoError("ensemble member err must be >= 0");
            }
            out.members.push_back(std::move(m));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed ensemble: ") + e.what());
    }
}

Ensemble load_ensemble_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read ensemble file: " + path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return ensemble_from_json(doc);
}

}
