#include "dtmc/chain.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "dtmc/errors.hpp"
#include "dtmc/kernels.hpp"

namespace dtmc {

std::vector<double> SeverityScale::classes() const {
    std::vector<double> out(static_cast<std::size_t>(num_states));
    for (int k = 0; k < num_states; ++k) out[static_cast<std::size_t>(k)] = k + 1;
    return out;
}

const char* to_string(TopologyKind kind) {
    return kind == TopologyKind::Single ? "single" : "multi";
}

TopologyKind topology_from_string(const std::string& name) {
    if (name == "single") return TopologyKind::Single;
    if (name == "multi") return TopologyKind::Multi;
    throw IoError("unknown topology '" + name + "' (expected 'single' or 'multi')");
}

bool ChainTopology::allows(int i, int j) const {
    if (i < 0 || j < 0 || i >= num_states || j >= num_states) return false;
    if (j < i) return false;  // no repairs
    if (kind == TopologyKind::Multi) return true;
    return j == i || j == i + 1;
}

int ChainTopology::mask_cardinality() const {
    int n = 0;
    for (int i = 0; i < num_states; ++i)
        for (int j = 0; j < num_states; ++j)
            if (allows(i, j)) ++n;
    return n;
}

std::vector<int> ChainTopology::row_support(int i) const {
    std::vector<int> cols;
    for (int j = 0; j < num_states; ++j)
        if (allows(i, j)) cols.push_back(j);
    return cols;
}

void TransitionMatrix::impose_structure() {
    const int k = size();
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (!topology.allows(i, j)) entries[static_cast<std::size_t>(i) * k + j] = 0.0;
    entries[static_cast<std::size_t>(k) * k - 1] = 1.0;  // absorbing final state
}

TransitionMatrix TransitionMatrix::identity(ChainTopology topology) {
    const int k = topology.num_states;
    TransitionMatrix m{topology, std::vector<double>(static_cast<std::size_t>(k) * k, 0.0)};
    for (int i = 0; i < k; ++i) m.entries[static_cast<std::size_t>(i) * k + i] = 1.0;
    return m;
}

TransitionMatrix TransitionMatrix::from_rows(const std::vector<std::vector<double>>& rows,
                                             ChainTopology topology) {
    const int k = topology.num_states;
    if (static_cast<int>(rows.size()) != k)
        throw std::invalid_argument("transition matrix has " + std::to_string(rows.size()) +
                                    " rows, topology expects " + std::to_string(k));
    TransitionMatrix m{topology, {}};
    m.entries.reserve(static_cast<std::size_t>(k) * k);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != k)
            throw std::invalid_argument("transition matrix row has " + std::to_string(row.size()) +
                                        " entries, topology expects " + std::to_string(k));
        m.entries.insert(m.entries.end(), row.begin(), row.end());
    }
    return m;
}

StateVector StateVector::pristine(int num_states) {
    StateVector s{std::vector<double>(static_cast<std::size_t>(num_states), 0.0), 0};
    s.probs[0] = 1.0;
    return s;
}

std::string ValidationReport::describe() const {
    std::string out;
    auto add = [&out](const char* what, bool ok) {
        out += what;
        out += ok ? ": ok\n" : ": FAIL\n";
    };
    add("entry bounds [0,1]", bounds_ok);
    add("row sums = 1 (1e-9)", row_sums_ok);
    add("structural zeros exact", structural_zeros_ok);
    add("final state absorbing", absorbing_ok);
    return out;
}

ValidationReport validate(const TransitionMatrix& matrix) {
    const int k = matrix.topology.num_states;
    if (k < 2) throw std::invalid_argument("topology needs at least 2 states");
    if (matrix.entries.size() != static_cast<std::size_t>(k) * k)
        throw std::invalid_argument("matrix storage is not K x K for the topology's K");

    ValidationReport report;
    report.bounds_ok = true;
    report.row_sums_ok = true;
    report.structural_zeros_ok = true;

    for (int i = 0; i < k; ++i) {
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            const double p = matrix.at(i, j);
            if (!(p >= 0.0 && p <= 1.0)) report.bounds_ok = false;
            if (!matrix.topology.allows(i, j) && p != 0.0) report.structural_zeros_ok = false;
            sum += p;
        }
        if (!(std::abs(sum - 1.0) <= kStochasticTol)) report.row_sums_ok = false;
    }
    report.absorbing_ok = std::abs(matrix.at(k - 1, k - 1) - 1.0) <= kStochasticTol;
    for (int j = 0; j < k - 1; ++j)
        if (matrix.at(k - 1, j) != 0.0) report.absorbing_ok = false;
    return report;
}

bool is_distribution(std::span<const double> probs, double tol) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
}

namespace {

void check_same_size(int a, int b) {
    if (a != b)
        throw std::invalid_argument("dimension mismatch: " + std::to_string(a) +
                                    " vs " + std::to_string(b));
}

}  // namespace

TransitionMatrix matmul(const TransitionMatrix& a, const TransitionMatrix& b) {
    const int k = a.size();
    check_same_size(k, b.size());
    TransitionMatrix c{ChainTopology::multi(k),
                       std::vector<double>(static_cast<std::size_t>(k) * k)};
    const auto& kb = kernels::active();
    for (int i = 0; i < k; ++i)
        kb.vec_mat(a.row(i), b.entries.data(), static_cast<std::size_t>(k), c.row(i));
    return c;
}

TransitionMatrix n_step_matrix(const TransitionMatrix& matrix, int n) {
    if (n < 0) throw std::invalid_argument("step count must be nonnegative");
    const int k = matrix.size();
    TransitionMatrix power = TransitionMatrix::identity(ChainTopology::multi(k));
    for (int s = 0; s < n; ++s) power = matmul(power, matrix);
    return power;
}

StateVector project(const StateVector& s0, const TransitionMatrix& matrix, int n) {
    if (n < 0) throw std::invalid_argument("step count must be nonnegative");
    const int k = matrix.size();
    check_same_size(static_cast<int>(s0.probs.size()), k);

    StateVector out{s0.probs, n};
    std::vector<double> scratch(static_cast<std::size_t>(k));
    const auto& kb = kernels::active();
    for (int s = 0; s < n; ++s) {
        kb.vec_mat(out.probs.data(), matrix.entries.data(), static_cast<std::size_t>(k),
                   scratch.data());
        out.probs.swap(scratch);
    }
    return out;
}

double expected_severity(const StateVector& s0, const TransitionMatrix& matrix, int n,
                         const SeverityScale& scale) {
    check_same_size(scale.num_states, matrix.size());
    const StateVector sn = project(s0, matrix, n);
    const std::vector<double> classes = scale.classes();
    return kernels::active().dot(sn.probs.data(), classes.data(), sn.probs.size());
}

nlohmann::json chain_to_json(const StateVector& s0, const TransitionMatrix& matrix) {
    const int k = matrix.size();
    nlohmann::json doc;
    doc["topology"] = to_string(matrix.topology.kind);
    doc["K"] = k;
    doc["s0"] = s0.probs;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < k; ++i)
        rows.push_back(std::vector<double>(matrix.row(i), matrix.row(i) + k));
    doc["P"] = rows;
    return doc;
}

ParsedChain chain_from_json(const nlohmann::json& doc) {
    try {
        const auto kind = topology_from_string(doc.at("topology").get<std::string>());
        const int k = doc.at("K").get<int>();
        if (k < 2) throw IoError("chain needs K >= 2");
        const ChainTopology topology{kind, k};

        auto s0_probs = doc.at("s0").get<std::vector<double>>();
        if (static_cast<int>(s0_probs.size()) != k)
            throw IoError("s0 length does not match K");
        auto rows = doc.at("P").get<std::vector<std::vector<double>>>();

        ParsedChain chain{StateVector{std::move(s0_probs), 0}, {}};
        try {
            chain.matrix = TransitionMatrix::from_rows(rows, topology);
        } catch (const std::invalid_argument& e) {
            throw IoError(std::string("malformed chain: ") + e.what());
        }

        const ValidationReport report = validate(chain.matrix);
        if (!report.pass())
            throw IoError("chain fails validation:\n" + report.describe());
        if (!is_distribution(chain.s0.probs))
            throw IoError("chain s0 is not a probability distribution");
        return chain;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed chain JSON: ") + e.what());
    }
}

}  // namespace dtmc
