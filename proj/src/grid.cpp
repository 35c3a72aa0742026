#include "vvord/grid.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vvord {

namespace {

using nlohmann::json;

Matrix matrix_from_json(const json& rows, const char* name) {
    if (!rows.is_array()) throw ValidationError(std::string("feeder: '") + name + "' must be an array of rows");
    const auto n_rows = static_cast<Eigen::Index>(rows.size());
    const auto n_cols = n_rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
    Matrix m(n_rows, n_cols);
    for (Eigen::Index i = 0; i < n_rows; ++i) {
        const json& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n_cols) {
            throw ValidationError(std::string("feeder: '") + name + "' row " + std::to_string(i) +
                                  " has the wrong length");
        }
        for (Eigen::Index j = 0; j < n_cols; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

void require_length(const Vector& v, int n, const char* what) {
    if (v.size() != n) {
        throw ValidationError(std::string(what) + ": expected length " + std::to_string(n) + ", got " +
                              std::to_string(v.size()));
    }
}

}  // namespace

Vector FeederModel::node_ratings() const {
    Vector out = Vector::Zero(n_nodes());
    for (std::size_t k = 0; k < der_nodes.size(); ++k) out(der_nodes[k]) = q_rating(static_cast<Eigen::Index>(k));
    return out;
}

Vector FeederModel::der_mask() const {
    Vector out = Vector::Zero(n_nodes());
    for (int node : der_nodes) out(node) = 1.0;
    return out;
}

void validate_feeder(const FeederModel& f) {
    const auto n = f.x.rows();
    if (n == 0) throw ValidationError("feeder: no nodes");
    if (f.x.cols() != n) throw ValidationError("feeder: X is not square");
    if (f.r.rows() != n || f.r.cols() != n) throw ValidationError("feeder: R and X dimensions differ");
    if (!f.x.allFinite() || !f.r.allFinite()) throw ValidationError("feeder: non-finite matrix entry");
    if (!std::isfinite(f.v0) || f.v0 <= 0.0) throw ValidationError("feeder: v0 must be positive");

    if (!std::is_sorted(f.der_nodes.begin(), f.der_nodes.end()) ||
        std::adjacent_find(f.der_nodes.begin(), f.der_nodes.end()) != f.der_nodes.end()) {
        throw ValidationError("feeder: der_nodes must be ascending and unique");
    }
    for (int node : f.der_nodes) {
        if (node < 0 || node >= n) throw ValidationError("feeder: DER node " + std::to_string(node) + " out of range");
    }
    if (f.q_rating.size() != static_cast<Eigen::Index>(f.der_nodes.size())) {
        throw ValidationError("feeder: q_rating needs one entry per DER node");
    }
    for (Eigen::Index k = 0; k < f.q_rating.size(); ++k) {
        if (!(f.q_rating(k) > 0.0) || !std::isfinite(f.q_rating(k))) {
            throw ValidationError("feeder: q_rating entries must be positive and finite");
        }
    }

    if (f.single_phase()) {
        if (!is_symmetric(f.x)) throw ValidationError("feeder: single-phase X is not symmetric");
        if (!is_symmetric(f.r)) throw ValidationError("feeder: single-phase R is not symmetric");
        if ((f.x.array() < 0.0).any()) throw ValidationError("feeder: single-phase X has negative entries");
        if (symmetric_eig_extremes(f.x).min <= 0.0) {
            throw ValidationError("feeder: single-phase X is not positive definite");
        }
    }
}

FeederModel feeder_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("feeder: parse error: ") + e.what());
    }
    FeederModel f;
    try {
        const int n = doc.at("n_nodes").get<int>();
        const auto layout = doc.value("phase_layout", std::string("single"));
        if (layout == "single") {
            f.layout = PhaseLayout::single;
        } else if (layout == "multi") {
            f.layout = PhaseLayout::multi;
        } else {
            throw ValidationError("feeder: phase_layout must be \"single\" or \"multi\"");
        }
        f.v0 = doc.value("v0", 1.0);
        f.x = matrix_from_json(doc.at("X"), "X");
        f.r = matrix_from_json(doc.at("R"), "R");
        if (f.x.rows() != n || f.x.cols() != n) {
            throw ValidationError("feeder: X must be " + std::to_string(n) + "x" + std::to_string(n) + ", got " +
                                  std::to_string(f.x.rows()) + "x" + std::to_string(f.x.cols()));
        }
        f.der_nodes = doc.value("der_nodes", std::vector<int>{});
        const auto ratings = doc.value("q_rating", std::vector<double>{});
        f.q_rating = Eigen::Map<const Vector>(ratings.data(), static_cast<Eigen::Index>(ratings.size()));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("feeder: ") + e.what());
    }
    validate_feeder(f);
    return f;
}

FeederModel load_feeder(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open feeder file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return feeder_from_json(buf.str());
}

std::string feeder_to_json(const FeederModel& f) {
    json doc;
    doc["n_nodes"] = f.n_nodes();
    doc["phase_layout"] = f.single_phase() ? "single" : "multi";
    doc["v0"] = f.v0;
    doc["X"] = matrix_to_json(f.x);
    doc["R"] = matrix_to_json(f.r);
    doc["der_nodes"] = f.der_nodes;
    doc["q_rating"] = std::vector<double>(f.q_rating.data(), f.q_rating.data() + f.q_rating.size());
    return doc.dump(2);
}

FeederModel build_radial_feeder(std::span<const Branch> branches, double v0) {
    const int n = static_cast<int>(branches.size());
    if (n == 0) throw ValidationError("radial feeder: no branches");
    // parent[k] and impedance of the branch feeding node k (1-based ids).
    std::vector<int> parent(static_cast<std::size_t>(n + 1), -1);
    std::vector<double> r_in(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> x_in(static_cast<std::size_t>(n + 1), 0.0);
    for (const Branch& b : branches) {
        if (b.to < 1 || b.to > n || b.from < 0 || b.from > n) {
            throw ValidationError("radial feeder: nodes must be numbered 0..N with 0 the substation");
        }
        if (b.from == b.to) throw ValidationError("radial feeder: self-loop at node " + std::to_string(b.to));
        if (parent[static_cast<std::size_t>(b.to)] != -1) {
            throw ValidationError("radial feeder: node " + std::to_string(b.to) + " is fed twice (cycle)");
        }
        if (!(b.r >= 0.0) || !(b.x > 0.0)) throw ValidationError("radial feeder: impedances must be positive");
        parent[static_cast<std::size_t>(b.to)] = b.from;
        r_in[static_cast<std::size_t>(b.to)] = b.r;
        x_in[static_cast<std::size_t>(b.to)] = b.x;
    }
    // Cumulative impedance from the substation; detects cycles and islands.
    std::vector<double> r_acc(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> x_acc(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<std::vector<int>> path(static_cast<std::size_t>(n + 1));
    for (int k = 1; k <= n; ++k) {
        int node = k;
        int steps = 0;
        std::vector<int> up;
        while (node != 0) {
            if (node == -1 || ++steps > n) {
                throw ValidationError("radial feeder: node " + std::to_string(k) +
                                      " is not connected to the substation");
            }
            up.push_back(node);
            node = parent[static_cast<std::size_t>(node)];
        }
        std::reverse(up.begin(), up.end());
        path[static_cast<std::size_t>(k)] = std::move(up);
    }
    for (int k = 1; k <= n; ++k) {
        for (int e : path[static_cast<std::size_t>(k)]) {
            r_acc[static_cast<std::size_t>(k)] += r_in[static_cast<std::size_t>(e)];
            x_acc[static_cast<std::size_t>(k)] += x_in[static_cast<std::size_t>(e)];
        }
    }

    FeederModel f;
    f.v0 = v0;
    f.layout = PhaseLayout::single;
    f.x = Matrix::Zero(n, n);
    f.r = Matrix::Zero(n, n);
    f.q_rating = Vector(0);
    for (int i = 1; i <= n; ++i) {
        for (int j = i; j <= n; ++j) {
            const auto& pi = path[static_cast<std::size_t>(i)];
            const auto& pj = path[static_cast<std::size_t>(j)];
            // Last shared node on both paths; its cumulative impedance is the common-path sum.
            int shared = 0;
            for (std::size_t d = 0; d < std::min(pi.size(), pj.size()) && pi[d] == pj[d]; ++d) shared = pi[d];
            const double xs = shared == 0 ? 0.0 : 2.0 * x_acc[static_cast<std::size_t>(shared)];
            const double rs = shared == 0 ? 0.0 : 2.0 * r_acc[static_cast<std::size_t>(shared)];
            f.x(i - 1, j - 1) = f.x(j - 1, i - 1) = xs;
            f.r(i - 1, j - 1) = f.r(j - 1, i - 1) = rs;
        }
    }
    validate_feeder(f);
    return f;
}

FeederModel with_ders(FeederModel feeder, std::vector<int> nodes, const Vector& ratings) {
    if (ratings.size() != static_cast<Eigen::Index>(nodes.size())) {
        throw ValidationError("with_ders: one rating per DER node required");
    }
    std::vector<std::size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return nodes[a] < nodes[b]; });
    feeder.der_nodes.clear();
    feeder.q_rating.resize(static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        feeder.der_nodes.push_back(nodes[order[k]]);
        feeder.q_rating(static_cast<Eigen::Index>(k)) = ratings(static_cast<Eigen::Index>(order[k]));
    }
    validate_feeder(feeder);
    return feeder;
}

Scenario grid_conditions(const FeederModel& feeder, const Vector& p, const Vector& q_load) {
    require_length(p, feeder.n_nodes(), "grid_conditions: p");
    require_length(q_load, feeder.n_nodes(), "grid_conditions: q_load");
    Scenario s;
    s.v_tilde = feeder.r * p - feeder.x * q_load + Vector::Constant(feeder.n_nodes(), feeder.v0);
    return s;
}

Vector grid_voltages(const FeederModel& feeder, const Vector& q, const Scenario& scenario) {
    return feeder.x * q + scenario.v_tilde;
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    const Matrix gram = m.transpose() * m;
    const double scale = gram.norm();
    if (scale == 0.0) return 0.0;
    const auto n = gram.rows();

    // Deterministic start vectors; later ones only matter when the all-ones
    // vector lies in the null space of m.
    std::vector<Vector> starts;
    starts.push_back(Vector::Ones(n));
    Vector alternating(n);
    for (Eigen::Index i = 0; i < n; ++i) alternating(i) = (i % 2 == 0 ? 1.0 : -1.0) * static_cast<double>(i + 1);
    starts.push_back(alternating);
    for (Eigen::Index i = 0; i < n; ++i) starts.push_back(Vector::Unit(n, i));

    for (Vector v : starts) {
        v.normalize();
        Vector w = gram * v;
        if (w.norm() <= 1e-14 * scale) continue;
        double rq = v.dot(w);
        for (int it = 0; it < 10'000; ++it) {
            v = w / w.norm();
            w = gram * v;
            const double next = v.dot(w);
            const bool done = std::abs(next - rq) < 1e-12 * std::abs(next);
            rq = next;
            if (done) break;
        }
        return std::sqrt(std::max(rq, 0.0));
    }
    return 0.0;
}

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    return ((m - m.transpose()).array().abs() <= tol).all();
}

EigenExtremes symmetric_eig_extremes(const Matrix& m) {
    if (m.size() == 0) throw ValidationError("symmetric_eig_extremes: empty matrix");
    if (!is_symmetric(m)) throw ValidationError("symmetric_eig_extremes: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric_eig_extremes: eigensolver failed");
    const Vector& ev = solver.eigenvalues();
    return {ev(0), ev(ev.size() - 1)};
}

double condition_number(const Matrix& m) {
    const auto ext = symmetric_eig_extremes(m);
    if (ext.min <= 0.0) throw ValidationError("condition_number: matrix is not positive definite");
    return ext.max / ext.min;
}

}  // namespace vvord
