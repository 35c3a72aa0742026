#include "vvord/scenarios.hpp"

#include "vvord/parallel.hpp"
#include "vvord/random.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vvord {

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (auto& c : cells) {
        while (!c.empty() && (c.front() == ' ' || c.front() == '\t')) c.remove_prefix(1);
        while (!c.empty() && (c.back() == ' ' || c.back() == '\t' || c.back() == '\r')) c.remove_suffix(1);
    }
    return cells;
}

bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ScenarioSet parse_scenarios_csv(std::string_view text, const FeederModel& feeder, std::string provenance) {
    const int n = feeder.n_nodes();
    ScenarioSet set;
    set.provenance = std::move(provenance);
    std::size_t width = 0;
    int line_no = 0;
    bool first_content = true;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        const auto cells = split_cells(line);
        std::vector<double> values(cells.size());
        std::size_t bad = cells.size();
        for (std::size_t c = 0; c < cells.size() && bad == cells.size(); ++c) {
            if (!parse_double(cells[c], values[c])) bad = c;
        }
        if (first_content) {
            first_content = false;
            if (bad != cells.size()) continue;  // header
        }
        if (bad != cells.size()) {
            throw ValidationError("scenarios: row " + std::to_string(line_no) + ", column " + std::to_string(bad + 1) +
                                  ": not a finite number '" + std::string(cells[bad]) + "'");
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width) {
            throw ValidationError("scenarios: row " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " columns, expected " + std::to_string(width));
        }
        if (width == static_cast<std::size_t>(n)) {
            set.scenarios.push_back({Eigen::Map<const Vector>(values.data(), n)});
        } else if (width == static_cast<std::size_t>(2 * n)) {
            const Vector p = Eigen::Map<const Vector>(values.data(), n);
            const Vector q_load = Eigen::Map<const Vector>(values.data() + n, n);
            set.scenarios.push_back(grid_conditions(feeder, p, q_load));
        } else {
            throw ValidationError("scenarios: row " + std::to_string(line_no) + " has width " +
                                  std::to_string(width) + "; expected " + std::to_string(n) + " or " +
                                  std::to_string(2 * n));
        }
    }
    if (set.scenarios.empty()) throw ValidationError("scenarios: no data rows");
    return set;
}

ScenarioSet load_scenarios(const std::filesystem::path& path, const FeederModel& feeder) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenarios_csv(buf.str(), feeder, "file:" + path.string());
}

std::string scenarios_to_csv(const ScenarioSet& set) {
    std::string out;
    if (set.scenarios.empty()) return out;
    const auto n = set.scenarios.front().v_tilde.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (i) out += ',';
        out += "node" + std::to_string(i);
    }
    out += '\n';
    for (const auto& s : set.scenarios) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i) out += ',';
            out += format_double(s.v_tilde(i));
        }
        out += '\n';
    }
    return out;
}

ScenarioSet generate_synthetic(const FeederModel& feeder, int count, Range load, Range solar, std::uint64_t seed,
                               double reactive_ratio) {
    if (count < 1) throw ValidationError("generate_synthetic: count must be >= 1");
    for (double v : {load.lo, load.hi, solar.lo, solar.hi, reactive_ratio}) {
        if (!std::isfinite(v)) throw ValidationError("generate_synthetic: ranges must be finite");
    }
    if (load.lo > load.hi || solar.lo > solar.hi) throw ValidationError("generate_synthetic: empty range");
    const int n = feeder.n_nodes();
    ScenarioSet set;
    set.scenarios.resize(static_cast<std::size_t>(count));
    parallel_for(set.scenarios.size(), [&](std::size_t s) {
        Rng rng(seed, s);
        Vector p(n), q_load(n);
        for (int i = 0; i < n; ++i) {
            const double demand = rng.uniform(load.lo, load.hi);
            const double generation = rng.uniform(solar.lo, solar.hi);
            p(i) = generation - demand;
            q_load(i) = reactive_ratio * demand;
        }
        set.scenarios[s] = grid_conditions(feeder, p, q_load);
    });
    std::ostringstream tag;
    tag << "synthetic(seed=" << seed << ", count=" << count << ", load=[" << load.lo << "," << load.hi
        << "], solar=[" << solar.lo << "," << solar.hi << "], reactive_ratio=" << reactive_ratio << ")";
    set.provenance = tag.str();
    return set;
}

}  // namespace vvord
