#include "cbsde/csv.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <vector>

#include "cbsde/config.hpp"
#include "cbsde/errors.hpp"
#include "cbsde/format.hpp"

namespace cbsde {

namespace {

constexpr const char* kHeaderPrefix = "# cbsde csv v1 kind=";
constexpr const char* kNodeColumns = "step,path,w,y,z,dc";

std::vector<int> resolve_steps(const std::vector<int>& steps, int num_steps) {
    std::vector<int> out;
    if (steps.empty()) {
        out.resize(static_cast<std::size_t>(num_steps) + 1);
        for (int i = 0; i <= num_steps; ++i) out[i] = i;
        return out;
    }
    out = steps;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.front() < 0 || out.back() > num_steps) {
        throw ValidationError("csv: step selection outside 0.." + std::to_string(num_steps));
    }
    return out;
}

void write_node_row(std::ostream& out, int step, std::uint64_t path, double w, double y,
                    const double* z, const double* dc) {
    out << step << ',' << path << ',' << format_double(w) << ',' << format_double(y) << ',';
    if (z) out << format_double(*z);
    out << ',';
    if (dc) out << format_double(*dc);
    out << '\n';
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

}  // namespace

void write_nodes_csv(std::ostream& out, const Solution& solution, const Lattice& lattice,
                     const std::vector<int>& steps) {
    if (lattice.num_steps() != solution.num_steps()) {
        throw ValidationError("csv: lattice depth " + std::to_string(lattice.num_steps()) +
                              " does not match the solution depth " +
                              std::to_string(solution.num_steps()));
    }
    lattice.require_dense_solve("csv node export (one row per path prefix)");
    const int n = solution.num_steps();
    const bool level = solution.layout == SolutionLayout::kLevel;
    const std::vector<int> selected = resolve_steps(steps, n);

    out << kHeaderPrefix << "nodes\n" << kNodeColumns << '\n';
    for (int step : selected) {
        for (std::uint64_t p = 0; p < lattice.paths_at(step); ++p) {
            const std::size_t idx = level ? static_cast<std::size_t>(std::popcount(p)) : p;
            const double w = lattice.w_path(step, p);
            const double y = solution.y[step][idx];
            if (step < n) {
                const double z = solution.z[step][idx];
                const double dc = solution.c_increments[step][idx];
                write_node_row(out, step, p, w, y, &z, &dc);
            } else {
                write_node_row(out, step, p, w, y, nullptr, nullptr);
            }
        }
    }
}

void write_claim_csv(std::ostream& out, const Lattice& lattice,
                     const std::vector<double>& terminal_values) {
    lattice.require_dense_solve("csv claim export (one row per terminal path)");
    const int n = lattice.num_steps();
    if (terminal_values.size() != lattice.paths_at(n)) {
        throw ValidationError("csv: expected " + std::to_string(lattice.paths_at(n)) +
                              " terminal values, got " + std::to_string(terminal_values.size()));
    }
    out << kHeaderPrefix << "claim\n" << kNodeColumns << '\n';
    for (std::uint64_t p = 0; p < terminal_values.size(); ++p) {
        write_node_row(out, n, p, lattice.w_path(n, p), terminal_values[p], nullptr, nullptr);
    }
}

void write_curve_csv(std::ostream& out, const std::vector<std::pair<double, double>>& curve) {
    out << kHeaderPrefix << "curve\n" << "alpha,total\n";
    for (const auto& [alpha, total] : curve) {
        out << format_double(alpha) << ',' << format_double(total) << '\n';
    }
}

ClaimTable read_claim_table_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("csv: cannot open `" + path + "`");

    std::string line;
    if (!std::getline(in, line)) throw ValidationError("csv: `" + path + "` is empty");
    if (line.rfind(kHeaderPrefix, 0) != 0) {
        throw ValidationError("csv: `" + path + "` has no `" + std::string(kHeaderPrefix) +
                              "...` header");
    }
    const std::string kind = line.substr(std::string(kHeaderPrefix).size());
    if (kind != "nodes" && kind != "claim") {
        throw ValidationError("csv: `" + path + "` holds kind=" + kind +
                              ", which carries no claim table");
    }
    if (!std::getline(in, line) || line != kNodeColumns) {
        throw ValidationError("csv: `" + path + "` second line must be `" +
                              std::string(kNodeColumns) + "`");
    }

    int max_step = -1;
    std::vector<std::pair<std::uint64_t, double>> rows;  // (path, y) of max_step rows
    int lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        const std::string where = path + ":" + std::to_string(lineno);
        if (fields.size() != 6) {
            throw ValidationError("csv: " + where + ": expected 6 fields, got " +
                                  std::to_string(fields.size()));
        }
        const int step = parse_int_strict(fields[0], where + " step");
        const std::uint64_t code = parse_u64_strict(fields[1], where + " path");
        const double y = parse_double_strict(fields[3], where + " y");
        if (step < 0) throw ValidationError("csv: " + where + ": negative step");
        if (step > max_step) {
            max_step = step;
            rows.clear();
        }
        if (step == max_step) rows.emplace_back(code, y);
    }
    if (max_step < 1) {
        throw ValidationError("csv: `" + path + "` holds no rows past step 0");
    }
    if (max_step > kDenseSolveStepCap) {
        throw SizeError("csv: `" + path + "` terminal step " + std::to_string(max_step) +
                        " exceeds the dense-solve cap " + std::to_string(kDenseSolveStepCap));
    }

    ClaimTable table;
    table.num_steps = max_step;
    const std::uint64_t count = std::uint64_t{1} << max_step;
    table.values.assign(count, 0.0);
    std::vector<bool> seen(count, false);
    for (const auto& [code, y] : rows) {
        if (code >= count) {
            throw ValidationError("csv: `" + path + "` path code " + std::to_string(code) +
                                  " out of range for step " + std::to_string(max_step));
        }
        if (seen[code]) {
            throw ValidationError("csv: `" + path + "` duplicate terminal row for path " +
                                  std::to_string(code));
        }
        seen[code] = true;
        table.values[code] = y;
    }
    if (rows.size() != count) {
        throw ValidationError("csv: `" + path + "` terminal layer covers " +
                              std::to_string(rows.size()) + " of " + std::to_string(count) +
                              " paths");
    }
    return table;
}

}  // namespace cbsde
