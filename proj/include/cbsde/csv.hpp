#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cbsde/lattice.hpp"
#include "cbsde/solver.hpp"

namespace cbsde {

// CSV schema, versioned in the first line of every file:
//   # cbsde csv v1 kind=<nodes|claim|curve>
// kind=nodes / kind=claim share the columns
//   step,path,w,y,z,dc
// with one row per node (path is the path-prefix code; z and dc are empty on
// the terminal layer and in claim files). kind=curve has columns alpha,total.
// All floating-point values are printed with 17 significant digits so a
// re-import reproduces the exact doubles.

// Node table for the selected steps (empty selection = all steps 0..N).
// Level-layout solutions are expanded to path order, which requires a
// dense-tractable lattice.
void write_nodes_csv(std::ostream& out, const Solution& solution, const Lattice& lattice,
                     const std::vector<int>& steps);

// Terminal-layer table of a claim given by its path-ordered terminal values.
void write_claim_csv(std::ostream& out, const Lattice& lattice,
                     const std::vector<double>& terminal_values);

void write_curve_csv(std::ostream& out, const std::vector<std::pair<double, double>>& curve);

// Terminal values recovered from a nodes or claim CSV: the rows of the
// largest step present must cover every path code exactly once.
struct ClaimTable {
    int num_steps = 0;
    std::vector<double> values;  // path-code order
};

ClaimTable read_claim_table_csv(const std::string& path);

}  // namespace cbsde
