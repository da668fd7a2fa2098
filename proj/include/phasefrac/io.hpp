#pragma once

#include "mesh.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace phasefrac {

/// Named array with `components` values per entity.
struct Field
{
    std::string name;
    int components = 1;
    std::vector<double> values;
};

namespace detail {

inline std::string sci(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8e", v);
    return buf;
}

inline void write_fields(std::ostream &out, const std::vector<Field> &fields, std::size_t n, const char *what)
{
    for (const auto &f : fields) {
        if (f.components < 1 || f.components > 3 || f.values.size() != n * static_cast<std::size_t>(f.components))
            throw Error(ErrorCategory::invalid_argument, std::string("write_vtk: ") + what + " field '" + f.name +
                                                             "' has inconsistent length");
        if (f.components == 1)
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
        else
            out << "VECTORS " << f.name << " double\n";
        for (std::size_t i = 0; i < n; ++i) {
            if (f.components == 1) {
                out << sci(f.values[i]) << '\n';
                continue;
            }
            for (int k = 0; k < 3; ++k)
                out << (k ? " " : "") << sci(k < f.components ? f.values[i * f.components + k] : 0.0);
            out << '\n';
        }
    }
}

} // namespace detail

/**
 * Legacy ASCII VTK unstructured grid. Numbers use 9 significant digits in
 * scientific notation. Vector fields with 2 components are padded to 3.
 */
template <int Dim>
void write_vtk(const Mesh<Dim> &mesh, const std::vector<Field> &point_fields, const std::vector<Field> &cell_fields,
               const std::string &path)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
    out << "# vtk DataFile Version 3.0\nphasefrac\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out << "POINTS " << mesh.n_nodes() << " double\n";
    for (const auto &x : mesh.nodes()) {
        for (int k = 0; k < 3; ++k)
            out << (k ? " " : "") << detail::sci(k < Dim ? x[k] : 0.0);
        out << '\n';
    }
    out << "CELLS " << mesh.n_cells() << ' ' << mesh.n_cells() * (Dim + 2) << '\n';
    for (const auto &cl : mesh.cells()) {
        out << Dim + 1;
        for (index_t v : cl)
            out << ' ' << v;
        out << '\n';
    }
    out << "CELL_TYPES " << mesh.n_cells() << '\n';
    for (std::size_t c = 0; c < mesh.n_cells(); ++c)
        out << (Dim == 2 ? 5 : 10) << '\n';
    if (!point_fields.empty()) {
        out << "POINT_DATA " << mesh.n_nodes() << '\n';
        detail::write_fields(out, point_fields, mesh.n_nodes(), "point");
    }
    if (!cell_fields.empty()) {
        out << "CELL_DATA " << mesh.n_cells() << '\n';
        detail::write_fields(out, cell_fields, mesh.n_cells(), "cell");
    }
    if (!out)
        throw Error(ErrorCategory::io, "failed writing '" + path + "'");
}

struct CsvRow
{
    std::size_t step;
    double load;
    double reaction;
    std::size_t iterations;
    std::size_t n_cells;
    double eta_global;
};

inline void write_csv(const std::vector<CsvRow> &rows, const std::string &path)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCategory::io, "cannot open '" + path + "' for writing");
    out << "step,load_mm,reaction_kN,iterations,n_cells,eta_global\n";
    for (const auto &r : rows)
        out << r.step << ',' << detail::sci(r.load) << ',' << detail::sci(r.reaction) << ',' << r.iterations << ','
            << r.n_cells << ',' << detail::sci(r.eta_global) << '\n';
    if (!out)
        throw Error(ErrorCategory::io, "failed writing '" + path + "'");
}

} // namespace phasefrac
