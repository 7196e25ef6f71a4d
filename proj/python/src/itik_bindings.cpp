#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "itik/harness.hpp"
#include "itik/merge.hpp"
#include "itik/norms.hpp"
#include "itik/oracle.hpp"
#include "itik/serialize.hpp"

namespace py = pybind11;
using namespace itik;

namespace {

NodeKind kind_from(const std::string& s) {
    if (s == "lobatto") return NodeKind::Lobatto;
    if (s == "gauss") return NodeKind::Gauss;
    throw ConfigError("node kind must be 'lobatto' or 'gauss'");
}

Side side_from(const std::string& s) {
    if (s == "south") return Side::South;
    if (s == "east") return Side::East;
    if (s == "north") return Side::North;
    if (s == "west") return Side::West;
    throw ConfigError("side must be south/east/north/west");
}

Rect rect_from(const std::array<double, 4>& r) { return Rect{r[0], r[1], r[2], r[3]}; }

}  // namespace

PYBIND11_MODULE(_itik, m) {
    m.doc() = "Impedance-to-impedance operators for the variable-coefficient "
              "Helmholtz equation on rectangles: spectral leaf solves, "
              "hierarchical merges, and closed-form verification modes.";

    py::register_exception<ConfigError>(m, "ItikConfigError", PyExc_ValueError);

    m.def("cheb_nodes",
          [](int n, const std::string& kind) { return cheb_nodes(n, kind_from(kind)).nodes; },
          py::arg("n"), py::arg("kind") = "lobatto");
    m.def("diff_matrix",
          [](int n, const std::string& kind) {
              return diff_matrix(cheb_nodes(n, kind_from(kind))).matrix;
          },
          py::arg("n"), py::arg("kind") = "lobatto");
    m.def("quad_weights",
          [](int n, const std::string& kind) { return quad_weights(cheb_nodes(n, kind_from(kind))); },
          py::arg("n"), py::arg("kind") = "lobatto");
    m.def("interp_matrix", &interp_matrix_nodes, py::arg("from_nodes"), py::arg("to_points"));

    py::class_<Potential>(m, "Potential")
        .def_static("constant", &Potential::constant)
        .def_static("affine", &Potential::affine)
        .def_static("gaussian_bump", &Potential::gaussian_bump)
        .def_static("parse", &Potential::parse)
        .def("__call__", [](const Potential& p, double x, double y) { return p(x, y); })
        .def("gradient", &Potential::gradient)
        .def_property_readonly("descriptor", &Potential::descriptor);

    m.def("reflect_potential", &reflect_potential);
    m.def("check_nontrapping",
          [](const Potential& V, std::array<double, 4> rect, std::array<double, 2> vertex,
             int samples) { return check_nontrapping(V, rect_from(rect), vertex, samples); },
          py::arg("potential"), py::arg("rect"), py::arg("vertex"), py::arg("samples") = 201);

    py::class_<LeafBox>(m, "LeafBox")
        .def(py::init([](std::array<double, 4> rect, const Potential& V, double k, int n_int,
                         int n_b) { return LeafBox(rect_from(rect), V, k, n_int, n_b); }),
             py::arg("rect"), py::arg("potential"), py::arg("k"), py::arg("n_int"),
             py::arg("n_b"))
        .def_property_readonly("k", &LeafBox::k)
        .def_property_readonly("n_int", &LeafBox::n_int)
        .def_property_readonly("n_b", &LeafBox::n_b)
        .def("iti_full", [](const LeafBox& l) { return l.iti_full(); })
        .def("iti_partial",
             [](const LeafBox& l, const std::string& side) { return l.iti_partial(side_from(side)); })
        .def("side_nodes",
             [](const LeafBox& l, const std::string& side) {
                 return l.layout().segments[static_cast<int>(side_from(side))].nodes;
             })
        .def("side_weights",
             [](const LeafBox& l, const std::string& side) {
                 return l.layout().segments[static_cast<int>(side_from(side))].weights;
             })
        .def("solve",
             [](const LeafBox& l, const Vec& g) {
                 FieldSolution s = l.solve(g);
                 py::dict out;
                 out["grid"] = s.grid_values;
                 out["u"] = s.u;
                 out["dnu"] = s.dnu;
                 out["dtau"] = s.dtau;
                 return out;
             },
             py::arg("boundary_data"))
        .def("grid_x", [](const LeafBox& l) { return l.xs(); })
        .def("grid_y", [](const LeafBox& l) { return l.ys(); });

    m.def("build_w",
          [](const Mat& R1, const Mat& R2, double tol) {
              auto [W, d] = build_W(R1, R2, tol);
              return py::make_tuple(W, d.sigma_min, d.cond);
          },
          py::arg("r1"), py::arg("r2"), py::arg("rel_tol") = 1e-12);

    m.def("merge_two",
          [](const LeafBox& a, const LeafBox& b) {
              MergeResult r = merge_nodes(from_leaf(a), from_leaf(b));
              py::dict out;
              out["iti"] = r.parent.iti;
              out["w"] = r.W;
              out["f1"] = r.F1;
              out["f2"] = r.F2;
              out["sigma_min"] = r.diag.sigma_min;
              return out;
          },
          py::arg("left"), py::arg("right"));

    m.def("direct_coupled_iti",
          [](const LeafBox& a, const LeafBox& b) {
              const ItINode direct = direct_coupled_iti({&a, &b});
              const MergeResult merged = merge_nodes(from_leaf(a), from_leaf(b));
              return reorder_operator(direct.iti, direct.layout, merged.parent.layout);
          },
          py::arg("left"), py::arg("right"),
          "Coupled one-factorization ItI of the union, on the merged layout.");

    m.def("iti_to_dtn", &iti_to_dtn, py::arg("r"), py::arg("k"), py::arg("rel_tol") = 1e-12);

    m.def("find_lambda", &oracle::find_lambda, py::arg("k"), py::arg("n"));
    m.def("lambda_residual", &oracle::lambda_residual, py::arg("k"), py::arg("lambda_"));
    m.def("mode_r_n", [](double k, int n) { return oracle::r_n(oracle::make_mode(k, n)); },
          py::arg("k"), py::arg("n"));
    m.def("mode_w_n",
          [](double k, int n, const VecR& y) {
              const auto mode = oracle::make_mode(k, n);
              Vec out(y.size());
              for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = oracle::w_n(mode, y[i]);
              return out;
          },
          py::arg("k"), py::arg("n"), py::arg("y"));
    m.def("mode_u_n",
          [](double k, int n, const VecR& x, const VecR& y) {
              const auto mode = oracle::make_mode(k, n);
              Mat out(x.size(), y.size());
              for (Eigen::Index i = 0; i < x.size(); ++i)
                  for (Eigen::Index j = 0; j < y.size(); ++j)
                      out(i, j) = oracle::u_n(mode, x[i], y[j]);
              return out;
          },
          py::arg("k"), py::arg("n"), py::arg("x"), py::arg("y"));
    m.def("sharpness_point",
          [](double alpha, int n) {
              const auto p = oracle::sharpness_sequence(alpha, n);
              return py::make_tuple(p.k, p.ratio);
          },
          py::arg("alpha"), py::arg("n"));

    m.def("op_norm",
          [](const Mat& T, const MatR& gsrc, const MatR& gtgt) {
              return op_norm(T, GramMatrix(gsrc, NormKind::L2, 0.0),
                             GramMatrix(gtgt, NormKind::L2, 0.0));
          },
          py::arg("t"), py::arg("gram_src"), py::arg("gram_tgt"));
    m.def("min_gain",
          [](const Mat& T, const MatR& gsrc, const MatR& gtgt) {
              return min_gain(T, GramMatrix(gsrc, NormKind::L2, 0.0),
                              GramMatrix(gtgt, NormKind::L2, 0.0));
          },
          py::arg("t"), py::arg("gram_src"), py::arg("gram_tgt"));

    m.def("save_iti", &save_iti_binary, py::arg("path"), py::arg("matrix"));
    m.def("load_iti", &load_iti_binary, py::arg("path"));
}
