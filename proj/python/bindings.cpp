#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fraclap/error.hpp"
#include "fraclap/io.hpp"
#include "fraclap/pde.hpp"

namespace py = pybind11;
using namespace fraclap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// numpy arrays use C order, so the x-fastest field maps to shape (nz, ny, nx).
std::vector<py::ssize_t> field_shape(const GridSpec& g) {
  if (g.d == 2) return {g.n[1], g.n[0]};
  return {g.n[2], g.n[1], g.n[0]};
}

Array to_array(const GridSpec& g, const std::vector<double>& v) {
  Array out(field_shape(g));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<double> from_array(const GridSpec& g, const Array& a) {
  if (static_cast<std::size_t>(a.size()) != g.size())
    throw ShapeMismatch("array has " + std::to_string(a.size()) + " values, grid has " + std::to_string(g.size()));
  return std::vector<double>(a.data(), a.data() + a.size());
}

py::dict report_dict(const StudyReport& r) {
  py::dict d;
  d["kind"] = r.kind;
  d["alpha"] = r.params.alpha;
  d["gamma"] = r.params.gamma;
  d["d"] = r.params.d;
  d["s"] = r.s;
  d["ref_h"] = r.ref_h;
  d["h"] = r.h;
  d["err_inf"] = r.err_inf;
  d["err_2"] = r.err_2;
  d["rate_inf"] = r.rate_inf;
  d["rate_2"] = r.rate_2;
  d["argmax_boundary_dist"] = r.argmax_boundary_dist;
  d["cg_iters"] = r.cg_iters;
  d["seconds"] = r.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fraclap, m) {
  m.doc() = "Finite difference discretization of the integral fractional Laplacian";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ShapeMismatch>(m, "ShapeMismatch", base.ptr());
  py::register_exception<CapExceeded>(m, "CapExceeded", base.ptr());
  py::register_exception<NonNestedGrids>(m, "NonNestedGrids", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  py::class_<QuadConfig>(m, "QuadConfig")
      .def(py::init([](double rel_tol, double abs_tol) {
             QuadConfig q;
             q.rel_tol = rel_tol;
             q.abs_tol = abs_tol;
             q.validate();
             return q;
           }),
           py::arg("rel_tol") = 1e-12, py::arg("abs_tol") = 1e-15)
      .def_readwrite("rel_tol", &QuadConfig::rel_tol)
      .def_readwrite("abs_tol", &QuadConfig::abs_tol);

  py::class_<FracParams>(m, "FracParams")
      .def(py::init([](int d, double alpha, double gamma) {
             FracParams p{d, alpha, gamma};
             p.validate();
             return p;
           }),
           py::arg("d") = 2, py::arg("alpha") = 1.0, py::arg("gamma") = 2.0)
      .def_readonly("d", &FracParams::d)
      .def_readonly("alpha", &FracParams::alpha)
      .def_readonly("gamma", &FracParams::gamma)
      .def("__repr__", [](const FracParams& p) {
        return "FracParams(d=" + std::to_string(p.d) + ", alpha=" + std::to_string(p.alpha) +
               ", gamma=" + std::to_string(p.gamma) + ")";
      });

  m.def("norm_const", &norm_const, py::arg("d"), py::arg("alpha"));

  m.def(
      "cell_weight_2d",
      [](double p, std::array<double, 2> lo, std::array<double, 2> hi, const QuadConfig& q) {
        return cell_weight_2d(WeightExponent{p}, Box2{lo, hi}, q);
      },
      py::arg("p"), py::arg("lo"), py::arg("hi"), py::arg("cfg") = QuadConfig{});
  m.def(
      "cell_weight_3d",
      [](double p, std::array<double, 3> lo, std::array<double, 3> hi, const QuadConfig& q) {
        return cell_weight_3d(WeightExponent{p}, Box3{lo, hi}, q);
      },
      py::arg("p"), py::arg("lo"), py::arg("hi"), py::arg("cfg") = QuadConfig{});
  m.def("tail_weight_2d", &tail_weight_2d, py::arg("alpha"), py::arg("L"), py::arg("cfg") = QuadConfig{});
  m.def("tail_weight_3d", &tail_weight_3d, py::arg("alpha"), py::arg("L"), py::arg("cfg") = QuadConfig{});

  py::class_<Stencil>(m, "Stencil")
      .def_readonly("params", &Stencil::params)
      .def_readonly("N", &Stencil::N)
      .def_readonly("h", &Stencil::h)
      .def_readonly("c_norm", &Stencil::c_norm)
      .def_readonly("tail", &Stencil::tail)
      .def_property_readonly("coeffs",
                             [](const Stencil& st) {
                               const auto e = static_cast<py::ssize_t>(st.extent());
                               std::vector<py::ssize_t> shape(st.params.d, e);
                               Array out(shape);
                               std::copy(st.coeffs.begin(), st.coeffs.end(), out.mutable_data());
                               return out;
                             })
      .def("origin_identity", &Stencil::origin_identity);

  m.def("build_stencil", &build_stencil, py::arg("params"), py::arg("N"), py::arg("h"),
        py::arg("cfg") = QuadConfig{}, py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());
  m.def("read_stencil", [](const std::string& p) { return read_stencil(p); });
  m.def("write_stencil", [](const std::string& p, const Stencil& st) { write_stencil(p, st); });

  py::class_<GridSpec>(m, "GridSpec")
      .def_static("cube", &GridSpec::cube, py::arg("d"), py::arg("a"), py::arg("b"), py::arg("N"))
      .def_readonly("d", &GridSpec::d)
      .def_readonly("h", &GridSpec::h)
      .def_readonly("N", &GridSpec::N)
      .def_property_readonly("shape", [](const GridSpec& g) { return field_shape(g); })
      .def_property_readonly("size", &GridSpec::size)
      .def("coords", [](const GridSpec& g, int axis) {
        if (axis < 0 || axis >= g.d) throw ShapeMismatch("axis out of range");
        std::vector<double> x(g.n[axis]);
        for (int i = 0; i < g.n[axis]; ++i) x[i] = g.coord(axis, i);
        return x;
      });

  py::class_<FractionalOperator>(m, "FractionalOperator")
      .def(py::init<const Stencil&, const GridSpec&>(), py::arg("stencil"), py::arg("grid"))
      .def_property_readonly("grid", &FractionalOperator::grid)
      .def_property_readonly("fft_shape", &FractionalOperator::fft_shape)
      .def("apply",
           [](const FractionalOperator& op, const Array& u) {
             const auto v = from_array(op.grid(), u);
             std::vector<double> out(v.size());
             {
               py::gil_scoped_release nogil;
               op.apply(v, out);
             }
             return to_array(op.grid(), out);
           })
      .def("apply_dense",
           [](const FractionalOperator& op, const Array& u) {
             const auto v = from_array(op.grid(), u);
             std::vector<double> out(v.size());
             op.apply_dense(v, out);
             return to_array(op.grid(), out);
           })
      .def("dense_matrix", [](const FractionalOperator& op) { return dense_matrix(op); })
      .def("smallest_eigenvalue", [](const FractionalOperator& op) { return smallest_eigen_check(op); });

  m.def(
      "poisson_solve",
      [](const FractionalOperator& op, const Array& f, double tol) {
        Field rhs(op.grid(), from_array(op.grid(), f));
        CgConfig cg;
        cg.tol = tol;
        PoissonResult r;
        {
          py::gil_scoped_release nogil;
          r = poisson_solve(op, rhs, cg);
        }
        py::dict d;
        d["u"] = to_array(op.grid(), r.u.values);
        d["iters"] = r.iters;
        d["resid"] = r.resid;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("op"), py::arg("f"), py::arg("tol") = 1e-10);

  m.def(
      "manufactured",
      [](const GridSpec& g, double s) { return to_array(g, manufactured_field(ManufacturedFn{s, g.d}, g).values); },
      py::arg("grid"), py::arg("s"));

  m.def(
      "truncation_study",
      [](const FracParams& p, double s, std::vector<double> h, double ref_h) {
        StudyReport r;
        {
          py::gil_scoped_release nogil;
          r = truncation_study(p, s, h, ref_h);
        }
        return report_dict(r);
      },
      py::arg("params"), py::arg("s"), py::arg("h"), py::arg("ref_h"));

  m.def(
      "read_field",
      [](const std::string& path) {
        const Field f = read_field(path);
        return py::make_tuple(to_array(f.grid, f.values), f.grid);
      },
      py::arg("path"));

  m.def(
      "mass", [](const GridSpec& g, const Array& u) { return mass(Field(g, from_array(g, u))); }, py::arg("grid"),
      py::arg("u"));
}
