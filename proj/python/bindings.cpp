#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "selfadj/bcalg.hpp"
#include "selfadj/cli.hpp"
#include "selfadj/endpoints.hpp"
#include "selfadj/errors.hpp"
#include "selfadj/spectral.hpp"
#include "selfadj/verify.hpp"

namespace py = pybind11;
using namespace selfadj;

namespace {

Interval interval(double a, double b) {
    Interval iv{a, b};
    if (!iv.valid()) throw InvalidInput("need a < b");
    return iv;
}

py::dict endpoint_dict(const EndpointInfo& e) {
    py::dict d;
    d["side"] = to_string(e.side);
    d["point"] = e.point;
    d["kind"] = to_string(e.kind);
    d["count_plus"] = e.count_plus;
    d["count_minus"] = e.count_minus;
    d["method"] = e.method;
    d["inconclusive"] = e.inconclusive;
    d["fastpath"] = e.fastpath ? py::cast(e.fastpath->criterion) : py::none();
    return d;
}

BcKind kind_from(const std::string& s) {
    const auto k = bc_kind_from_string(s);
    if (!k) throw InvalidInput("unknown boundary condition kind " + s);
    return *k;
}

}  // namespace

PYBIND11_MODULE(_selfadj, m) {
    m.doc() = "Self-adjoint realizations of ordinary differential expressions";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<NumericalFailure>(m, "NumericalFailure", base.ptr());
    py::register_exception<Unsupported>(m, "Unsupported", base.ptr());

    m.attr("inf") = kInf;

    py::class_<Coefficient>(m, "Coefficient")
        .def_static("zero", &Coefficient::zero)
        .def_static("constant", &Coefficient::constant, py::arg("c"))
        .def_static("power", &Coefficient::power, py::arg("c"), py::arg("p"))
        .def_static("harmonic", &Coefficient::harmonic)
        .def_static("inverse_square", &Coefficient::inverse_square, py::arg("alpha"))
        .def_static("tabulated", &Coefficient::tabulated, py::arg("xs"), py::arg("ys"))
        .def("__call__", &Coefficient::operator(), py::arg("x"))
        .def("derivative", &Coefficient::derivative, py::arg("k"), py::arg("x"))
        .def("__add__", [](const Coefficient& a, const Coefficient& b) { return a + b; });

    py::class_<DifferentialExpression>(m, "DifferentialExpression")
        .def_static("momentum", &DifferentialExpression::momentum)
        .def_static("schrodinger", &DifferentialExpression::schrodinger, py::arg("potential"))
        .def_static(
            "even",
            [](const std::vector<std::pair<int, Coefficient>>& terms) {
                std::vector<EvenTerm> t;
                for (const auto& [k, f] : terms) t.push_back({k, f});
                return DifferentialExpression::canonical(std::move(t), {});
            },
            py::arg("terms"), "Purely even expression from (k, f) pairs: sum (-d/dx)^k f (d/dx)^k.")
        .def_property_readonly("order", &DifferentialExpression::order)
        .def("is_schrodinger", &DifferentialExpression::is_schrodinger);

    // boundary conditions
    py::enum_<Side>(m, "Side").value("left", Side::Left).value("right", Side::Right);
    py::enum_<AbvLayout>(m, "AbvLayout")
        .value("full", AbvLayout::Full)
        .value("left", AbvLayout::LeftOnly)
        .value("right", AbvLayout::RightOnly);
    py::class_<MatrixPair>(m, "MatrixPair")
        .def(py::init<MatrixXc, MatrixXc>(), py::arg("A"), py::arg("B"))
        .def_readwrite("A", &MatrixPair::A)
        .def_readwrite("B", &MatrixPair::B);
    py::class_<SMatrix>(m, "SMatrix").def(py::init<MatrixXc>(), py::arg("S")).def_readwrite("S", &SMatrix::S);
    py::class_<HalfMatrix>(m, "HalfMatrix")
        .def(py::init<MatrixXc, Side>(), py::arg("A"), py::arg("at") = Side::Left)
        .def_readwrite("A", &HalfMatrix::A)
        .def_readwrite("at", &HalfMatrix::at);
    py::class_<AbvUnitary>(m, "AbvUnitary")
        .def(py::init<MatrixXc, double, AbvLayout>(), py::arg("U"), py::arg("tau") = 1.0,
             py::arg("layout") = AbvLayout::Full)
        .def_readwrite("U", &AbvUnitary::U)
        .def_readwrite("tau", &AbvUnitary::tau)
        .def_readwrite("layout", &AbvUnitary::layout);
    py::class_<RobinEnd>(m, "RobinEnd")
        .def(py::init<bool, double>(), py::arg("dirichlet") = false, py::arg("lambda_") = 0.0)
        .def_readwrite("dirichlet", &RobinEnd::dirichlet)
        .def_readwrite("lambda_", &RobinEnd::lambda);
    py::class_<Robin>(m, "Robin")
        .def(py::init<std::optional<RobinEnd>, std::optional<RobinEnd>>(), py::arg("left") = std::nullopt,
             py::arg("right") = std::nullopt)
        .def_readwrite("left", &Robin::left)
        .def_readwrite("right", &Robin::right);
    py::class_<QuasiPeriodic>(m, "QuasiPeriodic")
        .def(py::init<double>(), py::arg("vartheta"))
        .def_readwrite("vartheta", &QuasiPeriodic::vartheta);
    py::class_<MomentumPhase>(m, "MomentumPhase")
        .def(py::init<double>(), py::arg("vartheta"))
        .def_readwrite("vartheta", &MomentumPhase::vartheta);
    py::class_<SingularAsymptotic>(m, "SingularAsymptotic")
        .def(py::init<double, double, double>(), py::arg("alpha") = 1.0, py::arg("vartheta") = 0.0,
             py::arg("mu0") = 1.0)
        .def_readwrite("alpha", &SingularAsymptotic::alpha)
        .def_readwrite("vartheta", &SingularAsymptotic::vartheta)
        .def_readwrite("mu0", &SingularAsymptotic::mu0)
        .def_property_readonly("varkappa", &SingularAsymptotic::varkappa);

    m.def("kind_of", [](const BoundaryCondition& bc) { return std::string(to_string(kind_of(bc))); });
    m.def(
        "validate",
        [](const BoundaryCondition& bc, int n) {
            const auto r = validate(bc, n);
            py::dict d;
            d["ok"] = r.ok;
            d["violated"] = r.violated;
            d["residual"] = r.residual;
            return d;
        },
        py::arg("bc"), py::arg("n") = 2);
    m.def(
        "convert",
        [](const BoundaryCondition& bc, const std::string& kind, int n, double tau) {
            return convert(bc, kind_from(kind), n, tau);
        },
        py::arg("bc"), py::arg("kind"), py::arg("n") = 2, py::arg("tau") = 1.0);
    m.def("residual_equivalent", &residual_equivalent, py::arg("x"), py::arg("y"), py::arg("n") = 2,
          py::arg("seed") = 1, py::arg("samples") = 50, py::arg("tol") = 1e-9);
    m.def(
        "named_presets",
        [](double l) {
            std::vector<std::pair<std::string, BoundaryCondition>> out;
            for (auto& p : named_presets(l)) out.emplace_back(p.name, p.bc);
            return out;
        },
        py::arg("l"));
    m.def("epsilon_matrix", &epsilon_matrix, py::arg("n"));
    m.def(
        "diagonalizer", [](int n) {
            const auto d = diagonalizer(n);
            return std::make_pair(d.T, d.Sigma);
        },
        py::arg("n"));
    m.def("vartheta_map", &vartheta_map, py::arg("theta"), py::arg("kappa"), py::arg("l"));

    // endpoints
    m.def(
        "classify_endpoint",
        [](const DifferentialExpression& e, double a, double b, Side s) {
            return std::string(to_string(classify_endpoint(e, interval(a, b), s)));
        },
        py::arg("expr"), py::arg("a"), py::arg("b"), py::arg("side"));
    m.def(
        "deficiency_indices",
        [](const DifferentialExpression& e, double a, double b, double kappa, bool use_fastpath) {
            DeficiencyOptions o;
            o.kappa = kappa;
            o.use_fastpath = use_fastpath;
            DeficiencyReport r;
            {
                py::gil_scoped_release nogil;
                r = deficiency_indices(e, interval(a, b), o);
            }
            py::dict d;
            d["m_plus"] = r.m_plus;
            d["m_minus"] = r.m_minus;
            d["kappa"] = r.kappa;
            d["order"] = r.order;
            d["inconclusive"] = r.inconclusive;
            d["left"] = endpoint_dict(r.left);
            d["right"] = endpoint_dict(r.right);
            d["notes"] = r.notes;
            return d;
        },
        py::arg("expr"), py::arg("a"), py::arg("b"), py::arg("kappa") = 1.0, py::arg("use_fastpath") = true);

    // spectra
    py::class_<SolutionTrajectory>(m, "Trajectory")
        .def_property_readonly("lo", &SolutionTrajectory::lo)
        .def_property_readonly("hi", &SolutionTrajectory::hi)
        .def("grid", &SolutionTrajectory::grid)
        .def("value", &SolutionTrajectory::value, py::arg("x"))
        .def("state", &SolutionTrajectory::state, py::arg("x"))
        .def("norm_squared", py::overload_cast<>(&SolutionTrajectory::norm_squared, py::const_));
    py::class_<Spectrum>(m, "Spectrum")
        .def_readonly("eigenvalues", &Spectrum::eigenvalues)
        .def_readonly("residuals", &Spectrum::residuals)
        .def_readonly("multiplicity", &Spectrum::multiplicity)
        .def_readonly("eigenfunctions", &Spectrum::eigenfunctions)
        .def_readonly("method", &Spectrum::method);
    m.def(
        "eigenvalues",
        [](const DifferentialExpression& e, double a, double b, const BoundaryCondition& bc, double e_min,
           double e_max, int max_count, double max_x, bool with_eigenfunctions) {
            SpectralOptions o;
            o.max_x = max_x;
            o.with_eigenfunctions = with_eigenfunctions;
            py::gil_scoped_release nogil;
            return eigenvalues(e, interval(a, b), bc, {e_min, e_max}, max_count, o);
        },
        py::arg("expr"), py::arg("a"), py::arg("b"), py::arg("bc"), py::arg("e_min"), py::arg("e_max"),
        py::arg("max_count") = 1000, py::arg("max_x") = 0.0, py::arg("with_eigenfunctions") = false);
    m.def("momentum_spectrum", &momentum_spectrum, py::arg("l"), py::arg("vartheta"), py::arg("k_min"),
          py::arg("k_max"));
    m.def(
        "eigenfunction",
        [](const DifferentialExpression& e, double a, double b, const BoundaryCondition& bc, double energy) {
            py::gil_scoped_release nogil;
            return eigenfunction(e, interval(a, b), bc, energy);
        },
        py::arg("expr"), py::arg("a"), py::arg("b"), py::arg("bc"), py::arg("e"));
    m.def(
        "singular_fit",
        [](const SolutionTrajectory& t, double alpha, double mu0, double x_fit) {
            const auto f = singular_fit(t, alpha, mu0, x_fit);
            return std::make_pair(f.c_plus, f.c_minus);
        },
        py::arg("trajectory"), py::arg("alpha"), py::arg("mu0"), py::arg("x_fit"));

    // verification
    m.def(
        "symmetry_probe",
        [](const DifferentialExpression& e, double a, double b, const BoundaryCondition& bc, int samples,
           unsigned seed) {
            const auto r = symmetry_probe(e, interval(a, b), bc, samples, seed);
            return std::make_pair(r.max_delta, r.max_lagrange_discrepancy);
        },
        py::arg("expr"), py::arg("a"), py::arg("b"), py::arg("bc"), py::arg("samples") = 20, py::arg("seed") = 1);
    m.def(
        "boundary_form_limit",
        [](const DifferentialExpression& e, const std::function<std::vector<cplx>(double)>& stack, double endpoint,
           double anchor, int windows, double ratio) {
            LimitOptions o;
            o.anchor = anchor;
            o.windows = windows;
            o.ratio = ratio;
            const auto r = boundary_form_limit(
                e, [&](double x) { return DerivativeStack{x, stack(x)}; }, endpoint, o);
            return std::make_pair(r.converged, r.value);
        },
        py::arg("expr"), py::arg("stack"), py::arg("endpoint"), py::arg("anchor") = std::nan(""),
        py::arg("windows") = 8, py::arg("ratio") = 2.0);

    // command front end
    m.def(
        "run",
        [](const std::string& config_text, const std::string& command, unsigned seed, std::optional<double> max_x,
           const std::string& base_dir) {
            cli::RunOptions o;
            o.seed = seed;
            o.max_x = max_x;
            const auto cfg = cli::parse_config(config_text, base_dir);
            cli::RunResult r;
            {
                py::gil_scoped_release nogil;
                r = cli::run(cfg, command, o);
            }
            return py::make_tuple(r.exit_code, r.report, r.csv);
        },
        py::arg("config"), py::arg("command"), py::arg("seed") = 1, py::arg("max_x") = std::nullopt,
        py::arg("base_dir") = ".", "Returns (exit_code, json_report, csv).");
    m.def(
        "canonical_config", [](const std::string& text) { return cli::serialize_config(cli::parse_config(text)); },
        py::arg("config"));
}
