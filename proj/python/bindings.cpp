#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "activesense/alternating.hpp"
#include "activesense/harness.hpp"

namespace py = pybind11;
using namespace activesense;

namespace {

StrategyRun run_named(const std::string& strategy, const SceneParams& scene,
                      const SensingConfig& config, std::uint64_t seed, bool trace) {
    RunOptions opt;
    opt.trace = trace;
    return run_strategy(strategy_from_string(strategy), scene, config, SeedSequence(seed), opt);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bound-optimal active sensing for MIMO radar";

    auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigurationError>(m, "ConfigurationError", error);
    py::register_exception<DimensionMismatch>(m, "DimensionMismatch", error);
    py::register_exception<NonIdentifiable>(m, "NonIdentifiable", error);
    py::register_exception<NonConverged>(m, "NonConverged", error);

    py::class_<ArrayGeometry>(m, "ArrayGeometry")
        .def(py::init<int, int>(), py::arg("n_tx"), py::arg("n_rx"))
        .def_readwrite("n_tx", &ArrayGeometry::n_tx)
        .def_readwrite("n_rx", &ArrayGeometry::n_rx);

    py::class_<SceneParams>(m, "SceneParams")
        .def(py::init<RVector, CVector>(), py::arg("angles"), py::arg("coeffs"))
        .def_readwrite("angles", &SceneParams::angles)
        .def_readwrite("coeffs", &SceneParams::coeffs)
        .def("to_real", &SceneParams::to_real)
        .def_static("from_real", &SceneParams::from_real, py::arg("theta"));

    py::class_<BeamformerPair>(m, "BeamformerPair")
        .def(py::init([](CMatrix v, CMatrix w) { return BeamformerPair{std::move(v), std::move(w)}; }),
             py::arg("v"), py::arg("w"))
        .def_readwrite("v", &BeamformerPair::v)
        .def_readwrite("w", &BeamformerPair::w);

    py::class_<AngleRange>(m, "AngleRange")
        .def(py::init([](double lo, double hi) { return AngleRange{lo, hi}; }), py::arg("min"),
             py::arg("max"))
        .def_readwrite("min", &AngleRange::min)
        .def_readwrite("max", &AngleRange::max);

    py::class_<PosteriorState>(m, "PosteriorState")
        .def_readonly("targets", &PosteriorState::targets)
        .def_readonly("points", &PosteriorState::points)
        .def_property_readonly("weights", &PosteriorState::weights)
        .def_property_readonly("size", &PosteriorState::size)
        .def_property_readonly("stages", [](const PosteriorState& p) { return p.history.size(); })
        .def_static("point_mass", &PosteriorState::point_mass, py::arg("scene"),
                    py::arg("cov") = CMatrix());

    m.def("steering_vector", &steering_vector, py::arg("count"), py::arg("angle"));
    m.def("target_response", &target_response, py::arg("scene"), py::arg("geometry"));
    m.def("simulate_measurement",
          [](const SceneParams& scene, const ArrayGeometry& geom, const BeamformerPair& pair,
             std::uint64_t seed) {
              std::mt19937_64 rng(seed);
              return simulate_measurement(scene, geom, pair, rng);
          },
          py::arg("scene"), py::arg("geometry"), py::arg("beams"), py::arg("seed"));

    m.def("init_posterior",
          [](AngleRange range, int per_angle, int targets) {
              return init_posterior(range, per_angle, targets);
          },
          py::arg("range"), py::arg("per_angle"), py::arg("targets") = 1);
    m.def("assimilate", &assimilate, py::arg("state"), py::arg("beams"), py::arg("geometry"),
          py::arg("measurement"));
    m.def("mmse_estimate", &mmse_estimate, py::arg("state"));

    m.def("angle_weights", &angle_weights, py::arg("targets"));
    m.def("rx_projector", &rx_projector, py::arg("w"));
    m.def("data_fim", &data_fim, py::arg("state"), py::arg("v"), py::arg("r_w"),
          py::arg("geometry"));
    m.def("prior_fim", [](const PosteriorState& p, const ArrayGeometry& g) {
        return prior_fim(p, g).matrix;
    }, py::arg("state"), py::arg("geometry"));
    m.def("bcrb_value", &bcrb_value, py::arg("q"), py::arg("j"));
    m.def("ky_fan_value", &ky_fan_value, py::arg("matrix"), py::arg("count"));

    py::class_<SensingConfig>(m, "SensingConfig")
        .def(py::init<>())
        .def_readwrite("n_tx", &SensingConfig::n_tx)
        .def_readwrite("n_rx", &SensingConfig::n_rx)
        .def_readwrite("m_tx", &SensingConfig::m_tx)
        .def_readwrite("m_rx", &SensingConfig::m_rx)
        .def_readwrite("stages", &SensingConfig::stages)
        .def_readwrite("t_explore", &SensingConfig::t_explore)
        .def_readwrite("i_max", &SensingConfig::i_max)
        .def_readwrite("power", &SensingConfig::power)
        .def_readwrite("grid_size", &SensingConfig::grid_size)
        .def_readwrite("angle_range", &SensingConfig::angle_range)
        .def_readwrite("targets", &SensingConfig::targets)
        .def("geometry", &SensingConfig::geometry)
        .def("validate", &SensingConfig::validate);

    py::class_<StageRecord>(m, "StageRecord")
        .def_readonly("stage", &StageRecord::stage)
        .def_readonly("beams", &StageRecord::beams)
        .def_readonly("measurement", &StageRecord::measurement)
        .def_readonly("bcrb", &StageRecord::bcrb)
        .def_readonly("rx_certificate", &StageRecord::rx_certificate)
        .def_readonly("tx_certificate", &StageRecord::tx_certificate)
        .def_readonly("beta", &StageRecord::beta)
        .def_readonly("sq_error", &StageRecord::sq_error)
        .def_readonly("weights", &StageRecord::weights);

    py::class_<StrategyRun>(m, "StrategyRun")
        .def_property_readonly("strategy", [](const StrategyRun& r) { return to_string(r.strategy); })
        .def_readonly("estimate", &StrategyRun::estimate)
        .def_readonly("stages", &StrategyRun::stages)
        .def_readonly("grid_points", &StrategyRun::grid_points);

    m.def("run_strategy", &run_named, py::arg("strategy"), py::arg("scene"), py::arg("config"),
          py::arg("seed"), py::arg("trace") = false);
    m.def("angle_error", &angle_error, py::arg("truth"), py::arg("estimate"));

    py::class_<CellResult>(m, "CellResult")
        .def_readonly("strategy", &CellResult::strategy)
        .def_readonly("snr_db", &CellResult::snr_db)
        .def_readonly("t_explore", &CellResult::t_explore)
        .def_readonly("trials", &CellResult::trials)
        .def_readonly("wmse_mean", &CellResult::wmse_mean)
        .def_readonly("wmse_stderr", &CellResult::wmse_stderr)
        .def_readonly("failures", &CellResult::failures)
        .def_readonly("bcrb_mean", &CellResult::bcrb_mean)
        .def_readonly("errors", &CellResult::errors);

    py::class_<WmseReport>(m, "WmseReport")
        .def_readonly("cells", &WmseReport::cells)
        .def("find", [](const WmseReport& r, const std::string& s, double snr, int t) {
            const CellResult* c = r.find(s, snr, t);
            return c ? std::optional<CellResult>(*c) : std::nullopt;
        }, py::arg("strategy"), py::arg("snr_db"), py::arg("t_explore"));

    m.def("run_experiment", [](const std::string& spec_json) {
        ExperimentSpec spec = parse_spec(spec_json);
        py::gil_scoped_release release;
        return run_experiment(spec);
    }, py::arg("spec_json"), "Run an experiment described by a JSON spec string.");
    m.def("format_csv", &format_csv, py::arg("report"));
    m.def("parse_csv", &parse_csv, py::arg("text"));
    m.def("snr_to_power", &snr_to_power, py::arg("snr_db"));
}
