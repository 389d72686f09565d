// Python bindings for the simulator core

#include "floq/device.hpp"
#include "floq/dynamics.hpp"
#include "floq/effective.hpp"
#include "floq/experiments.hpp"
#include "floq/qop.hpp"

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace floq;

namespace {

qop::QuantumState make_state(const qop::HilbertSpace& space, const Eigen::VectorXcd& psi) {
  return qop::QuantumState::pure(space, psi);
}

effective::ChainConfig chain_from_bonds(int n_qubits, const std::vector<std::array<double, 4>>& bonds,
                                        double detuning_blue_mhz) {
  effective::ChainConfig cfg;
  cfg.n_qubits = n_qubits;
  int b = 0;
  for (const auto& bond : bonds) {
    cfg.couplings.emplace_back(b, bond[0], bond[1], bond[2], bond[3]);
    ++b;
  }
  cfg.detuning_blue_mhz = detuning_blue_mhz;
  cfg.validate();
  return cfg;
}

py::dict trajectory_populations(const dynamics::Trajectory& traj) {
  py::dict out;
  out["times_ns"] = traj.times;
  if (!traj.states.empty()) {
    std::vector<std::vector<double>> pops;
    for (const auto& st : traj.states) pops.push_back(st.populations());
    out["populations"] = pops;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Floquet-engineered transmon chain simulator";

  // --- qop -------------------------------------------------------------
  py::class_<qop::HilbertSpace>(m, "HilbertSpace")
      .def(py::init<std::vector<int>>(), py::arg("site_dims"))
      .def_static("qubits", &qop::HilbertSpace::qubits, py::arg("n"))
      .def_property_readonly("dimension", &qop::HilbertSpace::dimension)
      .def_property_readonly("site_dims", &qop::HilbertSpace::site_dims)
      .def("basis_index", py::overload_cast<const std::string&>(&qop::HilbertSpace::basis_index, py::const_))
      .def("__eq__", [](const qop::HilbertSpace& a, const qop::HilbertSpace& b) { return a == b; });

  m.def(
      "site_operator",
      [](const std::string& label, int site, const qop::HilbertSpace& space) {
        return qop::site_operator(label, site, space).mat;
      },
      py::arg("label"), py::arg("site"), py::arg("space"));

  m.def(
      "expectation",
      [](const Eigen::VectorXcd& psi, const Eigen::MatrixXcd& op, const qop::HilbertSpace& space) {
        return qop::expectation(make_state(space, psi), qop::Operator(space, op));
      },
      py::arg("psi"), py::arg("op"), py::arg("space"));

  m.def(
      "fidelity",
      [](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, const qop::HilbertSpace& space) {
        return qop::fidelity(make_state(space, a), make_state(space, b));
      },
      py::arg("psi"), py::arg("target"), py::arg("space"));

  m.def(
      "propagator",
      [](const Eigen::MatrixXcd& h, double t_ns) {
        qop::HilbertSpace space({static_cast<int>(h.rows())});
        return qop::matrix_exponential_propagator(qop::Operator(space, h), t_ns).mat;
      },
      py::arg("h"), py::arg("t_ns"), "U = exp(-i h t) for a Hermitian h in rad/ns");

  // --- device ----------------------------------------------------------
  py::class_<device::QubitSpec>(m, "QubitSpec")
      .def_readonly("omega_idle_ghz", &device::QubitSpec::omega_idle_ghz)
      .def_readonly("omega_min_ghz", &device::QubitSpec::omega_min_ghz)
      .def_readonly("omega_max_ghz", &device::QubitSpec::omega_max_ghz)
      .def_readonly("ec_mhz", &device::QubitSpec::ec_mhz)
      .def_readonly("t1_us", &device::QubitSpec::t1_us)
      .def_readonly("t2r_us", &device::QubitSpec::t2r_us)
      .def_readonly("t2e_us", &device::QubitSpec::t2e_us)
      .def_readonly("f0", &device::QubitSpec::f0)
      .def_readonly("f1", &device::QubitSpec::f1);
  py::class_<device::CouplerSpec>(m, "CouplerSpec")
      .def_readonly("omega_max_ghz", &device::CouplerSpec::omega_max_ghz)
      .def_readonly("omega_idle_ghz", &device::CouplerSpec::omega_idle_ghz)
      .def_readonly("g_left_mhz", &device::CouplerSpec::g_left_mhz)
      .def_readonly("g_right_mhz", &device::CouplerSpec::g_right_mhz)
      .def_readonly("j_direct_mhz", &device::CouplerSpec::j_direct_mhz);
  py::class_<device::DeviceSpec>(m, "DeviceSpec")
      .def_readonly("qubits", &device::DeviceSpec::qubits)
      .def_readonly("couplers", &device::DeviceSpec::couplers)
      .def_property_readonly("n_qubits", &device::DeviceSpec::n_qubits);

  m.def("load_device", &device::load_device, py::arg("path"));
  m.def("default_device_path", &device::default_device_path);
  m.def("coupler_frequency", &device::coupler_frequency, py::arg("phi"), py::arg("omega_max_ghz"));
  m.def("coupler_flux_slope", &device::coupler_flux_slope, py::arg("phi_dc"), py::arg("omega_max_ghz"));
  m.def("phi_dc_for_frequency", &device::phi_dc_for_frequency, py::arg("omega_idle_ghz"), py::arg("omega_max_ghz"));
  m.def(
      "sideband_strength",
      [](const std::string& kind, double amplitude, const device::DeviceSpec& dev, int bond, double phi_dc) {
        return device::sideband_strength(device::drive_kind_from_string(kind), amplitude, dev, bond, phi_dc);
      },
      py::arg("kind"), py::arg("amplitude"), py::arg("device"), py::arg("bond"), py::arg("phi_dc"));
  m.def(
      "amplitude_for_strength",
      [](const std::string& kind, double g_mhz, const device::DeviceSpec& dev, int bond, double phi_dc) {
        return device::amplitude_for_strength(device::drive_kind_from_string(kind), g_mhz, dev, bond, phi_dc);
      },
      py::arg("kind"), py::arg("target_g_mhz"), py::arg("device"), py::arg("bond"), py::arg("phi_dc"));

  // --- effective -------------------------------------------------------
  m.def(
      "pair_hamiltonian",
      [](double g_blue, double phi_blue, double g_red, double phi_red) {
        return effective::effective_pair_hamiltonian(effective::EffectiveCoupling(0, g_blue, phi_blue, g_red, phi_red))
            .mat;
      },
      py::arg("g_blue_mhz"), py::arg("phi_blue_rad"), py::arg("g_red_mhz"), py::arg("phi_red_rad"));
  m.def(
      "chain_hamiltonian",
      [](int n_qubits, const std::vector<std::array<double, 4>>& bonds, double detuning_blue_mhz) {
        return effective::effective_chain_hamiltonian(chain_from_bonds(n_qubits, bonds, detuning_blue_mhz)).mat;
      },
      py::arg("n_qubits"), py::arg("bonds"), py::arg("detuning_blue_mhz") = 0.0,
      "bonds: per-bond (g_blue_mhz, phi_blue_rad, g_red_mhz, phi_red_rad)");
  m.def(
      "ising_hamiltonian",
      [](int n, double j_mhz, double bz_mhz) { return effective::ising_hamiltonian(n, j_mhz, bz_mhz).mat; },
      py::arg("n"), py::arg("j_mhz"), py::arg("bz_mhz"));
  m.def(
      "anisotropy_decompose",
      [](double g_blue, double phi_blue, double g_red, double phi_red) {
        auto a = effective::anisotropy_decompose(effective::EffectiveCoupling(0, g_blue, phi_blue, g_red, phi_red));
        return py::make_tuple(a.jxx_mhz, a.jyy_mhz, a.jxy_mhz, a.jyx_mhz);
      },
      py::arg("g_blue_mhz"), py::arg("phi_blue_rad"), py::arg("g_red_mhz"), py::arg("phi_red_rad"));
  m.def(
      "loop_flux",
      [](const std::array<double, 4>& bond12, const std::array<double, 4>& bond23) {
        return effective::loop_flux(effective::EffectiveCoupling(0, bond12[0], bond12[1], bond12[2], bond12[3]),
                                    effective::EffectiveCoupling(1, bond23[0], bond23[1], bond23[2], bond23[3]));
      },
      py::arg("bond12"), py::arg("bond23"));

  // --- dynamics --------------------------------------------------------
  m.def(
      "evolve",
      [](const Eigen::MatrixXcd& h, const Eigen::VectorXcd& psi0, double t_end_ns, double sample_every_ns,
         const std::vector<int>& site_dims) {
        qop::HilbertSpace space(site_dims);
        dynamics::Trajectory traj = dynamics::evolve_exact(
            qop::Operator(space, h), qop::QuantumState::pure(space, psi0), t_end_ns, sample_every_ns);
        return trajectory_populations(traj);
      },
      py::arg("h"), py::arg("psi0"), py::arg("t_end_ns"), py::arg("sample_every_ns"), py::arg("site_dims"),
      "Exact piecewise evolution of a time-independent Hamiltonian (rad/ns)");

  // --- experiments -----------------------------------------------------
  m.def("sqrt_iswap", &experiments::sqrt_iswap);
  m.def("x_gate", &experiments::x_gate);

  m.def(
      "prepare_entangled_state",
      [](bool noisy, const device::DeviceSpec* dev) {
        experiments::PrepOptions opts;
        opts.noisy = noisy;
        if (dev) opts.dev = *dev;
        auto r = experiments::prepare_entangled_state(opts);
        py::dict out;
        out["fidelity_target"] = r.fidelity_target;
        out["fidelity_bell_step"] = r.fidelity_bell_step;
        out["duration_ns"] = r.total_duration_ns;
        return out;
      },
      py::arg("noisy") = false, py::arg("device") = nullptr);

  m.def(
      "run_sideband_rabi",
      [](const device::DeviceSpec& dev, int bond, const std::string& kind, double g_mhz, double duration_ns,
         const std::string& mode, double sample_every_ns) {
        experiments::RabiParams rp;
        rp.bond = bond;
        rp.kind = device::drive_kind_from_string(kind);
        rp.g_mhz = g_mhz;
        rp.duration_ns = duration_ns;
        rp.sample_every_ns = sample_every_ns;
        rp.mode = mode == "full" ? experiments::RabiMode::full : experiments::RabiMode::effective;
        auto r = experiments::run_sideband_rabi(dev, rp);
        py::dict out;
        out["times_ns"] = r.times;
        out["labels"] = r.labels;
        out["populations"] = r.populations;
        out["amplitude_phi0"] = r.amplitude_phi0;
        out["drive_freq_ghz"] = r.drive_freq_ghz;
        return out;
      },
      py::arg("device"), py::arg("bond"), py::arg("kind"), py::arg("g_mhz"), py::arg("duration_ns") = 1000.0,
      py::arg("mode") = "effective", py::arg("sample_every_ns") = 2.0);

  m.def(
      "run_ab_interference",
      [](const std::string& swept, const std::vector<double>& grid, const std::string& initial, double g_mhz,
         double duration_ns, double sample_every_ns) {
        experiments::AbParams ap;
        ap.swept = experiments::swept_phase_from_string(swept);
        ap.grid = grid;
        ap.initial = initial == "entangled" ? experiments::AbInitial::entangled : experiments::AbInitial::ground;
        ap.g_mhz = g_mhz;
        ap.duration_ns = duration_ns;
        ap.sample_every_ns = sample_every_ns;
        auto r = experiments::run_ab_interference(ap);
        py::dict out;
        out["grid"] = r.grid;
        out["times_ns"] = r.times;
        out["labels"] = r.labels;
        out["populations"] = r.populations;
        out["loop_flux"] = r.loop_flux;
        return out;
      },
      py::arg("swept_phase"), py::arg("grid"), py::arg("initial") = "000", py::arg("g_mhz") = 0.75,
      py::arg("duration_ns") = 1000.0, py::arg("sample_every_ns") = 4.0);

  m.def(
      "calibrate_loop_phases",
      [](int n_qubits, double g_mhz, const std::vector<std::array<double, 4>>& bonds) {
        auto chain = chain_from_bonds(n_qubits, bonds, 0.0);
        experiments::CalibrationOptions opts;
        opts.g_mhz = g_mhz;
        auto r = experiments::calibrate_loop_phases(chain, opts);
        py::dict out;
        out["residual_flux"] = r.residual_flux;
        out["frame_thetas"] = r.frame_thetas;
        std::vector<double> corrections;
        for (const auto& f : r.fits) corrections.push_back(f.corrected_phase);
        out["corrected_phases"] = corrections;
        out["converged"] = r.converged;
        return out;
      },
      py::arg("n_qubits"), py::arg("g_mhz"), py::arg("bonds"));

  m.def(
      "loschmidt_echo",
      [](const Eigen::MatrixXcd& h, const Eigen::VectorXcd& psi0, const std::vector<double>& times,
         const std::vector<int>& site_dims) {
        qop::HilbertSpace space(site_dims);
        return experiments::loschmidt_echo(qop::Operator(space, h), qop::QuantumState::pure(space, psi0), times);
      },
      py::arg("h"), py::arg("psi0"), py::arg("times_ns"), py::arg("site_dims"));

  m.def(
      "rate_function",
      [](const std::vector<double>& loschmidt, int n) { return experiments::rate_function(loschmidt, n).values; },
      py::arg("loschmidt"), py::arg("n"));

  m.def(
      "first_minimum",
      [](const std::vector<double>& series, const std::vector<double>& times, int window) {
        auto fm = experiments::first_minimum(series, times, window);
        return py::make_tuple(fm.time_ns, fm.value, fm.is_local);
      },
      py::arg("series"), py::arg("times_ns"), py::arg("window") = 3);

  m.def(
      "apply_readout_error",
      [](const std::vector<double>& populations, const device::DeviceSpec& dev, int first_qubit, int n_qubits) {
        return experiments::apply_readout_error(populations,
                                                experiments::ReadoutModel::from_device(dev, first_qubit, n_qubits));
      },
      py::arg("populations"), py::arg("device"), py::arg("first_qubit") = 0, py::arg("n_qubits") = 6);

  m.def(
      "run_dpt_sweep",
      [](int n_qubits, double j_mhz, const std::vector<double>& bz_over_j, double horizon_ns,
         const std::string& hamiltonian, bool noisy, bool readout, const device::DeviceSpec* dev, int threads) {
        experiments::DptParams p;
        p.n_qubits = n_qubits;
        p.j_mhz = j_mhz;
        p.bz_over_j = bz_over_j;
        p.horizon_ns = horizon_ns;
        p.source = hamiltonian == "ising" ? experiments::DptSource::ising : experiments::DptSource::effective;
        p.noisy = noisy;
        p.readout = readout;
        if (dev) p.dev = *dev;
        p.threads = threads;
        auto r = experiments::run_dpt_sweep(p);
        py::dict out;
        out["bz_over_j"] = r.bz_over_j;
        out["times_ns"] = r.times;
        out["czz"] = r.czz;
        out["loschmidt"] = r.loschmidt;
        out["rate"] = r.rate;
        out["first_min"] = r.first_min;
        out["first_min_time_ns"] = r.first_min_time_ns;
        return out;
      },
      py::arg("n_qubits"), py::arg("j_mhz") = 0.75, py::arg("bz_over_j") = std::vector<double>{},
      py::arg("horizon_ns") = 500.0, py::arg("hamiltonian") = "effective", py::arg("noisy") = false,
      py::arg("readout") = false, py::arg("device") = nullptr, py::arg("threads") = 1);
}
