"""Floquet-engineered transmon chain simulator (python bindings)."""

from ._core import (  # noqa: F401
    HilbertSpace,
    amplitude_for_strength,
    anisotropy_decompose,
    apply_readout_error,
    calibrate_loop_phases,
    chain_hamiltonian,
    coupler_flux_slope,
    coupler_frequency,
    default_device_path,
    evolve,
    expectation,
    fidelity,
    first_minimum,
    ising_hamiltonian,
    load_device,
    loop_flux,
    loschmidt_echo,
    pair_hamiltonian,
    phi_dc_for_frequency,
    prepare_entangled_state,
    propagator,
    rate_function,
    run_ab_interference,
    run_dpt_sweep,
    run_sideband_rabi,
    sideband_strength,
    site_operator,
    sqrt_iswap,
    x_gate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
