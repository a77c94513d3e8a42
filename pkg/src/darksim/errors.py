from __future__ import annotations


class DarkSimError(Exception):
    """Root of every error raised by darksim."""


class ModelError(DarkSimError):
    """A model was asked for something physically or structurally infeasible."""


class VmaxExceeded(ModelError):
    def __init__(self, setpoint: float, vmax: float):
        self.setpoint = setpoint
        self.vmax = vmax
        super().__init__(f"VR setpoint {setpoint * 1e3:.1f} mV exceeds Vmax {vmax * 1e3:.1f} mV")


class TraceError(ModelError):
    """Malformed or inconsistent activity trace."""
